#pragma once

#include <string>
#include <vector>

#include "focusnet/model.hpp"

namespace focusnet {

// On-disk format (all integers little-endian u32 unless noted):
//   magic "FNET", version, config text block (length-prefixed),
//   normalization channel count + per-channel f32 mean/std,
//   best validation loss (f64), epoch, tensor count,
//   then per tensor: name length, name bytes, rank, dims, raw f32 values.
// Parameter tensors and batch-norm running stats share the tensor list; stats
// are named "<layer>/running_mean" and "<layer>/running_var".
struct CheckpointRecord {
    FocusNetParams<float> model;
    std::vector<float> norm_mean;  // empty when no normalization was applied
    std::vector<float> norm_std;
    double best_val_loss = 0.0;
    int epoch = 0;
};

std::string arch_config_to_text(const ArchConfig& cfg);
ArchConfig arch_config_from_text(const std::string& text);

void save_checkpoint(const CheckpointRecord& rec, const std::string& path);
CheckpointRecord load_checkpoint(const std::string& path);

}  // namespace focusnet
