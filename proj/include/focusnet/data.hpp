#pragma once

#include <string>
#include <utility>
#include <vector>

#include "focusnet/rng.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet {

// Image in [0,1] intensity, CHW; binary mask 1HW with matching spatial dims.
struct SegmentationSample {
    TensorF image;
    TensorF mask;
    std::string id;
};

struct DatasetManifest {
    std::vector<SegmentationSample> samples;
    int channels = 1;
    std::string source;

    std::size_t size() const { return samples.size(); }
};

// Per-channel scalar mean/std over the training split, [0,1] intensity units.
struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool clamped = false;  // set when a constant channel forced the std floor
};

struct AugmentationConfig {
    double hflip_prob = 0.5;
    double vflip_prob = 0.5;
    double zoom_lo = 0.8;
    double zoom_hi = 1.2;
    double channel_shift = 0.1;    // RGB only
    double shift_fraction = 0.1;   // fraction of augmented draws that get a shift

    void validate() const;
};

// Layout: root/images/*.pgm|*.ppm and root/masks/*.pgm with matching stems.
// Masks binarize at pixel >= 128; intensities scale to [0,1]; samples sorted
// by stem.
DatasetManifest load_dataset(const std::string& root);

// Writes the standard directory layout (PGM for single channel, PPM for RGB;
// masks always PGM with values 0/255).
void write_dataset(const DatasetManifest& manifest, const std::string& root);

// Bilinear image resize (half-pixel centers); nearest-neighbor mask resize.
SegmentationSample resize_sample(const SegmentationSample& sample, int target);

NormalizationStats compute_stats(const DatasetManifest& train);
SegmentationSample normalize(const SegmentationSample& sample, const NormalizationStats& stats);

void save_stats(const NormalizationStats& stats, const std::string& path);
NormalizationStats load_stats(const std::string& path);

SegmentationSample augment(const SegmentationSample& sample, const AugmentationConfig& cfg,
                           RngState& rng);

DatasetManifest expand_dataset(const DatasetManifest& manifest, const AugmentationConfig& cfg,
                               std::size_t target_size, RngState& rng);

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, double fraction,
                                                  std::uint64_t seed);

// Synthetic scenes: noisy background plus 1-3 filled ellipses; the mask is
// the exact union of the analytic ellipse interiors.
struct Ellipse {
    double cx, cy, rx, ry, angle;
    double intensity;
};

bool ellipse_contains(const Ellipse& e, double x, double y);

std::vector<Ellipse> random_ellipses(int size, RngState& rng);

SegmentationSample render_scene(const std::vector<Ellipse>& ellipses, int size, int channels,
                                RngState& rng, const std::string& id);

DatasetManifest synth_generate(int n, int size, RngState& rng, int channels = 1);

}  // namespace focusnet
