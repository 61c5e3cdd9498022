#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "focusnet/checkpoint.hpp"
#include "focusnet/data.hpp"
#include "focusnet/model.hpp"
#include "focusnet/optim.hpp"

namespace focusnet {

struct TrainConfig {
    int max_epochs = 80;
    int batch_size = 8;
    std::uint64_t seed = 0;
    double smooth = 1.0;
    double lr = 1e-3;
    std::string checkpoint_path;  // empty: keep the best record in memory only

    void validate() const {
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (smooth <= 0) throw ConfigError("smooth must be > 0");
        if (lr <= 0) throw ConfigError("lr must be > 0");
    }
};

struct EpochStats {
    int epoch;
    double train_loss;
    double val_loss;
    double lr;
};

struct TrainResult {
    std::vector<EpochStats> history;
    CheckpointRecord best;
};

namespace detail {

template <typename T>
Tensor<T> stack_images(const DatasetManifest& data, const std::vector<std::size_t>& idx,
                       std::size_t start, std::size_t count) {
    const auto& first = data.samples[idx[start]].image;
    Tensor<T> batch({static_cast<int>(count), first.dim(0), first.dim(1), first.dim(2)});
    for (std::size_t i = 0; i < count; ++i) {
        const auto& img = data.samples[idx[start + i]].image;
        for (std::int64_t j = 0; j < img.size(); ++j) {
            batch.data[static_cast<std::size_t>(static_cast<std::int64_t>(i) * img.size() + j)] =
                static_cast<T>(img.data[static_cast<std::size_t>(j)]);
        }
    }
    return batch;
}

template <typename T>
Tensor<T> stack_masks(const DatasetManifest& data, const std::vector<std::size_t>& idx,
                      std::size_t start, std::size_t count) {
    const auto& first = data.samples[idx[start]].mask;
    Tensor<T> batch({static_cast<int>(count), 1, first.dim(1), first.dim(2)});
    for (std::size_t i = 0; i < count; ++i) {
        const auto& m = data.samples[idx[start + i]].mask;
        for (std::int64_t j = 0; j < m.size(); ++j) {
            batch.data[static_cast<std::size_t>(static_cast<std::int64_t>(i) * m.size() + j)] =
                static_cast<T>(m.data[static_cast<std::size_t>(j)]);
        }
    }
    return batch;
}

}  // namespace detail

// Pooled soft dice loss over a whole dataset in eval mode (single ratio over
// all pixels of all images).
inline double dataset_dice_loss(FocusNetParams<float>& model, const DatasetManifest& data,
                                double smooth, int batch_size) {
    if (data.samples.empty()) throw DataError("dataset_dice_loss: empty dataset");
    std::vector<std::size_t> idx(data.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    RngState rng(0);
    double inter = 0, psum = 0, gsum = 0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                                        idx.size() - start);
        TensorF x = detail::stack_images<float>(data, idx, start, count);
        TensorF gt = detail::stack_masks<float>(data, idx, start, count);
        auto [prob, trace] = forward(model, x, Mode::kEval, rng);
        for (std::size_t i = 0; i < prob.data.size(); ++i) {
            inter += static_cast<double>(prob.data[i]) * static_cast<double>(gt.data[i]);
            psum += static_cast<double>(prob.data[i]);
            gsum += static_cast<double>(gt.data[i]);
        }
    }
    return 1.0 - (2.0 * inter + smooth) / (psum + gsum + smooth);
}

inline TrainResult train(const TrainConfig& cfg, const ArchConfig& arch,
                         const DatasetManifest& train_set, const DatasetManifest& val_set,
                         RngState& rng) {
    cfg.validate();
    arch.validate();
    if (train_set.samples.empty() || val_set.samples.empty()) {
        throw DataError("train requires non-empty training and validation sets");
    }
    if (train_set.samples.front().image.dim(0) != arch.in_channels) {
        throw ConfigError("dataset has " +
                          std::to_string(train_set.samples.front().image.dim(0)) +
                          " channels but the architecture expects " +
                          std::to_string(arch.in_channels));
    }

    FocusNetParams<float> model = build<float>(arch, rng);
    AdamState<float> adam;
    adam.lr = cfg.lr;
    PlateauState plateau;
    plateau.lr = cfg.lr;

    TrainResult result;
    result.best.best_val_loss = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(train_set.samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
        }

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min<std::size_t>(
                static_cast<std::size_t>(cfg.batch_size), order.size() - start);
            TensorF x = detail::stack_images<float>(train_set, order, start, count);
            TensorF gt = detail::stack_masks<float>(train_set, order, start, count);

            Tape<float> tape;
            ParamTable<float> pt(tape, model.params, model.bn);
            ForwardOptions opt;
            opt.mode = Mode::kTrain;
            const int x_id = tape.leaf(std::move(x));
            const int prob_id = forward_on_tape(tape, pt, arch, x_id, opt, rng);
            const int loss_id =
                ops::dice_loss(tape, prob_id, gt, static_cast<float>(cfg.smooth));
            const double loss = static_cast<double>(tape.val(loss_id).data[0]);
            if (!std::isfinite(loss)) {
                throw NumericError("training loss is not finite at epoch " +
                                   std::to_string(epoch + 1));
            }
            tape.backward(loss_id);
            const GradientSet<float> grads = pt.collect_grads();
            adam.lr = plateau.lr;
            adam_step(model.params, grads, adam);

            loss_sum += loss * static_cast<double>(count);
            seen += count;
        }

        const double train_loss = loss_sum / static_cast<double>(seen);
        const double val_loss = dataset_dice_loss(model, val_set, cfg.smooth, cfg.batch_size);
        if (!std::isfinite(val_loss)) {
            throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch + 1));
        }

        if (val_loss < result.best.best_val_loss) {
            result.best.model = model;
            result.best.best_val_loss = val_loss;
            result.best.epoch = epoch + 1;
        }
        plateau_update(plateau, val_loss);
        result.history.push_back({epoch + 1, train_loss, val_loss, plateau.lr});
    }

    if (!cfg.checkpoint_path.empty()) save_checkpoint(result.best, cfg.checkpoint_path);
    return result;
}

inline void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write history CSV: " + path);
    os.precision(10);
    os << "epoch,train_loss,val_loss,lr\n";
    for (const auto& e : history) {
        os << e.epoch << "," << e.train_loss << "," << e.val_loss << "," << e.lr << "\n";
    }
}

}  // namespace focusnet
