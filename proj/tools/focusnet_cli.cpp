// Command-line front end: train, eval, predict, gradcheck and synth
// subcommands over the segmentation pipeline.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "focusnet/checkpoint.hpp"
#include "focusnet/data.hpp"
#include "focusnet/gradcheck.hpp"
#include "focusnet/metrics.hpp"
#include "focusnet/pnm.hpp"
#include "focusnet/reference.hpp"
#include "focusnet/train.hpp"

namespace fs = std::filesystem;
using namespace focusnet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct RunConfig {
    ArchConfig arch;
    TrainConfig train;
    double split_fraction = 0.8;
    std::uint64_t split_seed = 0;
    double threshold = 0.5;
};

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("bad value for config key " + key + ": " + value);
        }
    }
    return out;
}

// Plain `key = value` config text; every key must be known.
void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw ConfigError("malformed config line " + std::to_string(lineno) + ": " + line);
            }
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "in_channels")
                cfg.arch.in_channels = std::stoi(value);
            else if (key == "encoder_widths")
                cfg.arch.encoder_widths = parse_int_list(value, key);
            else if (key == "decoder_widths")
                cfg.arch.decoder_widths = parse_int_list(value, key);
            else if (key == "bottleneck_width")
                cfg.arch.bottleneck_width = std::stoi(value);
            else if (key == "se_ratio")
                cfg.arch.se_ratio = std::stoi(value);
            else if (key == "dropout_rate")
                cfg.arch.dropout_rate = std::stod(value);
            else if (key == "input_size")
                cfg.arch.input_size = std::stoi(value);
            else if (key == "epochs")
                cfg.train.max_epochs = std::stoi(value);
            else if (key == "batch_size")
                cfg.train.batch_size = std::stoi(value);
            else if (key == "lr")
                cfg.train.lr = std::stod(value);
            else if (key == "smooth")
                cfg.train.smooth = std::stod(value);
            else if (key == "split_fraction")
                cfg.split_fraction = std::stod(value);
            else if (key == "split_seed")
                cfg.split_seed = std::stoull(value);
            else if (key == "threshold")
                cfg.threshold = std::stod(value);
            else
                throw ConfigError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad value for config key " + key + ": " + value);
        } catch (const std::out_of_range&) {
            throw ConfigError("bad value for config key " + key + ": " + value);
        }
    }
}

std::string effective_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << arch_config_to_text(cfg.arch);
    os << "epochs = " << cfg.train.max_epochs << "\n";
    os << "batch_size = " << cfg.train.batch_size << "\n";
    os << "lr = " << cfg.train.lr << "\n";
    os << "smooth = " << cfg.train.smooth << "\n";
    os << "split_fraction = " << cfg.split_fraction << "\n";
    os << "split_seed = " << cfg.split_seed << "\n";
    os << "threshold = " << cfg.threshold << "\n";
    return os.str();
}

DatasetManifest resize_all(const DatasetManifest& data, int target) {
    DatasetManifest out = data;
    for (auto& s : out.samples) s = resize_sample(s, target);
    return out;
}

DatasetManifest normalize_all(const DatasetManifest& data, const NormalizationStats& stats) {
    DatasetManifest out = data;
    for (auto& s : out.samples) s = normalize(s, stats);
    return out;
}

NormalizationStats stats_from_checkpoint(const CheckpointRecord& rec) {
    NormalizationStats stats;
    for (std::size_t i = 0; i < rec.norm_mean.size(); ++i) {
        stats.mean.push_back(rec.norm_mean[i]);
        stats.stddev.push_back(rec.norm_std[i]);
    }
    return stats;
}

void print_report(const MetricsReport& report) {
    std::cout << format_table({{"micro", report.micro.values()},
                               {"macro", report.macro.values()}},
                              {"SE", "SP", "AC", "JI", "DI"});
}

int cmd_train(const std::string& config_path, const std::string& data_dir, int synth_n,
              const std::string& out_dir, std::uint64_t seed, RunConfig cfg) {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    cfg.arch.validate();
    cfg.train.validate();
    if (cfg.split_fraction <= 0.0 || cfg.split_fraction >= 1.0) {
        throw ConfigError("split_fraction must be in (0,1)");
    }
    if (data_dir.empty() == (synth_n == 0)) {
        throw ConfigError("exactly one of --data and --synth is required");
    }
    fs::create_directories(out_dir);

    DatasetManifest raw;
    if (synth_n > 0) {
        // Generate, write and reload so training consumes the same 8-bit
        // quantized pixels that land on disk.
        RngState srng(seed);
        const DatasetManifest generated =
            synth_generate(synth_n, cfg.arch.input_size, srng, cfg.arch.in_channels);
        const std::string synth_dir = (fs::path(out_dir) / "data").string();
        write_dataset(generated, synth_dir);
        raw = load_dataset(synth_dir);
    } else {
        raw = load_dataset(data_dir);
    }

    auto [train_raw, val_raw] = split(raw, cfg.split_fraction, cfg.split_seed);
    // Keep the raw validation images on disk so `eval` can reproduce the run.
    write_dataset(val_raw, (fs::path(out_dir) / "val").string());

    const DatasetManifest train_resized = resize_all(train_raw, cfg.arch.input_size);
    const DatasetManifest val_resized = resize_all(val_raw, cfg.arch.input_size);
    NormalizationStats stats = compute_stats(train_resized);
    // Checkpoints store the stats in single precision; quantize now so that a
    // later `eval` run normalizes with bit-identical values.
    for (auto& m : stats.mean) m = static_cast<float>(m);
    for (auto& s : stats.stddev) s = static_cast<float>(s);
    const DatasetManifest train_set = normalize_all(train_resized, stats);
    DatasetManifest val_set = normalize_all(val_resized, stats);

    cfg.train.seed = seed;
    RngState rng(seed);
    TrainResult result = train(cfg.train, cfg.arch, train_set, val_set, rng);
    for (double m : stats.mean) result.best.norm_mean.push_back(static_cast<float>(m));
    for (double s : stats.stddev) result.best.norm_std.push_back(static_cast<float>(s));

    const std::string ckpt_path = (fs::path(out_dir) / "best.ckpt").string();
    save_checkpoint(result.best, ckpt_path);
    write_history_csv(result.history, (fs::path(out_dir) / "history.csv").string());
    std::ofstream(fs::path(out_dir) / "config.txt") << effective_config_text(cfg);

    const MetricsReport report =
        evaluate(result.best.model, val_set, cfg.threshold, cfg.train.batch_size);
    std::ofstream((fs::path(out_dir) / "metrics.csv")) << report_csv(report);

    std::cout.precision(12);
    std::cout << "best validation loss " << result.best.best_val_loss << " at epoch "
              << result.best.epoch << "\n";
    print_report(report);
    std::cout << "wrote " << ckpt_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, double threshold,
             const std::string& out_csv, int batch_size, double smooth) {
    CheckpointRecord rec = load_checkpoint(ckpt_path);
    const DatasetManifest raw = load_dataset(data_dir);
    if (raw.channels != rec.model.cfg.in_channels) {
        throw ConfigError("dataset has " + std::to_string(raw.channels) +
                          " channels but the checkpoint expects " +
                          std::to_string(rec.model.cfg.in_channels));
    }
    DatasetManifest data = resize_all(raw, rec.model.cfg.input_size);
    if (!rec.norm_mean.empty()) data = normalize_all(data, stats_from_checkpoint(rec));

    const double replay = dataset_dice_loss(rec.model, data, smooth, batch_size);
    std::cout.precision(12);
    std::cout << "recorded validation loss   " << rec.best_val_loss << "\n";
    std::cout << "recomputed validation loss " << replay << "\n";

    const MetricsReport report = evaluate(rec.model, data, threshold, batch_size);
    print_report(report);
    if (!out_csv.empty()) std::ofstream(out_csv) << report_csv(report);
    return 0;
}

// Bilinear resize of a single-channel map to arbitrary dimensions
// (half-pixel centers, clamped); used to map the probability grid back onto
// the source image.
TensorF resize_map(const TensorF& map, int out_h, int out_w) {
    const int h = map.dim(1), w = map.dim(2);
    TensorF out({1, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(std::floor(src_y));
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = src_y - y0;
        for (int x = 0; x < out_w; ++x) {
            const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(std::floor(src_x));
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = src_x - x0;
            const double v = (1 - fy) * ((1 - fx) * map.at3(0, y0, x0) + fx * map.at3(0, y0, x1)) +
                             fy * ((1 - fx) * map.at3(0, y1, x0) + fx * map.at3(0, y1, x1));
            out.at3(0, y, x) = static_cast<float>(v);
        }
    }
    return out;
}

int cmd_predict(const std::string& ckpt_path, const std::string& image_path,
                const std::string& out_prefix, double threshold) {
    CheckpointRecord rec = load_checkpoint(ckpt_path);
    const PnmImage img = read_pnm(image_path);
    if (img.channels != rec.model.cfg.in_channels) {
        throw ConfigError("image has " + std::to_string(img.channels) +
                          " channels but the checkpoint expects " +
                          std::to_string(rec.model.cfg.in_channels));
    }

    SegmentationSample sample;
    sample.id = "input";
    sample.image = TensorF({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                sample.image.at3(c, y, x) = static_cast<float>(
                    img.pixels[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] /
                    255.0);
    sample.mask = TensorF::zeros({1, img.height, img.width});

    SegmentationSample resized = resize_sample(sample, rec.model.cfg.input_size);
    if (!rec.norm_mean.empty()) resized = normalize(resized, stats_from_checkpoint(rec));

    const int s = rec.model.cfg.input_size;
    TensorF x({1, img.channels, s, s});
    std::copy(resized.image.data.begin(), resized.image.data.end(), x.data.begin());
    RngState rng(0);
    auto [prob, trace] = forward(rec.model, x, Mode::kEval, rng);

    TensorF grid({1, s, s});
    std::copy(prob.data.begin(), prob.data.end(), grid.data.begin());
    const TensorF full = resize_map(grid, img.height, img.width);

    PnmImage prob_img;
    prob_img.width = img.width;
    prob_img.height = img.height;
    prob_img.channels = 1;
    prob_img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    PnmImage mask_img = prob_img;
    for (int y = 0; y < img.height; ++y) {
        for (int xx = 0; xx < img.width; ++xx) {
            const double p = std::clamp(static_cast<double>(full.at3(0, y, xx)), 0.0, 1.0);
            prob_img.pixels[static_cast<std::size_t>(y) * img.width + xx] =
                static_cast<std::uint8_t>(std::floor(p * 255.0 + 0.5));
            mask_img.pixels[static_cast<std::size_t>(y) * img.width + xx] =
                p > threshold ? 255 : 0;
        }
    }
    write_pnm(prob_img, out_prefix + "_prob.pgm");
    write_pnm(mask_img, out_prefix + "_mask.pgm");
    std::cout << "wrote " << out_prefix << "_prob.pgm and " << out_prefix << "_mask.pgm\n";
    return 0;
}

double primitive_fd(const std::function<int(Tape<double>&, const std::vector<int>&)>& graph,
                    const std::vector<TensorD>& params) {
    Tape<double> tape;
    std::vector<int> ids;
    for (const auto& p : params) ids.push_back(tape.leaf(p));
    const int loss = graph(tape, ids);
    tape.backward(loss);
    std::vector<TensorD> analytic;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        analytic.push_back(tape.has_grad(ids[i]) ? tape.grad(ids[i])
                                                 : TensorD::zeros(params[i].shape));
    }
    auto f = [&](const std::vector<TensorD>& ps) {
        Tape<double> t2;
        std::vector<int> ids2;
        for (const auto& p : ps) ids2.push_back(t2.leaf(p));
        return t2.val(graph(t2, ids2)).data[0];
    };
    return finite_diff_check(f, params, analytic, 1e-4);
}

TensorD rand_tensor(Shape shape, RngState& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

int cmd_gradcheck(bool corrupt) {
    corrupt_conv_weight_grad_hook() = corrupt;
    RngState rng(1);
    bool ok = true;
    auto report = [&](const std::string& name, double err, double limit) {
        const bool pass = err < limit;
        ok = ok && pass;
        std::printf("%-18s max rel err %.3e (limit %.0e) %s\n", name.c_str(), err, limit,
                    pass ? "ok" : "FAIL");
    };

    auto sq_sum = [](Tape<double>& t, int y) {
        return ops::sum(t, ops::elementwise(t, y, y, EwKind::kMul));
    };

    report("conv2d",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::conv2d(t, ids[0], ids[1], ids[2], 1, Padding::kSame));
               },
               {rand_tensor({2, 2, 5, 5}, rng), rand_tensor({3, 2, 3, 3}, rng),
                rand_tensor({3}, rng)}),
           1e-5);
    report("conv2d_transpose",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::conv2d_transpose(t, ids[0], ids[1], ids[2], 2));
               },
               {rand_tensor({1, 2, 3, 3}, rng), rand_tensor({2, 3, 2, 2}, rng),
                rand_tensor({3}, rng)}),
           1e-5);
    report("sigmoid",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::activation(t, ids[0], Act::kSigmoid));
               },
               {rand_tensor({2, 3, 4, 4}, rng)}),
           1e-5);
    report("relu",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::activation(t, ids[0], Act::kRelu));
               },
               {rand_tensor({40}, rng)}),
           1e-4);
    {
        // Weighted-sum loss: sum(y*y) is degenerate for batch norm because the
        // normalized output has fixed per-channel mean and variance.
        const TensorD c = rand_tensor({2, 2, 3, 3}, rng);
        report("batchnorm2d",
               primitive_fd(
                   [&](Tape<double>& t, const std::vector<int>& ids) {
                       auto state = BnState<double>::init(2);
                       const int y =
                           ops::batchnorm2d(t, ids[0], ids[1], ids[2], state, Mode::kTrain);
                       return ops::sum(t, ops::elementwise(t, y, t.leaf(c), EwKind::kMul));
                   },
                   {rand_tensor({2, 2, 3, 3}, rng), rand_tensor({2}, rng, 0.5, 1.5),
                    rand_tensor({2}, rng)}),
               1e-5);
    }
    report("global_avg_pool",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::global_avg_pool(t, ids[0]));
               },
               {rand_tensor({2, 3, 4, 4}, rng)}),
           1e-5);
    report("dense",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::dense(t, ids[0], ids[1], ids[2]));
               },
               {rand_tensor({2, 3}, rng), rand_tensor({3, 2}, rng), rand_tensor({2}, rng)}),
           1e-5);
    report("elementwise",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   const int m = ops::elementwise(t, ids[0], ids[1], EwKind::kMul);
                   return sq_sum(t, ops::elementwise(t, m, ids[1], EwKind::kAdd));
               },
               {rand_tensor({3, 4}, rng), rand_tensor({3, 4}, rng)}),
           1e-5);
    report("concat_channels",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   return sq_sum(t, ops::concat_channels(t, ids[0], ids[1]));
               },
               {rand_tensor({1, 2, 3, 3}, rng), rand_tensor({1, 3, 3, 3}, rng)}),
           1e-5);
    report("dropout",
           primitive_fd(
               [&](Tape<double>& t, const std::vector<int>& ids) {
                   RngState r(3);
                   return sq_sum(t, ops::dropout(t, ids[0], 0.3, Mode::kTrain, r));
               },
               {rand_tensor({4, 5}, rng)}),
           1e-5);
    {
        RngState mask_rng(4);
        TensorD gt({1, 1, 4, 4});
        for (auto& v : gt.data) v = mask_rng.bernoulli(0.5) ? 1.0 : 0.0;
        report("dice_loss",
               primitive_fd(
                   [&](Tape<double>& t, const std::vector<int>& ids) {
                       return ops::dice_loss(t, ops::activation(t, ids[0], Act::kSigmoid), gt,
                                             1.0);
                   },
                   {rand_tensor({1, 1, 4, 4}, rng)}),
               1e-5);
    }

    // End-to-end: sampled parameter probes on a tiny network with dice loss.
    {
        const ArchConfig cfg = tiny_config(8, 1);
        RngState brng(5);
        const FocusNetParams<double> model = build<double>(cfg, brng);
        const TensorD x = rand_tensor({2, 1, 8, 8}, rng, 0.0, 1.0);
        TensorD gt({2, 1, 8, 8});
        for (auto& v : gt.data) v = rng.bernoulli(0.4) ? 1.0 : 0.0;

        auto loss_of = [&](const FocusNetParams<double>& m0, GradientSet<double>* grads) {
            FocusNetParams<double> m = m0;
            Tape<double> t;
            ParamTable<double> pt(t, m.params, m.bn);
            ForwardOptions opt;
            opt.mode = Mode::kTrain;
            opt.dropout_override = 0.0;
            RngState r(0);
            const int prob = forward_on_tape(t, pt, cfg, t.leaf(x), opt, r);
            const int loss = ops::dice_loss(t, prob, gt, 1.0);
            const double lv = t.val(loss).data[0];
            if (grads) {
                t.backward(loss);
                *grads = pt.collect_grads();
            }
            return lv;
        };
        GradientSet<double> grads;
        loss_of(model, &grads);
        // Per probe, take the best of two step sizes: the larger drowns
        // cancellation noise on near-zero gradients, the smaller drowns
        // curvature from shifting batch-norm statistics. A wrong backward
        // rule fails at both.
        double worst = 0.0;
        RngState pick(6);
        for (const auto& [name, g] : grads) {
            const auto i = static_cast<std::size_t>(pick.uniform_int(g.data.size()));
            double best = 1.0;
            for (const double step : {1e-4, 1e-6}) {
                FocusNetParams<double> up = model;
                up.params.at(name).data[i] += step;
                FocusNetParams<double> down = model;
                down.params.at(name).data[i] -= step;
                const double numeric =
                    (loss_of(up, nullptr) - loss_of(down, nullptr)) / (2 * step);
                const double rel = std::abs(g.data[i] - numeric) /
                                   std::max(1e-6, std::abs(g.data[i]) + std::abs(numeric));
                best = std::min(best, rel);
            }
            worst = std::max(worst, best);
        }
        report("model end-to-end", worst, 1e-4);
    }

    corrupt_conv_weight_grad_hook() = false;
    return ok ? 0 : 1;
}

int cmd_synth(int n, int size, int channels, std::uint64_t seed, const std::string& out_dir) {
    RngState rng(seed);
    const DatasetManifest data = synth_generate(n, size, rng, channels);
    write_dataset(data, out_dir);
    std::cout << "wrote " << data.size() << " image/mask pairs to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FocusNet segmentation toolkit"};
    app.require_subcommand(1);

    RunConfig defaults;

    auto* train_cmd = app.add_subcommand("train", "train a model");
    std::string config_path, data_dir, out_dir = "run";
    int synth_n = 0;
    std::uint64_t seed = 0;
    train_cmd->add_option("--config", config_path, "key = value config file");
    train_cmd->add_option("--data", data_dir, "dataset directory (images/ + masks/)");
    train_cmd->add_option("--synth", synth_n, "generate N synthetic samples instead of --data");
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--seed", seed, "random seed");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ckpt_path, eval_data, eval_csv;
    double threshold = 0.5;
    int batch_size = 8;
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--threshold", threshold, "binarization threshold");
    eval_cmd->add_option("--batch", batch_size, "evaluation batch size");
    eval_cmd->add_option("--csv", eval_csv, "also write the report CSV here");
    double eval_smooth = 1.0;
    eval_cmd->add_option("--smooth", eval_smooth, "dice smoothing term used in training");

    auto* predict_cmd = app.add_subcommand("predict", "segment a single image");
    std::string pred_ckpt, image_path, out_prefix = "prediction";
    double pred_threshold = 0.5;
    predict_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
    predict_cmd->add_option("--image", image_path, "input PGM/PPM image")->required();
    predict_cmd->add_option("--out", out_prefix, "output path prefix");
    predict_cmd->add_option("--threshold", pred_threshold, "binarization threshold");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference self test");
    bool corrupt = false;
    grad_cmd->add_flag("--corrupt", corrupt,
                       "deliberately corrupt a backward rule (verifies detection)");

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
    int sn = 8, ssize = 64, schannels = 1;
    std::uint64_t sseed = 0;
    std::string sout = "synth-data";
    synth_cmd->add_option("--n", sn, "number of samples");
    synth_cmd->add_option("--size", ssize, "image size (min 16)");
    synth_cmd->add_option("--channels", schannels, "1 or 3");
    synth_cmd->add_option("--seed", sseed, "random seed");
    synth_cmd->add_option("--out", sout, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            return cmd_train(config_path, data_dir, synth_n, out_dir, seed, defaults);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(ckpt_path, eval_data, threshold, eval_csv, batch_size, eval_smooth);
        }
        if (predict_cmd->parsed()) {
            return cmd_predict(pred_ckpt, image_path, out_prefix, pred_threshold);
        }
        if (grad_cmd->parsed()) {
            return cmd_gradcheck(corrupt);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(sn, ssize, schannels, sseed, sout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParamError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
