#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "focusnet/blocks.hpp"
#include "focusnet/ops.hpp"
#include "focusnet/rng.hpp"

namespace focusnet {

struct ArchConfig {
    int in_channels = 3;
    std::vector<int> encoder_widths = {32, 64, 128, 256};
    int bottleneck_width = 512;
    std::vector<int> decoder_widths = {256, 128, 64, 32};
    int se_ratio = 8;
    double dropout_rate = 0.2;
    int input_size = 256;

    int depth() const { return static_cast<int>(encoder_widths.size()); }

    void validate() const {
        if (in_channels != 1 && in_channels != 3) {
            throw ConfigError("in_channels must be 1 or 3, got " + std::to_string(in_channels));
        }
        if (encoder_widths.empty()) throw ConfigError("encoder_widths must be non-empty");
        if (decoder_widths.size() != encoder_widths.size()) {
            throw ConfigError("decoder_widths length " + std::to_string(decoder_widths.size()) +
                              " must equal encoder_widths length " +
                              std::to_string(encoder_widths.size()));
        }
        for (int w : encoder_widths)
            if (w <= 0) throw ConfigError("encoder width must be positive");
        for (int w : decoder_widths)
            if (w <= 0) throw ConfigError("decoder width must be positive");
        if (bottleneck_width <= 0) throw ConfigError("bottleneck_width must be positive");
        for (std::size_t d = 0; d < decoder_widths.size(); ++d) {
            if (decoder_widths[d] != encoder_widths[encoder_widths.size() - 1 - d]) {
                throw ConfigError(
                    "decoder widths must mirror encoder widths so gate channels align: decoder[" +
                    std::to_string(d) + "]=" + std::to_string(decoder_widths[d]) +
                    " vs encoder=" +
                    std::to_string(encoder_widths[encoder_widths.size() - 1 - d]));
            }
        }
        if (se_ratio < 1) throw ConfigError("se_ratio must be >= 1");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
            throw ConfigError("dropout_rate must be in [0,1)");
        }
        int div = 1;
        for (int i = 0; i < depth(); ++i) div *= 2;
        if (input_size <= 0 || input_size % div != 0) {
            throw ConfigError("input_size " + std::to_string(input_size) +
                              " must be divisible by 2^depth = " + std::to_string(div));
        }
    }

    bool operator==(const ArchConfig&) const = default;
};

// Declarative parameter layout, shared by param_count and build so the two can
// never drift apart.
struct LayerDecl {
    enum class Init { kHeConv, kHeTConv, kHeDense, kZero, kOne };
    std::string name;
    Shape shape;
    Init init;
};

struct ModelDecl {
    std::vector<LayerDecl> layers;
    std::vector<std::pair<std::string, int>> bn_layers;  // name -> channels
};

namespace detail {

inline void decl_conv(ModelDecl& d, const std::string& prefix, int in, int out, int k) {
    d.layers.push_back({prefix + "/w", {out, in, k, k}, LayerDecl::Init::kHeConv});
    d.layers.push_back({prefix + "/b", {out}, LayerDecl::Init::kZero});
}

inline void decl_bn(ModelDecl& d, const std::string& prefix, int ch) {
    d.layers.push_back({prefix + "/gamma", {ch}, LayerDecl::Init::kOne});
    d.layers.push_back({prefix + "/beta", {ch}, LayerDecl::Init::kZero});
    d.bn_layers.emplace_back(prefix, ch);
}

inline void decl_conv_unit(ModelDecl& d, const std::string& prefix, int in, int out, int k) {
    decl_conv(d, prefix, in, out, k);
    decl_bn(d, prefix + "/bn", out);
}

inline void decl_tconv_unit(ModelDecl& d, const std::string& prefix, int in, int out) {
    d.layers.push_back({prefix + "/w", {in, out, 2, 2}, LayerDecl::Init::kHeTConv});
    d.layers.push_back({prefix + "/b", {out}, LayerDecl::Init::kZero});
    decl_bn(d, prefix + "/bn", out);
}

inline void decl_conv_stage(ModelDecl& d, const std::string& prefix, int in, int out) {
    decl_conv_unit(d, prefix + "/conv1", in, out, 3);
    decl_conv_unit(d, prefix + "/conv2", out, out, 3);
}

inline void decl_se(ModelDecl& d, const std::string& prefix, int ch, int ratio) {
    const int hidden = std::max(1, ch / ratio);
    d.layers.push_back({prefix + "/reduce/w", {ch, hidden}, LayerDecl::Init::kHeDense});
    d.layers.push_back({prefix + "/reduce/b", {hidden}, LayerDecl::Init::kZero});
    d.layers.push_back({prefix + "/expand/w", {hidden, ch}, LayerDecl::Init::kHeDense});
    d.layers.push_back({prefix + "/expand/b", {ch}, LayerDecl::Init::kZero});
}

inline void decl_residual(ModelDecl& d, const std::string& prefix, int in, int out) {
    decl_bn(d, prefix + "/bn1", in);
    decl_conv(d, prefix + "/conv1", in, out, 3);
    decl_bn(d, prefix + "/bn2", out);
    decl_conv(d, prefix + "/conv2", out, out, 3);
    if (in != out) decl_conv(d, prefix + "/proj", in, out, 1);
}

}  // namespace detail

inline ModelDecl declare_model(const ArchConfig& cfg) {
    cfg.validate();
    using namespace detail;
    ModelDecl d;
    const int depth = cfg.depth();
    const auto& ew = cfg.encoder_widths;
    const auto& dw = cfg.decoder_widths;
    const auto next_width = [&](int l) {
        return (l + 1 < depth) ? ew[static_cast<std::size_t>(l + 1)] : cfg.bottleneck_width;
    };

    // Attention branch.
    for (int l = 0; l < depth; ++l) {
        const int in = (l == 0) ? cfg.in_channels : ew[static_cast<std::size_t>(l)];
        decl_conv_stage(d, "attn/enc" + std::to_string(l), in, ew[static_cast<std::size_t>(l)]);
        decl_conv_unit(d, "attn/down" + std::to_string(l), ew[static_cast<std::size_t>(l)],
                       next_width(l), 3);
    }
    decl_conv_stage(d, "attn/bottleneck", cfg.bottleneck_width, cfg.bottleneck_width);
    for (int s = 0; s < depth; ++s) {
        const int in = (s == 0) ? cfg.bottleneck_width : dw[static_cast<std::size_t>(s - 1)];
        const int out = dw[static_cast<std::size_t>(s)];
        decl_tconv_unit(d, "attn/up" + std::to_string(s), in, out);
        const int skip = ew[static_cast<std::size_t>(depth - 1 - s)];
        decl_conv_stage(d, "attn/dec" + std::to_string(s), out + skip, out);
    }

    // Segmentation branch.
    for (int l = 0; l < depth; ++l) {
        const int in = (l == 0) ? cfg.in_channels : ew[static_cast<std::size_t>(l)];
        const int out = ew[static_cast<std::size_t>(l)];
        const std::string p = "seg/enc" + std::to_string(l);
        decl_residual(d, p + "/res1", in, out);
        decl_se(d, p + "/se1", out, cfg.se_ratio);
        decl_residual(d, p + "/res2", out, out);
        decl_se(d, p + "/se2", out, cfg.se_ratio);
        decl_conv_unit(d, "seg/down" + std::to_string(l), out, next_width(l), 3);
    }
    decl_residual(d, "seg/bottleneck/res", cfg.bottleneck_width, cfg.bottleneck_width);
    decl_se(d, "seg/bottleneck/se", cfg.bottleneck_width, cfg.se_ratio);
    for (int s = 0; s < depth; ++s) {
        const int in = (s == 0) ? cfg.bottleneck_width : dw[static_cast<std::size_t>(s - 1)];
        const int out = dw[static_cast<std::size_t>(s)];
        const std::string p = "seg/dec" + std::to_string(s);
        decl_tconv_unit(d, "seg/up" + std::to_string(s), in, out);
        const int skip = ew[static_cast<std::size_t>(depth - 1 - s)];
        decl_residual(d, p + "/res", out + skip, out);
        decl_se(d, p + "/se", out, cfg.se_ratio);
    }
    decl_conv(d, "seg/head", dw.back(), 1, 1);
    return d;
}

struct ParamLedger {
    std::vector<std::pair<std::string, Shape>> entries;
    std::int64_t total = 0;
};

// Closed-form parameter count from declared shapes; allocates nothing.
inline ParamLedger param_count(const ArchConfig& cfg) {
    ParamLedger ledger;
    for (const auto& layer : declare_model(cfg).layers) {
        ledger.entries.emplace_back(layer.name, layer.shape);
        ledger.total += shape_numel(layer.shape);
    }
    return ledger;
}

// All named parameter tensors plus per-layer batch-norm running stats.
template <typename T>
struct FocusNetParams {
    ArchConfig cfg;
    std::map<std::string, Tensor<T>> params;
    std::map<std::string, BnState<T>> bn;

    std::int64_t num_elements() const {
        std::int64_t n = 0;
        for (const auto& [name, tensor] : params) n += tensor.size();
        return n;
    }

    template <typename U>
    FocusNetParams<U> cast() const {
        FocusNetParams<U> out;
        out.cfg = cfg;
        for (const auto& [name, tensor] : params) out.params[name] = tensor.template cast<U>();
        for (const auto& [name, state] : bn) {
            BnState<U> s;
            s.running_mean = state.running_mean.template cast<U>();
            s.running_var = state.running_var.template cast<U>();
            out.bn[name] = s;
        }
        return out;
    }
};

// He (fan-in) initialization of every declared layer; deterministic per seed.
template <typename T>
FocusNetParams<T> build(const ArchConfig& cfg, RngState& rng) {
    const ModelDecl decl = declare_model(cfg);
    FocusNetParams<T> m;
    m.cfg = cfg;
    for (const auto& layer : decl.layers) {
        Tensor<T> t(layer.shape);
        switch (layer.init) {
            case LayerDecl::Init::kHeConv: {
                // fan-in = Cin * k * k for [Co,Ci,k,k].
                const double fan_in =
                    static_cast<double>(layer.shape[1]) * layer.shape[2] * layer.shape[3];
                const double std_dev = std::sqrt(2.0 / fan_in);
                for (auto& v : t.data) v = static_cast<T>(rng.normal() * std_dev);
                break;
            }
            case LayerDecl::Init::kHeTConv: {
                // Transposed kernels are [Cin,Cout,k,k]; the first axis is the input side.
                const double fan_in =
                    static_cast<double>(layer.shape[0]) * layer.shape[2] * layer.shape[3];
                const double std_dev = std::sqrt(2.0 / fan_in);
                for (auto& v : t.data) v = static_cast<T>(rng.normal() * std_dev);
                break;
            }
            case LayerDecl::Init::kHeDense: {
                const double std_dev = std::sqrt(2.0 / static_cast<double>(layer.shape[0]));
                for (auto& v : t.data) v = static_cast<T>(rng.normal() * std_dev);
                break;
            }
            case LayerDecl::Init::kZero:
                break;
            case LayerDecl::Init::kOne:
                for (auto& v : t.data) v = T(1);
                break;
        }
        m.params.emplace(layer.name, std::move(t));
    }
    for (const auto& [name, channels] : decl.bn_layers) {
        m.bn.emplace(name, BnState<T>::init(channels));
    }
    return m;
}

// Per-level feature maps recorded during forward, indexed by encoder level
// (level 0 = full resolution).
template <typename T>
struct ForwardTrace {
    std::vector<Tensor<T>> attention_encoder;  // E_l
    std::vector<Tensor<T>> gate_logits;        // D_l
    std::vector<Tensor<T>> gates;              // sigmoid(D_l)
    std::vector<Tensor<T>> gated;              // A_l
    Tensor<T> prob;
};

enum class GateMode { kNormal, kOnes, kSkip };

struct ForwardOptions {
    Mode mode = Mode::kEval;
    GateMode gate_mode = GateMode::kNormal;
    double dropout_override = -1.0;  // >= 0 replaces cfg.dropout_rate
};

// Graph construction on an existing tape; returns the probability-map id.
template <typename T>
int forward_on_tape(Tape<T>& t, ParamTable<T>& pt, const ArchConfig& cfg, int x_id,
                    const ForwardOptions& opt, RngState& rng, ForwardTrace<T>* trace = nullptr) {
    using namespace blocks;
    const Tensor<T>& x = t.val(x_id);
    if (x.rank() != 4 || x.dim(1) != cfg.in_channels || x.dim(2) != cfg.input_size ||
        x.dim(3) != cfg.input_size) {
        throw ShapeError("forward input " + shape_str(x.shape) + " does not match config (channels " +
                         std::to_string(cfg.in_channels) + ", size " +
                         std::to_string(cfg.input_size) + ")");
    }
    const int depth = cfg.depth();
    const Mode mode = opt.mode;
    const double drop = opt.dropout_override >= 0.0 ? opt.dropout_override : cfg.dropout_rate;

    // Attention branch: encoder, bottleneck, decoder with skip concatenation.
    std::vector<int> enc_out(static_cast<std::size_t>(depth));
    int h = x_id;
    for (int l = 0; l < depth; ++l) {
        h = conv_stage(t, pt, "attn/enc" + std::to_string(l), h, mode);
        enc_out[static_cast<std::size_t>(l)] = h;
        h = down_block(t, pt, "attn/down" + std::to_string(l), h, mode);
    }
    h = conv_stage(t, pt, "attn/bottleneck", h, mode);
    std::vector<int> gate_logit(static_cast<std::size_t>(depth), -1);
    for (int s = 0; s < depth; ++s) {
        const int level = depth - 1 - s;
        h = up_block(t, pt, "attn/up" + std::to_string(s), h, mode);
        h = ops::concat_channels(t, h, enc_out[static_cast<std::size_t>(level)]);
        int pre = -1;
        h = conv_stage_tapped(t, pt, "attn/dec" + std::to_string(s), h, mode, &pre);
        gate_logit[static_cast<std::size_t>(level)] = pre;
    }

    if (trace) {
        trace->attention_encoder.clear();
        trace->gate_logits.clear();
        trace->gates.clear();
        trace->gated.clear();
        for (int l = 0; l < depth; ++l) {
            trace->attention_encoder.push_back(t.val(enc_out[static_cast<std::size_t>(l)]));
            trace->gate_logits.push_back(t.val(gate_logit[static_cast<std::size_t>(l)]));
        }
    }

    // Segmentation branch: residual/SE encoder gated by sigmoid(D_l).
    std::vector<int> seg_skip(static_cast<std::size_t>(depth));
    h = x_id;
    for (int l = 0; l < depth; ++l) {
        const std::string p = "seg/enc" + std::to_string(l);
        h = preact_residual_block(t, pt, p + "/res1", h, mode);
        h = se_block(t, pt, p + "/se1", h);
        const int d_l = gate_logit[static_cast<std::size_t>(l)];
        if (!t.val(h).same_shape(t.val(d_l))) {
            throw ShapeError("gating misalignment at level " + std::to_string(l) + ": features " +
                             shape_str(t.val(h).shape) + " vs gate logits " +
                             shape_str(t.val(d_l).shape));
        }
        int gated = h;
        int gate = -1;
        if (opt.gate_mode == GateMode::kNormal) {
            auto res = gated_multiply(t, h, d_l);
            gated = res.out;
            gate = res.gate;
        } else if (opt.gate_mode == GateMode::kOnes) {
            const int ones = t.leaf(Tensor<T>::ones(t.val(h).shape));
            gated = ops::elementwise(t, h, ones, EwKind::kMul);
        }  // kSkip: leave gated == h
        if (trace) {
            if (gate >= 0) trace->gates.push_back(t.val(gate));
            trace->gated.push_back(t.val(gated));
        }
        h = preact_residual_block(t, pt, p + "/res2", gated, mode);
        h = se_block(t, pt, p + "/se2", h);
        h = ops::dropout(t, h, drop, mode, rng);
        seg_skip[static_cast<std::size_t>(l)] = h;
        h = down_block(t, pt, "seg/down" + std::to_string(l), h, mode);
    }
    h = preact_residual_block(t, pt, "seg/bottleneck/res", h, mode);
    h = se_block(t, pt, "seg/bottleneck/se", h);
    h = ops::dropout(t, h, drop, mode, rng);
    for (int s = 0; s < depth; ++s) {
        const int level = depth - 1 - s;
        const std::string p = "seg/dec" + std::to_string(s);
        h = up_block(t, pt, "seg/up" + std::to_string(s), h, mode);
        h = ops::concat_channels(t, h, seg_skip[static_cast<std::size_t>(level)]);
        h = preact_residual_block(t, pt, p + "/res", h, mode);
        h = se_block(t, pt, p + "/se", h);
        h = ops::dropout(t, h, drop, mode, rng);
    }
    int logits = ops::conv2d(t, h, pt.id("seg/head/w"), pt.id("seg/head/b"), 1, Padding::kSame);
    int prob = ops::activation(t, logits, Act::kSigmoid);
    if (trace) trace->prob = t.val(prob);
    return prob;
}

// Convenience wrapper running on a private tape.
template <typename T>
std::pair<Tensor<T>, ForwardTrace<T>> forward(FocusNetParams<T>& m, const Tensor<T>& x, Mode mode,
                                              RngState& rng) {
    Tape<T> tape;
    ParamTable<T> pt(tape, m.params, m.bn);
    ForwardTrace<T> trace;
    ForwardOptions opt;
    opt.mode = mode;
    const int x_id = tape.leaf(x);
    forward_on_tape(tape, pt, m.cfg, x_id, opt, rng, &trace);
    return {trace.prob, trace};
}

inline ArchConfig tiny_config(int input_size = 32, int in_channels = 1) {
    ArchConfig cfg;
    cfg.in_channels = in_channels;
    cfg.encoder_widths = {4, 8};
    cfg.bottleneck_width = 16;
    cfg.decoder_widths = {8, 4};
    cfg.input_size = input_size;
    return cfg;
}

}  // namespace focusnet
