#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>

#include "focusnet/ops.hpp"

namespace focusnet {

// Binds named parameter tensors to tape ids, pushing each parameter as a tape
// leaf on first use. After backward(), collect_grads() yields one gradient per
// parameter (zeros for parameters the loss never reached).
template <typename T>
class ParamTable {
public:
    ParamTable(Tape<T>& tape, std::map<std::string, Tensor<T>>& params,
               std::map<std::string, BnState<T>>& bn)
        : tape_(&tape), params_(&params), bn_(&bn) {}

    int id(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        auto pit = params_->find(name);
        if (pit == params_->end()) throw ConfigError("unknown parameter: " + name);
        const int tid = tape_->leaf(pit->second);
        ids_.emplace(name, tid);
        return tid;
    }

    BnState<T>& bn_state(const std::string& name) {
        auto it = bn_->find(name);
        if (it == bn_->end()) throw ConfigError("unknown batch-norm layer: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_->count(name) > 0; }

    GradientSet<T> collect_grads() {
        GradientSet<T> grads;
        for (const auto& [name, tensor] : *params_) {
            auto it = ids_.find(name);
            if (it != ids_.end() && tape_->has_grad(it->second)) {
                grads[name] = tape_->grad(it->second);
            } else {
                grads[name] = Tensor<T>::zeros(tensor.shape);
            }
        }
        return grads;
    }

    std::size_t used_count() const { return ids_.size(); }
    std::size_t param_count() const { return params_->size(); }

private:
    Tape<T>* tape_;
    std::map<std::string, Tensor<T>>* params_;
    std::map<std::string, BnState<T>>* bn_;
    std::map<std::string, int> ids_;
};

namespace blocks {

// conv -> batch norm -> optional relu. Parameter names under `prefix`:
// w, b, bn/gamma, bn/beta; bn state keyed by "prefix/bn".
template <typename T>
int conv_bn(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x, int stride,
            Padding pad, Mode mode) {
    int y = ops::conv2d(t, x, pt.id(prefix + "/w"), pt.id(prefix + "/b"), stride, pad);
    return ops::batchnorm2d(t, y, pt.id(prefix + "/bn/gamma"), pt.id(prefix + "/bn/beta"),
                            pt.bn_state(prefix + "/bn"), mode);
}

template <typename T>
int conv_bn_relu(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x, int stride,
                 Padding pad, Mode mode) {
    return ops::activation(t, conv_bn(t, pt, prefix, x, stride, pad, mode), Act::kRelu);
}

// Plain double-conv stage used by the attention branch.
template <typename T>
int conv_stage(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x, Mode mode) {
    int h = conv_bn_relu(t, pt, prefix + "/conv1", x, 1, Padding::kSame, mode);
    return conv_bn_relu(t, pt, prefix + "/conv2", h, 1, Padding::kSame, mode);
}

// Double-conv stage whose second unit is tapped before its ReLU; the tap is
// the gate logit source, so gates can span the full (0,1) range.
template <typename T>
int conv_stage_tapped(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x, Mode mode,
                      int* pre_relu) {
    int h = conv_bn_relu(t, pt, prefix + "/conv1", x, 1, Padding::kSame, mode);
    int pre = conv_bn(t, pt, prefix + "/conv2", h, 1, Padding::kSame, mode);
    if (pre_relu) *pre_relu = pre;
    return ops::activation(t, pre, Act::kRelu);
}

// Squeeze-and-excitation: per-channel gates from a two-layer bottleneck.
template <typename T>
int se_block(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x) {
    const Tensor<T>& xv = t.val(x);
    if (xv.rank() != 4 || xv.dim(1) != t.val(pt.id(prefix + "/reduce/w")).dim(0)) {
        throw ShapeError("se_block channel mismatch: input " + shape_str(xv.shape) +
                         " vs reduce weights " +
                         shape_str(t.val(pt.id(prefix + "/reduce/w")).shape));
    }
    int s = ops::global_avg_pool(t, x);
    int r = ops::activation(
        t, ops::dense(t, s, pt.id(prefix + "/reduce/w"), pt.id(prefix + "/reduce/b")), Act::kRelu);
    int e = ops::dense(t, r, pt.id(prefix + "/expand/w"), pt.id(prefix + "/expand/b"));
    int gate = ops::activation(t, e, Act::kSigmoid);
    return ops::elementwise(t, x, gate, EwKind::kMul);
}

// Full pre-activation residual block: shortcut(x) + conv(relu(bn(conv(relu(bn(x)))))).
// The shortcut is the identity when channel counts match, else a 1x1 projection.
template <typename T>
int preact_residual_block(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x,
                          Mode mode) {
    int h = ops::batchnorm2d(t, x, pt.id(prefix + "/bn1/gamma"), pt.id(prefix + "/bn1/beta"),
                             pt.bn_state(prefix + "/bn1"), mode);
    h = ops::activation(t, h, Act::kRelu);
    h = ops::conv2d(t, h, pt.id(prefix + "/conv1/w"), pt.id(prefix + "/conv1/b"), 1, Padding::kSame);
    h = ops::batchnorm2d(t, h, pt.id(prefix + "/bn2/gamma"), pt.id(prefix + "/bn2/beta"),
                         pt.bn_state(prefix + "/bn2"), mode);
    h = ops::activation(t, h, Act::kRelu);
    h = ops::conv2d(t, h, pt.id(prefix + "/conv2/w"), pt.id(prefix + "/conv2/b"), 1, Padding::kSame);
    int shortcut = x;
    if (pt.has(prefix + "/proj/w")) {
        shortcut = ops::conv2d(t, x, pt.id(prefix + "/proj/w"), pt.id(prefix + "/proj/b"), 1,
                               Padding::kSame);
    }
    return ops::elementwise(t, shortcut, h, EwKind::kAdd);
}

struct GatedResult {
    int out;
    int gate;
};

// A = f * sigmoid(d), the gating-and-multiplication junction.
template <typename T>
GatedResult gated_multiply(Tape<T>& t, int f, int d) {
    if (!t.val(f).same_shape(t.val(d))) {
        throw ShapeError("gated_multiply shape mismatch: " + shape_str(t.val(f).shape) + " vs " +
                         shape_str(t.val(d).shape));
    }
    int gate = ops::activation(t, d, Act::kSigmoid);
    return {ops::elementwise(t, f, gate, EwKind::kMul), gate};
}

// Strided 3x3 conv downsampling, halving the spatial dims.
template <typename T>
int down_block(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x, Mode mode) {
    const Tensor<T>& xv = t.val(x);
    if (xv.dim(2) % 2 != 0 || xv.dim(3) % 2 != 0) {
        throw ShapeError("down_block requires even spatial dims, got " + shape_str(xv.shape));
    }
    return conv_bn_relu(t, pt, prefix, x, 2, Padding::kSame, mode);
}

// 2x2 stride-2 transposed conv upsampling, doubling the spatial dims.
// Parameter names under prefix: w [Cin,Cout,2,2], b, bn/gamma, bn/beta.
template <typename T>
int up_block(Tape<T>& t, ParamTable<T>& pt, const std::string& prefix, int x, Mode mode) {
    int y = ops::conv2d_transpose(t, x, pt.id(prefix + "/w"), pt.id(prefix + "/b"), 2);
    y = ops::batchnorm2d(t, y, pt.id(prefix + "/bn/gamma"), pt.id(prefix + "/bn/beta"),
                         pt.bn_state(prefix + "/bn"), mode);
    return ops::activation(t, y, Act::kRelu);
}

}  // namespace blocks
}  // namespace focusnet
