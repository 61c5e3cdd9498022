#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "focusnet/errors.hpp"
#include "focusnet/tensor.hpp"

namespace focusnet {

// Per-parameter gradients keyed by parameter name.
template <typename T>
using GradientSet = std::map<std::string, Tensor<T>>;

// Linear record of primitive ops. Ids are indices into the value table; every
// node's inputs were recorded before it, so replaying the node list in
// reverse visits each op exactly once in valid topological order.
template <typename T>
class Tape {
public:
    int leaf(Tensor<T> v) {
        values_.push_back(std::move(v));
        grads_.emplace_back();
        return static_cast<int>(values_.size()) - 1;
    }

    // The backward callback receives the tape and the id of this node's
    // output, whose gradient it propagates into the node's inputs.
    int record(Tensor<T> out, std::function<void(Tape<T>&, int)> bwd) {
        const int id = leaf(std::move(out));
        nodes_.push_back({id, std::move(bwd)});
        return id;
    }

    const Tensor<T>& val(int id) const { return values_[static_cast<std::size_t>(id)]; }

    // Gradient accumulator for a value; allocated as zeros on first touch.
    Tensor<T>& grad(int id) {
        auto& g = grads_[static_cast<std::size_t>(id)];
        if (g.data.empty()) g = Tensor<T>::zeros(values_[static_cast<std::size_t>(id)].shape);
        return g;
    }

    bool has_grad(int id) const { return !grads_[static_cast<std::size_t>(id)].data.empty(); }

    void backward(int loss_id) {
        const Tensor<T>& loss = val(loss_id);
        if (loss.size() != 1) {
            throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape));
        }
        grad(loss_id).data[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (has_grad(it->out)) it->bwd(*this, it->out);
        }
    }

    std::size_t size() const { return values_.size(); }

private:
    struct Node {
        int out;
        std::function<void(Tape<T>&, int)> bwd;
    };

    std::vector<Tensor<T>> values_;
    std::vector<Tensor<T>> grads_;
    std::vector<Node> nodes_;
};

}  // namespace focusnet
