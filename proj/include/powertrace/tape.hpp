#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "powertrace/tensor.hpp"

namespace powertrace::ad {

// Handle to a node on a Tape.
struct Var {
    std::uint32_t id = UINT32_MAX;
};

// Records one forward pass. Nodes are appended in evaluation order, which is a
// topological order, so backward is a single reverse sweep.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&)>;

    Var constant(Tensor value);
    // Leaf bound to store[index]; repeated requests return the same node.
    Var parameter(const ParamStore& store, std::size_t index);
    // Throws NumericError when the value holds NaN or Inf.
    Var record(std::string_view op, Tensor value, BackwardFn backward);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    // Zero-initialized on first access.
    Tensor& grad(Var v);
    bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty() || nodes_.at(v.id).value.empty(); }

    void backward(Var loss);
    // Adds the gradients of this store's parameter leaves into store[i].grad.
    void accumulate_param_grads(ParamStore& store) const;

    std::size_t size() const { return nodes_.size(); }
    // Nodes whose adjoint ran during the last backward.
    std::size_t backward_visits() const { return visits_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        const ParamStore* store = nullptr;
        std::size_t param_index = 0;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<const ParamStore*, std::vector<std::uint32_t>>> param_leaves_;
    std::size_t visits_ = 0;
};

}  // namespace powertrace::ad
