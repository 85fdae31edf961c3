#include "powertrace/tape.hpp"

#include <string>

#include "powertrace/errors.hpp"

namespace powertrace::ad {

Var Tape::constant(Tensor value) {
    nodes_.push_back({std::move(value), {}, {}, nullptr, 0});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(const ParamStore& store, std::size_t index) {
    auto it = param_leaves_.begin();
    for (; it != param_leaves_.end(); ++it) {
        if (it->first == &store) break;
    }
    if (it == param_leaves_.end()) {
        param_leaves_.emplace_back(&store, std::vector<std::uint32_t>(store.size(), UINT32_MAX));
        it = param_leaves_.end() - 1;
    }
    auto& slot = it->second.at(index);
    if (slot == UINT32_MAX) {
        nodes_.push_back({store[index].value, {}, {}, &store, index});
        slot = static_cast<std::uint32_t>(nodes_.size() - 1);
    }
    return Var{slot};
}

Var Tape::record(std::string_view op, Tensor value, BackwardFn backward) {
    if (!value.all_finite()) {
        throw NumericError("non-finite output from " + std::string(op));
    }
    nodes_.push_back({std::move(value), {}, std::move(backward), nullptr, 0});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty() && !n.value.empty()) {
        n.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (nodes_.empty()) throw Error("backward on an empty tape");
    const Node& root = nodes_.at(loss.id);
    if (root.value.size() != 1) {
        throw ShapeError("backward needs a scalar loss, got shape " + shape_to_string(root.value.shape()));
    }
    for (auto& n : nodes_) n.grad = Tensor();
    grad(loss)[0] = 1.0;
    visits_ = 0;
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.backward || n.grad.empty()) continue;
        ++visits_;
        n.backward(*this);
    }
}

void Tape::accumulate_param_grads(ParamStore& store) const {
    for (const auto& [owner, slots] : param_leaves_) {
        if (owner != &store) continue;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i] == UINT32_MAX) continue;
            const Tensor& g = nodes_[slots[i]].grad;
            if (g.empty()) continue;
            Tensor& dst = store[i].grad;
            for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
        }
    }
}

}  // namespace powertrace::ad
