#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "powertrace/ops.hpp"
#include "powertrace/rng.hpp"
#include "powertrace/tape.hpp"
#include "powertrace/tensor.hpp"

namespace powertrace::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

// Uniform values with magnitude in [0.1, 1]; keeps relu inputs away from the kink.
inline Tensor away_from_zero(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
    return t;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;
};

// Central finite differences (h = 1e-5) against the tape's adjoints for every
// scalar of every tensor in `store`. `loss` must build a scalar on the tape from
// store parameters and be deterministic across calls.
inline GradCheckResult grad_check(ParamStore& store, const std::function<ad::Var(ad::Tape&)>& loss,
                                  double h = 1e-5) {
    store.zero_grad();
    {
        ad::Tape tape;
        const ad::Var l = loss(tape);
        tape.backward(l);
        tape.accumulate_param_grads(store);
    }
    const auto eval = [&]() {
        ad::Tape tape;
        return tape.value(loss(tape)).item();
    };
    GradCheckResult res;
    for (std::size_t p = 0; p < store.size(); ++p) {
        for (std::size_t i = 0; i < store[p].value.size(); ++i) {
            const double orig = store[p].value[i];
            store[p].value[i] = orig + h;
            const double up = eval();
            store[p].value[i] = orig - h;
            const double down = eval();
            store[p].value[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = store[p].grad[i];
            // Floor keeps vanishing gradients from dividing by ~0.
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            const double rel = std::abs(numeric - analytic) / denom;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst = store[p].name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic) +
                            " numeric=" + std::to_string(numeric);
            }
        }
    }
    return res;
}

// sum(out * weights) with fixed random weights turns any output into a scalar
// whose gradient exercises every element.
inline ad::Var weighted_sum(ad::Tape& tape, ad::Var out, std::uint64_t seed = 99) {
    Rng rng(seed);
    const Tensor w = random_tensor(tape.value(out).shape(), rng);
    return ad::sum(tape, ad::mul(tape, out, tape.constant(w)));
}

}  // namespace powertrace::testing
