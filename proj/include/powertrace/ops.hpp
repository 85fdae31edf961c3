#pragma once

#include <cstddef>
#include <vector>

#include "powertrace/rng.hpp"
#include "powertrace/tape.hpp"

// Differentiable primitives. Every op records its adjoint on the tape and
// raises ShapeError naming both operand shapes on mismatch.
namespace powertrace::ad {

// a[..., K] x b[K, N] -> [..., N]
Var matmul(Tape& t, Var a, Var b);
// a[G..., M, K] x b[G..., K, N] -> [G..., M, N]; with transpose_b, b is [G..., N, K].
Var batched_matmul(Tape& t, Var a, Var b, bool transpose_b = false);

// b must have a's shape or a suffix of it (broadcast over leading axes).
Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);

Var sigmoid(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var relu(Tape& t, Var a);

Var softmax(Tape& t, Var a);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);

// x[B, T, Cin], w[K, Cin, Cout], bias[Cout] -> [B, T, Cout]. Tap k reads
// x[t - (K-1-k)*dilation]; positions before the start read zero.
Var causal_dilated_conv1d(Tape& t, Var x, Var w, Var bias, std::size_t dilation);

// Inverted dropout: survivors are scaled by 1/(1-p). Identity when inactive or p == 0.
Var dropout(Tape& t, Var x, double p, bool active, Rng& rng);

// mean((pred - target)^2) over all elements.
Var mse_loss(Tape& t, Var pred, const Tensor& target);
Var sum(Tape& t, Var a);

Var reshape(Tape& t, Var a, Shape shape);
Var permute(Tape& t, Var a, const std::vector<std::size_t>& axes);
// x[B, T, C] -> [B, C] at one time step.
Var select_step(Tape& t, Var x, std::size_t step);
// Columns [start, start+len) of the last axis.
Var slice_last(Tape& t, Var x, std::size_t start, std::size_t len);

}  // namespace powertrace::ad
