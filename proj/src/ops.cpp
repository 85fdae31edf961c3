#include "powertrace/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "powertrace/errors.hpp"
#include "powertrace/kernels.hpp"

namespace powertrace::ad {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": shape " + shape_to_string(a) + " incompatible with " + shape_to_string(b));
}

bool is_suffix(const Shape& big, const Shape& small) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <typename Fwd, typename Deriv>
Var unary(Tape& t, Var a, const char* name, Fwd fwd, Deriv deriv_from_output) {
    const Tensor& av = t.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record(name, std::move(out), [a, o, deriv_from_output](Tape& tp) {
        const Tensor& y = tp.value(o);
        const Tensor& g = tp.grad(o);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * deriv_from_output(y[i]);
    });
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (bv.rank() != 2 || av.rank() < 1 || av.shape().back() != bv.dim(0)) shape_mismatch("matmul", av.shape(), bv.shape());
    const std::size_t k = bv.dim(0);
    const std::size_t n = bv.dim(1);
    const std::size_t m = av.size() / k;
    Shape out_shape = av.shape();
    out_shape.back() = n;
    Tensor out(out_shape);
    simd::gemm_nn(m, n, k, av.data(), k, bv.data(), n, out.data(), n);
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("matmul", std::move(out), [a, b, o, m, n, k](Tape& tp) {
        const Tensor& g = tp.grad(o);
        simd::gemm_nt(m, k, n, g.data(), n, tp.value(b).data(), n, tp.grad(a).data(), k);
        simd::gemm_tn(k, n, m, tp.value(a).data(), k, g.data(), n, tp.grad(b).data(), n);
    });
}

Var batched_matmul(Tape& t, Var a, Var b, bool transpose_b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (av.rank() < 3 || av.rank() != bv.rank() ||
        !std::equal(av.shape().begin(), av.shape().end() - 2, bv.shape().begin())) {
        shape_mismatch("batched_matmul", av.shape(), bv.shape());
    }
    const std::size_t r = av.rank();
    const std::size_t m = av.dim(r - 2);
    const std::size_t k = av.dim(r - 1);
    const std::size_t n = transpose_b ? bv.dim(r - 2) : bv.dim(r - 1);
    const std::size_t kb = transpose_b ? bv.dim(r - 1) : bv.dim(r - 2);
    if (kb != k) shape_mismatch("batched_matmul", av.shape(), bv.shape());
    const std::size_t groups = av.size() / (m * k);
    Shape out_shape = av.shape();
    out_shape[r - 1] = n;
    Tensor out(out_shape);
    for (std::size_t g = 0; g < groups; ++g) {
        const double* ap = av.data() + g * m * k;
        const double* bp = bv.data() + g * k * n;
        double* cp = out.data() + g * m * n;
        if (transpose_b) {
            simd::gemm_nt(m, n, k, ap, k, bp, k, cp, n);
        } else {
            simd::gemm_nn(m, n, k, ap, k, bp, n, cp, n);
        }
    }
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("batched_matmul", std::move(out), [a, b, o, m, n, k, groups, transpose_b](Tape& tp) {
        const Tensor& go = tp.grad(o);
        const Tensor& av2 = tp.value(a);
        const Tensor& bv2 = tp.value(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t g = 0; g < groups; ++g) {
            const double* gp = go.data() + g * m * n;
            const double* ap = av2.data() + g * m * k;
            const double* bp = bv2.data() + g * k * n;
            double* gap = ga.data() + g * m * k;
            double* gbp = gb.data() + g * k * n;
            if (transpose_b) {
                simd::gemm_nn(m, k, n, gp, n, bp, k, gap, k);
                simd::gemm_tn(n, k, m, gp, n, ap, k, gbp, k);
            } else {
                simd::gemm_nt(m, k, n, gp, n, bp, n, gap, k);
                simd::gemm_tn(k, n, m, ap, k, gp, n, gbp, n);
            }
        }
    });
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!is_suffix(av.shape(), bv.shape())) shape_mismatch("add", av.shape(), bv.shape());
    Tensor out = av;
    const std::size_t inner = bv.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % inner];
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("add", std::move(out), [a, b, o, inner](Tape& tp) {
        const Tensor& g = tp.grad(o);
        add_into(tp.grad(a), g);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % inner] += g[i];
    });
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!is_suffix(av.shape(), bv.shape())) shape_mismatch("mul", av.shape(), bv.shape());
    Tensor out = av;
    const std::size_t inner = bv.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i % inner];
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("mul", std::move(out), [a, b, o, inner](Tape& tp) {
        const Tensor& g = tp.grad(o);
        const Tensor& av2 = tp.value(a);
        const Tensor& bv2 = tp.value(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i % inner];
            gb[i % inner] += g[i] * av2[i];
        }
    });
}

Var scale(Tape& t, Var a, double factor) {
    Tensor out = t.value(a);
    for (auto& v : out.values()) v *= factor;
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("scale", std::move(out), [a, o, factor](Tape& tp) {
        const Tensor& g = tp.grad(o);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
}

Var sigmoid(Tape& t, Var a) {
    return unary(
        t, a, "sigmoid",
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double y) { return y * (1.0 - y); });
}

Var tanh(Tape& t, Var a) {
    return unary(t, a, "tanh", [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var relu(Tape& t, Var a) {
    return unary(t, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var softmax(Tape& t, Var a) {
    const Tensor& av = t.value(a);
    if (av.rank() < 1) shape_mismatch("softmax", av.shape(), av.shape());
    const std::size_t d = av.shape().back();
    const std::size_t rows = av.size() / d;
    Tensor out(av.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * d;
        double* y = out.data() + r * d;
        const double mx = *std::max_element(x, x + d);
        double z = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            y[i] = std::exp(x[i] - mx);
            z += y[i];
        }
        for (std::size_t i = 0; i < d; ++i) y[i] /= z;
    }
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("softmax", std::move(out), [a, o, d, rows](Tape& tp) {
        const Tensor& y = tp.value(o);
        const Tensor& g = tp.grad(o);
        Tensor& ga = tp.grad(a);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = y.data() + r * d;
            const double* gr = g.data() + r * d;
            double dotv = 0.0;
            for (std::size_t i = 0; i < d; ++i) dotv += gr[i] * yr[i];
            for (std::size_t i = 0; i < d; ++i) ga[r * d + i] += yr[i] * (gr[i] - dotv);
        }
    });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gamma);
    const Tensor& bv = t.value(beta);
    if (xv.rank() < 1 || gv.shape() != Shape{xv.shape().back()} || bv.shape() != gv.shape()) {
        shape_mismatch("layer_norm", xv.shape(), gv.shape());
    }
    const std::size_t d = xv.shape().back();
    const std::size_t rows = xv.size() / d;
    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += xr[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < d; ++i) {
            const double h = (xr[i] - mean) * inv_std[r];
            xhat[r * d + i] = h;
            out[r * d + i] = gv[i] * h + bv[i];
        }
    }
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("layer_norm", std::move(out),
                    [x, gamma, beta, o, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp) {
                        const Tensor& g = tp.grad(o);
                        const Tensor& gv2 = tp.value(gamma);
                        Tensor& gx = tp.grad(x);
                        Tensor& ggamma = tp.grad(gamma);
                        Tensor& gbeta = tp.grad(beta);
                        const double inv_d = 1.0 / static_cast<double>(d);
                        for (std::size_t r = 0; r < rows; ++r) {
                            double sum_dh = 0.0;
                            double sum_dh_h = 0.0;
                            for (std::size_t i = 0; i < d; ++i) {
                                const double gi = g[r * d + i];
                                const double h = xhat[r * d + i];
                                ggamma[i] += gi * h;
                                gbeta[i] += gi;
                                const double dh = gi * gv2[i];
                                sum_dh += dh;
                                sum_dh_h += dh * h;
                            }
                            for (std::size_t i = 0; i < d; ++i) {
                                const double h = xhat[r * d + i];
                                const double dh = g[r * d + i] * gv2[i];
                                gx[r * d + i] += inv_std[r] * (dh - inv_d * sum_dh - h * inv_d * sum_dh_h);
                            }
                        }
                    });
}

Var causal_dilated_conv1d(Tape& t, Var x, Var w, Var bias, std::size_t dilation) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(w);
    const Tensor& bv = t.value(bias);
    if (xv.rank() != 3 || wv.rank() != 3 || wv.dim(1) != xv.dim(2)) {
        shape_mismatch("causal_dilated_conv1d", xv.shape(), wv.shape());
    }
    if (bv.shape() != Shape{wv.dim(2)}) shape_mismatch("causal_dilated_conv1d", wv.shape(), bv.shape());
    if (dilation == 0) throw ShapeError("causal_dilated_conv1d: dilation must be at least 1");
    const std::size_t batch = xv.dim(0);
    const std::size_t steps = xv.dim(1);
    const std::size_t cin = xv.dim(2);
    const std::size_t taps = wv.dim(0);
    const std::size_t cout = wv.dim(2);

    Tensor out(Shape{batch, steps, cout});
    for (std::size_t r = 0; r < batch * steps; ++r) {
        std::copy(bv.data(), bv.data() + cout, out.data() + r * cout);
    }
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = xv.data() + b * steps * cin;
        double* ob = out.data() + b * steps * cout;
        for (std::size_t k = 0; k < taps; ++k) {
            const std::size_t shift = (taps - 1 - k) * dilation;
            if (shift >= steps) continue;
            simd::gemm_nn(steps - shift, cout, cin, xb, cin, wv.data() + k * cin * cout, cout, ob + shift * cout, cout);
        }
    }
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("causal_dilated_conv1d", std::move(out),
                    [x, w, bias, o, batch, steps, cin, taps, cout, dilation](Tape& tp) {
                        const Tensor& g = tp.grad(o);
                        const Tensor& xv2 = tp.value(x);
                        const Tensor& wv2 = tp.value(w);
                        Tensor& gx = tp.grad(x);
                        Tensor& gw = tp.grad(w);
                        Tensor& gb = tp.grad(bias);
                        for (std::size_t r = 0; r < batch * steps; ++r) {
                            for (std::size_t c = 0; c < cout; ++c) gb[c] += g[r * cout + c];
                        }
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* xb = xv2.data() + b * steps * cin;
                            const double* gob = g.data() + b * steps * cout;
                            double* gxb = gx.data() + b * steps * cin;
                            for (std::size_t k = 0; k < taps; ++k) {
                                const std::size_t shift = (taps - 1 - k) * dilation;
                                if (shift >= steps) continue;
                                const std::size_t rows = steps - shift;
                                simd::gemm_nt(rows, cin, cout, gob + shift * cout, cout, wv2.data() + k * cin * cout,
                                              cout, gxb, cin);
                                simd::gemm_tn(cin, cout, rows, xb, cin, gob + shift * cout, cout,
                                              gw.data() + k * cin * cout, cout);
                            }
                        }
                    });
}

Var dropout(Tape& t, Var x, double p, bool active, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout probability must lie in [0, 1)");
    if (!active || p == 0.0) return x;
    const Tensor& xv = t.value(x);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(xv.size());
    for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("dropout", std::move(out), [x, o, mask = std::move(mask)](Tape& tp) {
        const Tensor& g = tp.grad(o);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
}

Var mse_loss(Tape& t, Var pred, const Tensor& target) {
    const Tensor& pv = t.value(pred);
    if (pv.size() != target.size() || pv.size() == 0) shape_mismatch("mse_loss", pv.shape(), target.shape());
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = pv[i] - target[i];
        acc += d * d;
    }
    const double n = static_cast<double>(pv.size());
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("mse_loss", Tensor::scalar(acc / n), [pred, o, target, n](Tape& tp) {
        const double g = tp.grad(o)[0];
        const Tensor& pv2 = tp.value(pred);
        Tensor& gp = tp.grad(pred);
        for (std::size_t i = 0; i < pv2.size(); ++i) gp[i] += g * 2.0 * (pv2[i] - target[i]) / n;
    });
}

Var sum(Tape& t, Var a) {
    const Tensor& av = t.value(a);
    double acc = 0.0;
    for (const double v : av.values()) acc += v;
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("sum", Tensor::scalar(acc), [a, o](Tape& tp) {
        const double g = tp.grad(o)[0];
        for (auto& v : tp.grad(a).values()) v += g;
    });
}

Var reshape(Tape& t, Var a, Shape shape) {
    const Tensor& av = t.value(a);
    if (shape_size(shape) != av.size()) shape_mismatch("reshape", av.shape(), shape);
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("reshape", av.reshaped(std::move(shape)), [a, o](Tape& tp) {
        add_into(tp.grad(a), tp.grad(o));
    });
}

Var permute(Tape& t, Var a, const std::vector<std::size_t>& axes) {
    const Tensor& av = t.value(a);
    const std::size_t r = av.rank();
    std::vector<bool> seen(r, false);
    if (axes.size() != r) shape_mismatch("permute", av.shape(), Shape(axes.begin(), axes.end()));
    for (const auto ax : axes) {
        if (ax >= r || seen[ax]) shape_mismatch("permute", av.shape(), Shape(axes.begin(), axes.end()));
        seen[ax] = true;
    }
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * av.dim(i);
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = av.dim(axes[i]);

    // source offset for every output element, in output order
    std::vector<std::size_t> src(av.size());
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t flat = 0; flat < src.size(); ++flat) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[axes[i]];
        src[flat] = off;
        for (std::size_t i = r; i-- > 0;) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    Tensor out(out_shape);
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = av[src[i]];
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("permute", std::move(out), [a, o, src = std::move(src)](Tape& tp) {
        const Tensor& g = tp.grad(o);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < src.size(); ++i) ga[src[i]] += g[i];
    });
}

Var select_step(Tape& t, Var x, std::size_t step) {
    const Tensor& xv = t.value(x);
    if (xv.rank() != 3 || step >= xv.dim(1)) shape_mismatch("select_step", xv.shape(), Shape{step});
    const std::size_t batch = xv.dim(0);
    const std::size_t steps = xv.dim(1);
    const std::size_t c = xv.dim(2);
    Tensor out(Shape{batch, c});
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(xv.data() + (b * steps + step) * c, c, out.data() + b * c);
    }
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("select_step", std::move(out), [x, o, batch, steps, c, step](Tape& tp) {
        const Tensor& g = tp.grad(o);
        Tensor& gx = tp.grad(x);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < c; ++k) gx[(b * steps + step) * c + k] += g[b * c + k];
        }
    });
}

Var slice_last(Tape& t, Var x, std::size_t start, std::size_t len) {
    const Tensor& xv = t.value(x);
    if (xv.rank() < 1 || start + len > xv.shape().back() || len == 0) {
        shape_mismatch("slice_last", xv.shape(), Shape{start, len});
    }
    const std::size_t d = xv.shape().back();
    const std::size_t rows = xv.size() / d;
    Shape out_shape = xv.shape();
    out_shape.back() = len;
    Tensor out(out_shape);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * d + start, len, out.data() + r * len);
    Var o{static_cast<std::uint32_t>(t.size())};
    return t.record("slice_last", std::move(out), [x, o, d, rows, start, len](Tape& tp) {
        const Tensor& g = tp.grad(o);
        Tensor& gx = tp.grad(x);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < len; ++i) gx[r * d + start + i] += g[r * len + i];
        }
    });
}

}  // namespace powertrace::ad
