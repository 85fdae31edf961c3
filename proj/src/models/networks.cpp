#include <cmath>

#include "powertrace/errors.hpp"
#include "powertrace/models.hpp"

namespace powertrace {

using ad::Tape;
using ad::Var;

namespace {

std::size_t add_uniform(ParamStore& store, std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(-bound, bound);
    return store.add(std::move(name), std::move(t));
}

Var param(Tape& t, const ParamStore& store, std::size_t idx) { return t.parameter(store, idx); }

Var apply_dropout(Tape& t, Var x, double base_rate, const ForwardMode& mode) {
    if (!mode.dropout) return x;
    const double p = mode.rate_override.value_or(base_rate);
    if (p == 0.0) return x;
    if (!mode.rng) throw ConfigError("active dropout needs a random generator");
    return ad::dropout(t, x, p, true, *mode.rng);
}

struct Linear {
    std::size_t w = 0;
    std::size_t b = 0;

    Var operator()(Tape& t, const ParamStore& s, Var x) const {
        return ad::add(t, ad::matmul(t, x, param(t, s, w)), param(t, s, b));
    }
};

Linear make_linear(ParamStore& s, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    Linear l;
    l.w = add_uniform(s, name + ".w", {in, out}, in, rng);
    l.b = add_uniform(s, name + ".b", {out}, in, rng);
    return l;
}

struct Conv {
    std::size_t w = 0;
    std::size_t b = 0;
    std::size_t dilation = 1;

    Var operator()(Tape& t, const ParamStore& s, Var x) const {
        return ad::causal_dilated_conv1d(t, x, param(t, s, w), param(t, s, b), dilation);
    }
};

Conv make_conv(ParamStore& s, const std::string& name, std::size_t k, std::size_t cin, std::size_t cout,
               std::size_t dilation, Rng& rng) {
    Conv c;
    c.w = add_uniform(s, name + ".w", {k, cin, cout}, k * cin, rng);
    c.b = add_uniform(s, name + ".b", {cout}, k * cin, rng);
    c.dilation = dilation;
    return c;
}

Var to_batch_vector(Tape& t, Var head_out) {
    return ad::reshape(t, head_out, {t.value(head_out).dim(0)});
}

void check_input(const Tape& t, Var x, std::size_t input_dim, const char* who) {
    const Tensor& xv = t.value(x);
    if (xv.rank() != 3 || xv.dim(2) != input_dim || xv.dim(1) == 0) {
        throw ShapeError(std::string(who) + ": expected input [B, W, " + std::to_string(input_dim) + "], got " +
                         shape_to_string(xv.shape()));
    }
}

std::uint64_t linear_flops(std::uint64_t in, std::uint64_t out) { return 2 * (in + 1) * out; }

class Lstm final : public Network {
public:
    Lstm(const LstmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        params_.init_seed = seed;
        const std::size_t h = cfg_.hidden;
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            const std::size_t in = l == 0 ? cfg_.input_dim : h;
            const std::string name = "lstm.l" + std::to_string(l);
            Layer layer;
            layer.wx = add_uniform(params_, name + ".wx", {in, 4 * h}, in + h, rng);
            layer.wh = add_uniform(params_, name + ".wh", {h, 4 * h}, in + h, rng);
            layer.b = add_uniform(params_, name + ".b", {4 * h}, in + h, rng);
            layers_.push_back(layer);
        }
        head_ = make_linear(params_, "head", h, 1, rng);
    }

    ModelKind kind() const override { return ModelKind::lstm; }
    ModelConfig config() const override { return cfg_; }
    std::size_t input_dim() const override { return cfg_.input_dim; }

    Var forward(Tape& t, Var x, const ForwardMode& mode) const override {
        check_input(t, x, cfg_.input_dim, "lstm");
        const std::size_t steps = t.value(x).dim(1);
        const std::size_t h = cfg_.hidden;
        std::vector<Var> seq;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& layer = layers_[l];
            const Var wx = param(t, params_, layer.wx);
            const Var wh = param(t, params_, layer.wh);
            const Var b = param(t, params_, layer.b);
            std::vector<Var> gx(steps);
            if (l == 0) {
                const Var proj = ad::matmul(t, x, wx);
                for (std::size_t s = 0; s < steps; ++s) gx[s] = ad::select_step(t, proj, s);
            } else {
                for (std::size_t s = 0; s < steps; ++s) {
                    gx[s] = ad::matmul(t, apply_dropout(t, seq[s], cfg_.dropout, mode), wx);
                }
            }
            std::vector<Var> out(steps);
            Var hs{};
            Var cs{};
            for (std::size_t s = 0; s < steps; ++s) {
                Var g = ad::add(t, gx[s], b);
                if (s > 0) g = ad::add(t, g, ad::matmul(t, hs, wh));
                const Var in_gate = ad::sigmoid(t, ad::slice_last(t, g, 0, h));
                const Var forget = ad::sigmoid(t, ad::slice_last(t, g, h, h));
                const Var cand = ad::tanh(t, ad::slice_last(t, g, 2 * h, h));
                const Var out_gate = ad::sigmoid(t, ad::slice_last(t, g, 3 * h, h));
                const Var ig = ad::mul(t, in_gate, cand);
                cs = s == 0 ? ig : ad::add(t, ad::mul(t, forget, cs), ig);
                hs = ad::mul(t, out_gate, ad::tanh(t, cs));
                out[s] = hs;
            }
            seq = std::move(out);
        }
        const Var last = apply_dropout(t, seq.back(), cfg_.dropout, mode);
        return to_batch_vector(t, head_(t, params_, last));
    }

    std::uint64_t flops(std::size_t window) const override {
        const std::uint64_t h = cfg_.hidden;
        std::uint64_t per_step = 0;
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            const std::uint64_t in = l == 0 ? cfg_.input_dim : h;
            per_step += linear_flops(in, 4 * h) + 2 * h * 4 * h + 4 * h + 3 * h + 2 * h;
        }
        return per_step * window + linear_flops(h, 1);
    }

private:
    struct Layer {
        std::size_t wx = 0;
        std::size_t wh = 0;
        std::size_t b = 0;
    };

    LstmConfig cfg_;
    std::vector<Layer> layers_;
    Linear head_;
};

class Tcn final : public Network {
public:
    Tcn(const TcnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        params_.init_seed = seed;
        std::size_t cin = cfg_.input_dim;
        for (std::size_t bi = 0; bi < cfg_.dilations.size(); ++bi) {
            const std::string name = "tcn.b" + std::to_string(bi);
            Block block;
            std::size_t c = cin;
            for (std::size_t j = 0; j < cfg_.convs_per_block; ++j) {
                block.convs.push_back(make_conv(params_, name + ".conv" + std::to_string(j), cfg_.kernel, c,
                                                cfg_.channels, cfg_.dilations[bi], rng));
                c = cfg_.channels;
            }
            if (cin != cfg_.channels) block.skip = make_conv(params_, name + ".skip", 1, cin, cfg_.channels, 1, rng);
            blocks_.push_back(std::move(block));
            cin = cfg_.channels;
        }
        head_ = make_linear(params_, "head", cfg_.channels, 1, rng);
    }

    ModelKind kind() const override { return ModelKind::tcn; }
    ModelConfig config() const override { return cfg_; }
    std::size_t input_dim() const override { return cfg_.input_dim; }

    Var forward(Tape& t, Var x, const ForwardMode& mode) const override {
        check_input(t, x, cfg_.input_dim, "tcn");
        const std::size_t steps = t.value(x).dim(1);
        Var h = x;
        for (const Block& block : blocks_) {
            Var y = h;
            for (const Conv& conv : block.convs) {
                y = apply_dropout(t, ad::relu(t, conv(t, params_, y)), cfg_.dropout, mode);
            }
            const Var skip = block.skip ? (*block.skip)(t, params_, h) : h;
            h = ad::relu(t, ad::add(t, y, skip));
        }
        return to_batch_vector(t, head_(t, params_, ad::select_step(t, h, steps - 1)));
    }

    std::uint64_t flops(std::size_t window) const override {
        const std::uint64_t ch = cfg_.channels;
        std::uint64_t per_step = 0;
        std::uint64_t cin = cfg_.input_dim;
        for (std::size_t bi = 0; bi < cfg_.dilations.size(); ++bi) {
            std::uint64_t c = cin;
            for (std::size_t j = 0; j < cfg_.convs_per_block; ++j) {
                per_step += linear_flops(cfg_.kernel * c, ch) + ch;
                c = ch;
            }
            if (cin != ch) per_step += linear_flops(cin, ch);
            per_step += 2 * ch;
            cin = ch;
        }
        return per_step * window + linear_flops(ch, 1);
    }

private:
    struct Block {
        std::vector<Conv> convs;
        std::optional<Conv> skip;
    };

    TcnConfig cfg_;
    std::vector<Block> blocks_;
    Linear head_;
};

class Transformer final : public Network {
public:
    Transformer(const TransformerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        params_.init_seed = seed;
        const std::size_t d = cfg_.d_model;
        proj_ = make_conv(params_, "proj", cfg_.conv_kernel, cfg_.input_dim, d, 1, rng);
        for (std::size_t l = 0; l < cfg_.encoder_layers; ++l) {
            const std::string name = "enc" + std::to_string(l);
            Layer layer;
            layer.q = make_linear(params_, name + ".q", d, d, rng);
            layer.k = make_linear(params_, name + ".k", d, d, rng);
            layer.v = make_linear(params_, name + ".v", d, d, rng);
            layer.o = make_linear(params_, name + ".o", d, d, rng);
            layer.norm1_g = params_.add(name + ".norm1.gamma", Tensor({d}, 1.0));
            layer.norm1_b = params_.add(name + ".norm1.beta", Tensor({d}, 0.0));
            layer.ff1 = make_linear(params_, name + ".ff1", d, cfg_.ff_dim, rng);
            layer.ff2 = make_linear(params_, name + ".ff2", cfg_.ff_dim, d, rng);
            layer.norm2_g = params_.add(name + ".norm2.gamma", Tensor({d}, 1.0));
            layer.norm2_b = params_.add(name + ".norm2.beta", Tensor({d}, 0.0));
            layers_.push_back(layer);
        }
        head_ = make_linear(params_, "head", d, 1, rng);
    }

    ModelKind kind() const override { return ModelKind::transformer; }
    ModelConfig config() const override { return cfg_; }
    std::size_t input_dim() const override { return cfg_.input_dim; }

    Var forward(Tape& t, Var x, const ForwardMode& mode) const override {
        check_input(t, x, cfg_.input_dim, "transformer");
        const std::size_t batch = t.value(x).dim(0);
        const std::size_t steps = t.value(x).dim(1);
        const std::size_t d = cfg_.d_model;
        const std::size_t heads = cfg_.heads;
        const std::size_t dh = d / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

        Var h = apply_dropout(t, proj_(t, params_, x), cfg_.dropout, mode);
        h = ad::add(t, h, t.constant(positional_encoding(steps, d)));

        const auto split_heads = [&](Var v) {
            return ad::permute(t, ad::reshape(t, v, {batch, steps, heads, dh}), {0, 2, 1, 3});
        };
        for (const Layer& layer : layers_) {
            const Var q = split_heads(layer.q(t, params_, h));
            const Var k = split_heads(layer.k(t, params_, h));
            const Var v = split_heads(layer.v(t, params_, h));
            const Var weights = ad::softmax(t, ad::scale(t, ad::batched_matmul(t, q, k, true), inv_sqrt));
            if (mode.attention_sink) mode.attention_sink->push_back(t.value(weights));
            const Var ctx = ad::reshape(t, ad::permute(t, ad::batched_matmul(t, weights, v), {0, 2, 1, 3}),
                                        {batch, steps, d});
            const Var attn = apply_dropout(t, layer.o(t, params_, ctx), cfg_.dropout, mode);
            h = ad::layer_norm(t, ad::add(t, h, attn), param(t, params_, layer.norm1_g),
                               param(t, params_, layer.norm1_b));
            Var ff = apply_dropout(t, ad::relu(t, layer.ff1(t, params_, h)), cfg_.dropout, mode);
            ff = apply_dropout(t, layer.ff2(t, params_, ff), cfg_.dropout, mode);
            h = ad::layer_norm(t, ad::add(t, h, ff), param(t, params_, layer.norm2_g),
                               param(t, params_, layer.norm2_b));
        }
        return to_batch_vector(t, head_(t, params_, ad::select_step(t, h, steps - 1)));
    }

    std::uint64_t flops(std::size_t window) const override {
        const std::uint64_t d = cfg_.d_model;
        const std::uint64_t ff = cfg_.ff_dim;
        const std::uint64_t heads = cfg_.heads;
        const std::uint64_t w = window;
        std::uint64_t per_step = linear_flops(cfg_.conv_kernel * cfg_.input_dim, d) + d;
        std::uint64_t layer = 4 * linear_flops(d, d);
        layer += 2 * w * d + w * heads + 3 * w * heads + 2 * w * d;
        layer += d + 8 * d;
        layer += linear_flops(d, ff) + ff + linear_flops(ff, d) + d + 8 * d;
        per_step += cfg_.encoder_layers * layer;
        return per_step * w + linear_flops(d, 1);
    }

private:
    struct Layer {
        Linear q, k, v, o;
        std::size_t norm1_g = 0, norm1_b = 0;
        Linear ff1, ff2;
        std::size_t norm2_g = 0, norm2_b = 0;
    };

    TransformerConfig cfg_;
    Conv proj_;
    std::vector<Layer> layers_;
    Linear head_;
};

}  // namespace

std::unique_ptr<Network> build_lstm(const LstmConfig& config, std::uint64_t seed) {
    return std::make_unique<Lstm>(config, seed);
}

std::unique_ptr<Network> build_tcn(const TcnConfig& config, std::uint64_t seed) {
    return std::make_unique<Tcn>(config, seed);
}

std::unique_ptr<Network> build_transformer(const TransformerConfig& config, std::uint64_t seed) {
    return std::make_unique<Transformer>(config, seed);
}

std::unique_ptr<Network> build_network(const ModelConfig& config, std::uint64_t seed) {
    struct Visitor {
        std::uint64_t seed;
        std::unique_ptr<Network> operator()(const LstmConfig& c) const { return build_lstm(c, seed); }
        std::unique_ptr<Network> operator()(const TcnConfig& c) const { return build_tcn(c, seed); }
        std::unique_ptr<Network> operator()(const TransformerConfig& c) const { return build_transformer(c, seed); }
        std::unique_ptr<Network> operator()(const RfConfig&) const {
            throw ConfigError("a random forest is not a network; use rf_fit");
        }
    };
    return std::visit(Visitor{seed}, config);
}

}  // namespace powertrace
