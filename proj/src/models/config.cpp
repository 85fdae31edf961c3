#include <cmath>
#include <set>

#include "powertrace/errors.hpp"
#include "powertrace/models.hpp"

namespace powertrace {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::lstm:
            return "lstm";
        case ModelKind::tcn:
            return "tcn";
        case ModelKind::transformer:
            return "transformer";
        case ModelKind::random_forest:
            return "rf";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "lstm" || text == "LSTM") return ModelKind::lstm;
    if (text == "tcn" || text == "TCN") return ModelKind::tcn;
    if (text == "transformer" || text == "Transformer") return ModelKind::transformer;
    if (text == "rf" || text == "RF" || text == "random_forest") return ModelKind::random_forest;
    throw ConfigError("unknown model kind '" + std::string(text) + "' (expected lstm, tcn, transformer or rf)");
}

namespace {

void check_dropout(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

void check_input_dim(std::size_t c) {
    if (c == 0) throw ConfigError("input_dim must be at least 1");
}

}  // namespace

void LstmConfig::validate() const {
    check_input_dim(input_dim);
    if (hidden < 1) throw ConfigError("lstm hidden must be at least 1");
    if (layers < 1) throw ConfigError("lstm layers must be at least 1");
    check_dropout(dropout);
}

void TcnConfig::validate() const {
    check_input_dim(input_dim);
    if (channels < 1) throw ConfigError("tcn channels must be at least 1");
    if (kernel < 1) throw ConfigError("tcn kernel must be at least 1");
    if (convs_per_block < 1) throw ConfigError("tcn convs_per_block must be at least 1");
    if (dilations.empty()) throw ConfigError("tcn needs at least one block");
    for (std::size_t i = 0; i < dilations.size(); ++i) {
        const std::size_t d = dilations[i];
        if (d == 0 || (d & (d - 1)) != 0) throw ConfigError("tcn dilations must be powers of 2");
        if (i > 0 && d <= dilations[i - 1]) throw ConfigError("tcn dilations must be strictly increasing");
    }
    check_dropout(dropout);
}

void TransformerConfig::validate() const {
    check_input_dim(input_dim);
    if (d_model < 1 || heads < 1) throw ConfigError("transformer d_model and heads must be at least 1");
    if (d_model % heads != 0) {
        throw ConfigError("transformer d_model " + std::to_string(d_model) + " is not divisible by heads " +
                          std::to_string(heads));
    }
    if (encoder_layers < 1) throw ConfigError("transformer encoder_layers must be at least 1");
    if (ff_dim < 1) throw ConfigError("transformer ff_dim must be at least 1");
    if (conv_kernel < 1) throw ConfigError("transformer conv_kernel must be at least 1");
    check_dropout(dropout);
}

void RfConfig::validate() const {
    if (n_trees < 1) throw ConfigError("rf n_trees must be at least 1");
    if (max_depth < 1) throw ConfigError("rf max_depth must be at least 1");
    if (min_samples_leaf < 1) throw ConfigError("rf min_samples_leaf must be at least 1");
    if (!(bootstrap_fraction > 0.0 && bootstrap_fraction <= 1.0)) {
        throw ConfigError("rf bootstrap_fraction must lie in (0, 1]");
    }
}

ModelKind kind_of(const ModelConfig& config) {
    struct Visitor {
        ModelKind operator()(const LstmConfig&) const { return ModelKind::lstm; }
        ModelKind operator()(const TcnConfig&) const { return ModelKind::tcn; }
        ModelKind operator()(const TransformerConfig&) const { return ModelKind::transformer; }
        ModelKind operator()(const RfConfig&) const { return ModelKind::random_forest; }
    };
    return std::visit(Visitor{}, config);
}

ModelConfig default_config(ModelKind kind, std::size_t input_dim) {
    ModelConfig cfg;
    switch (kind) {
        case ModelKind::lstm:
            cfg = LstmConfig{};
            break;
        case ModelKind::tcn:
            cfg = TcnConfig{};
            break;
        case ModelKind::transformer:
            cfg = TransformerConfig{};
            break;
        case ModelKind::random_forest:
            cfg = RfConfig{};
            break;
    }
    set_input_dim(cfg, input_dim);
    return cfg;
}

std::size_t input_dim_of(const ModelConfig& config) {
    return std::visit(
        [](const auto& c) -> std::size_t {
            if constexpr (requires { c.input_dim; }) {
                return c.input_dim;
            } else {
                return 0;
            }
        },
        config);
}

void set_input_dim(ModelConfig& config, std::size_t input_dim) {
    std::visit(
        [&](auto& c) {
            if constexpr (requires { c.input_dim; }) c.input_dim = input_dim;
        },
        config);
}

void validate(const ModelConfig& config) {
    std::visit([](const auto& c) { c.validate(); }, config);
}

json config_to_json(const ModelConfig& config) {
    struct Visitor {
        json operator()(const LstmConfig& c) const {
            return {{"kind", "lstm"}, {"input_dim", c.input_dim}, {"hidden", c.hidden}, {"layers", c.layers},
                    {"dropout", c.dropout}};
        }
        json operator()(const TcnConfig& c) const {
            return {{"kind", "tcn"},         {"input_dim", c.input_dim},
                    {"channels", c.channels}, {"dilations", c.dilations},
                    {"convs_per_block", c.convs_per_block}, {"kernel", c.kernel},
                    {"dropout", c.dropout}};
        }
        json operator()(const TransformerConfig& c) const {
            return {{"kind", "transformer"}, {"input_dim", c.input_dim}, {"d_model", c.d_model},
                    {"encoder_layers", c.encoder_layers}, {"heads", c.heads}, {"ff_dim", c.ff_dim},
                    {"dropout", c.dropout}, {"conv_kernel", c.conv_kernel}};
        }
        json operator()(const RfConfig& c) const {
            return {{"kind", "rf"},
                    {"n_trees", c.n_trees},
                    {"max_depth", c.max_depth},
                    {"min_samples_leaf", c.min_samples_leaf},
                    {"bootstrap", c.bootstrap},
                    {"bootstrap_fraction", c.bootstrap_fraction},
                    {"seed", c.seed}};
        }
    };
    return std::visit(Visitor{}, config);
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out, std::set<std::string>& seen) {
    seen.insert(key);
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config field '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::set<std::string>& seen) {
    for (const auto& [key, _] : j.items()) {
        if (!seen.count(key)) throw ConfigError("unknown model config field '" + key + "'");
    }
}

}  // namespace

ModelConfig config_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("model config must be an object with a kind");
    std::set<std::string> seen{"kind", "workers"};
    ModelConfig out;
    switch (parse_model_kind(j.at("kind").get<std::string>())) {
        case ModelKind::lstm: {
            LstmConfig c;
            read_field(j, "input_dim", c.input_dim, seen);
            read_field(j, "hidden", c.hidden, seen);
            read_field(j, "layers", c.layers, seen);
            read_field(j, "dropout", c.dropout, seen);
            out = c;
            break;
        }
        case ModelKind::tcn: {
            TcnConfig c;
            read_field(j, "input_dim", c.input_dim, seen);
            read_field(j, "channels", c.channels, seen);
            read_field(j, "dilations", c.dilations, seen);
            read_field(j, "convs_per_block", c.convs_per_block, seen);
            read_field(j, "kernel", c.kernel, seen);
            read_field(j, "dropout", c.dropout, seen);
            out = c;
            break;
        }
        case ModelKind::transformer: {
            TransformerConfig c;
            read_field(j, "input_dim", c.input_dim, seen);
            read_field(j, "d_model", c.d_model, seen);
            read_field(j, "encoder_layers", c.encoder_layers, seen);
            read_field(j, "heads", c.heads, seen);
            read_field(j, "ff_dim", c.ff_dim, seen);
            read_field(j, "dropout", c.dropout, seen);
            read_field(j, "conv_kernel", c.conv_kernel, seen);
            out = c;
            break;
        }
        case ModelKind::random_forest: {
            RfConfig c;
            read_field(j, "n_trees", c.n_trees, seen);
            read_field(j, "max_depth", c.max_depth, seen);
            read_field(j, "min_samples_leaf", c.min_samples_leaf, seen);
            read_field(j, "bootstrap", c.bootstrap, seen);
            read_field(j, "bootstrap_fraction", c.bootstrap_fraction, seen);
            read_field(j, "seed", c.seed, seen);
            out = c;
            break;
        }
    }
    reject_unknown(j, seen);
    return out;
}

std::size_t tcn_receptive_field(const TcnConfig& config) {
    std::size_t rf = 1;
    for (const std::size_t d : config.dilations) rf += config.convs_per_block * (config.kernel - 1) * d;
    return rf;
}

Tensor positional_encoding(std::size_t steps, std::size_t d_model) {
    Tensor pe(Shape{steps, d_model});
    for (std::size_t pos = 0; pos < steps; ++pos) {
        for (std::size_t i = 0; i < d_model; i += 2) {
            const double angle =
                static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe[pos * d_model + i] = std::sin(angle);
            if (i + 1 < d_model) pe[pos * d_model + i + 1] = std::cos(angle);
        }
    }
    return pe;
}

}  // namespace powertrace
