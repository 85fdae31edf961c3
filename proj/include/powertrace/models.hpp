#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "powertrace/ops.hpp"
#include "powertrace/preprocess.hpp"
#include "powertrace/rng.hpp"
#include "powertrace/tape.hpp"
#include "powertrace/tensor.hpp"

namespace powertrace {

enum class ModelKind { lstm, tcn, transformer, random_forest };

std::string_view to_string(ModelKind kind);
// Accepts lstm, tcn, transformer, rf.
ModelKind parse_model_kind(std::string_view text);

struct LstmConfig {
    std::size_t input_dim = 0;
    std::size_t hidden = 32;
    std::size_t layers = 3;
    double dropout = 0.2;

    void validate() const;
};

struct TcnConfig {
    std::size_t input_dim = 0;
    std::size_t channels = 64;
    std::vector<std::size_t> dilations{1, 2, 4};
    std::size_t convs_per_block = 2;
    std::size_t kernel = 5;
    double dropout = 0.002;

    void validate() const;
};

struct TransformerConfig {
    std::size_t input_dim = 0;
    std::size_t d_model = 64;
    std::size_t encoder_layers = 4;
    std::size_t heads = 2;
    std::size_t ff_dim = 32;
    double dropout = 0.1;
    std::size_t conv_kernel = 3;

    void validate() const;
};

struct RfConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 20;
    std::size_t min_samples_leaf = 1;
    bool bootstrap = true;
    double bootstrap_fraction = 1.0;
    std::uint64_t seed = 0;
    // Trees are seeded independently, so the forest does not depend on this.
    std::size_t workers = 1;

    void validate() const;
};

using ModelConfig = std::variant<LstmConfig, TcnConfig, TransformerConfig, RfConfig>;

ModelKind kind_of(const ModelConfig& config);
// Defaults for `kind` with the given number of input channels.
ModelConfig default_config(ModelKind kind, std::size_t input_dim);
std::size_t input_dim_of(const ModelConfig& config);
void set_input_dim(ModelConfig& config, std::size_t input_dim);
void validate(const ModelConfig& config);

// Flat object with a "kind" member plus that kind's fields.
nlohmann::json config_to_json(const ModelConfig& config);
// Missing fields keep their defaults; unknown fields raise ConfigError.
ModelConfig config_from_json(const nlohmann::json& j);

std::size_t tcn_receptive_field(const TcnConfig& config);
// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same angle).
Tensor positional_encoding(std::size_t steps, std::size_t d_model);

struct ForwardMode {
    bool dropout = false;
    // Replaces every dropout rate of the network while dropout is active.
    std::optional<double> rate_override;
    Rng* rng = nullptr;
    // Transformer only: receives each encoder layer's [B, H, T, T] attention weights.
    std::vector<Tensor>* attention_sink = nullptr;
};

// A differentiable sequence-to-one regressor over [B, W, C] windows.
class Network {
public:
    virtual ~Network() = default;

    virtual ModelKind kind() const = 0;
    virtual ModelConfig config() const = 0;
    virtual std::size_t input_dim() const = 0;
    // x is [B, W, C]; returns [B].
    virtual ad::Var forward(ad::Tape& tape, ad::Var x, const ForwardMode& mode) const = 0;
    virtual std::uint64_t flops(std::size_t window) const = 0;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

protected:
    ParamStore params_;
};

std::unique_ptr<Network> build_lstm(const LstmConfig& config, std::uint64_t seed);
std::unique_ptr<Network> build_tcn(const TcnConfig& config, std::uint64_t seed);
std::unique_ptr<Network> build_transformer(const TransformerConfig& config, std::uint64_t seed);
// Throws ConfigError for RfConfig.
std::unique_ptr<Network> build_network(const ModelConfig& config, std::uint64_t seed);

struct TreeNode {
    // -1 marks a leaf.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;
    std::uint32_t samples = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const double* x) const;
    // Training-sample-weighted mean depth of the leaves.
    double mean_leaf_depth() const;
};

struct Forest {
    RfConfig config;
    std::size_t n_features = 0;
    std::vector<Tree> trees;
    // Impurity decrease per flattened feature, normalized to sum 1.
    std::vector<double> importance;
};

// Windows are flattened to W*C features in (step, channel) order.
Forest rf_fit(const WindowedDataset& ds, const RfConfig& config);
std::vector<double> rf_predict(const Forest& forest, const WindowedDataset& ds);
// n_trees x N.
std::vector<std::vector<double>> rf_per_tree(const Forest& forest, const WindowedDataset& ds);
const std::vector<double>& rf_feature_importance(const Forest& forest);
// Importance summed over window steps, one entry per channel.
std::vector<double> rf_channel_importance(const Forest& forest, std::size_t channels);

struct EpochCallbackInfo {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainConfig {
    std::size_t batch = 64;
    double lr = 1e-3;
    std::size_t epochs = 300;
    bool shuffle = true;
    std::uint64_t seed = 0;
    // Return false to stop after this epoch.
    std::function<bool(const EpochCallbackInfo&)> on_epoch;

    void validate() const;
};

struct EpochLoss {
    double train = 0.0;
    double val = 0.0;
};

struct TrainingHistory {
    std::vector<EpochLoss> epochs;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
};

// Minimizes MSE with Adam and leaves the network holding the best-validation
// parameters. Falls back to the training loss when `val` is empty.
TrainingHistory train(Network& net, const WindowedDataset& train_set, const WindowedDataset& val_set,
                      const TrainConfig& config);

// Deterministic unless `mode.dropout` is set.
std::vector<double> predict(const Network& net, const WindowedDataset& ds, const ForwardMode& mode = {});

struct TrainedModel {
    ModelConfig config;
    std::unique_ptr<Network> net;
    std::optional<Forest> forest;
    ScalerParams scaler;
    std::vector<std::string> feature_names;
    std::size_t window = 0;
    std::size_t stride = 1;
    double dt = 0.0;
    std::uint64_t seed = 0;
    TrainingHistory history;

    ModelKind kind() const { return kind_of(config); }
};

// Builds and trains (or fits) a model on prepared splits.
TrainedModel fit_model(const ModelConfig& config, const PreparedData& data, TrainConfig train_config,
                       std::uint64_t seed);

// Scaled predictions, one per window. For forests `mc_dropout` is ignored.
std::vector<double> predict(const TrainedModel& model, const WindowedDataset& ds, bool mc_dropout = false,
                            std::uint64_t seed = 0, std::optional<double> rate_override = std::nullopt);

// Trainable scalars, or total node count for forests.
std::size_t count_parameters(const TrainedModel& model);
std::size_t count_parameters(const Network& net);
std::size_t count_parameters(const Forest& forest);

// Forward-pass FLOPs for one window. A multiply-accumulate is 2 FLOPs and each
// bias add is one more accumulate; elementwise nonlinearities, products and
// sums are 1 FLOP per element; softmax is 3 and layer_norm 8 per element.
// Forests count one comparison per expected leaf depth, summed over trees.
std::uint64_t estimate_flops(const Network& net, std::size_t window);
std::uint64_t estimate_flops(const Forest& forest);
std::uint64_t estimate_flops(const TrainedModel& model);

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);

// Directory with model.json plus parameter blobs (or forest.json).
void save_model(const TrainedModel& model, const std::string& dir);
TrainedModel load_model(const std::string& dir);

}  // namespace powertrace
