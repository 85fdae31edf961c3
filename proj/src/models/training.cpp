#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "powertrace/checkpoint.hpp"
#include "powertrace/errors.hpp"
#include "powertrace/models.hpp"
#include "powertrace/optim.hpp"
#include "powertrace/text.hpp"

namespace powertrace {

namespace {

constexpr std::size_t kPredictBatch = 256;
constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kDropoutStream = 0x4452;

void gather_batch(const WindowedDataset& ds, const std::size_t* idx, std::size_t count, Tensor& x, Tensor& y) {
    const std::size_t cells = ds.window * ds.channels;
    x = Tensor(Shape{count, ds.window, ds.channels});
    y = Tensor(Shape{count});
    for (std::size_t b = 0; b < count; ++b) {
        const double* src = ds.window_data(idx[b]);
        std::copy(src, src + cells, x.data() + b * cells);
        y[b] = ds.y[idx[b]];
    }
}

void check_channels(const Network& net, const WindowedDataset& ds) {
    if (ds.channels != net.input_dim()) {
        throw ShapeError("model expects " + std::to_string(net.input_dim()) + " channels, dataset has " +
                         std::to_string(ds.channels));
    }
}

double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
    return s / static_cast<double>(y.size());
}

}  // namespace

void TrainConfig::validate() const {
    if (batch < 1) throw ConfigError("batch size must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
}

TrainingHistory train(Network& net, const WindowedDataset& train_set, const WindowedDataset& val_set,
                      const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0) throw DataError("training split is empty");
    check_channels(net, train_set);
    if (val_set.size() > 0) check_channels(net, val_set);

    ParamStore& params = net.params();
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
    Rng dropout_rng(derive_seed(config.seed, kDropoutStream));
    const AdamConfig adam{.lr = config.lr};

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Tensor> best = params.snapshot();
    TrainingHistory history;
    history.best_val = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        EpochLoss loss;
        try {
            double weighted = 0.0;
            Tensor xb, yb;
            for (std::size_t start = 0; start < order.size(); start += config.batch) {
                const std::size_t count = std::min(config.batch, order.size() - start);
                gather_batch(train_set, order.data() + start, count, xb, yb);
                ad::Tape tape;
                ForwardMode mode;
                mode.dropout = true;
                mode.rng = &dropout_rng;
                const ad::Var pred = net.forward(tape, tape.constant(std::move(xb)), mode);
                const ad::Var l = ad::mse_loss(tape, pred, yb);
                tape.backward(l);
                params.zero_grad();
                tape.accumulate_param_grads(params);
                adam_step(params, adam);
                weighted += tape.value(l).item() * static_cast<double>(count);
            }
            loss.train = weighted / static_cast<double>(order.size());
            loss.val = val_set.size() > 0 ? mean_squared_error(predict(net, val_set), val_set.y) : loss.train;
            if (!std::isfinite(loss.train) || !std::isfinite(loss.val)) throw NumericError("loss is not finite");
        } catch (const NumericError& e) {
            params.restore(best);
            const std::string restored = history.epochs.empty()
                                             ? std::string("initial parameters")
                                             : "parameters from epoch " + std::to_string(history.best_epoch + 1);
            throw NumericError("training diverged in epoch " + std::to_string(epoch + 1) + " (" + e.what() +
                               "); restored " + restored);
        }
        history.epochs.push_back(loss);
        if (loss.val < history.best_val) {
            history.best_val = loss.val;
            history.best_epoch = epoch;
            best = params.snapshot();
        }
        if (config.on_epoch && !config.on_epoch({epoch, loss.train, loss.val})) break;
    }
    params.restore(best);
    return history;
}

std::vector<double> predict(const Network& net, const WindowedDataset& ds, const ForwardMode& mode) {
    check_channels(net, ds);
    std::vector<double> out(ds.size());
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Tensor xb, yb;
    for (std::size_t start = 0; start < ds.size(); start += kPredictBatch) {
        const std::size_t count = std::min(kPredictBatch, ds.size() - start);
        gather_batch(ds, idx.data() + start, count, xb, yb);
        ad::Tape tape;
        const ad::Var pred = net.forward(tape, tape.constant(std::move(xb)), mode);
        const Tensor& pv = tape.value(pred);
        std::copy(pv.data(), pv.data() + count, out.begin() + static_cast<std::ptrdiff_t>(start));
    }
    return out;
}

TrainedModel fit_model(const ModelConfig& config, const PreparedData& data, TrainConfig train_config,
                       std::uint64_t seed) {
    const WindowedDataset& tr = data.splits.train;
    TrainedModel model;
    model.config = config;
    const std::size_t declared = input_dim_of(config);
    if (kind_of(config) != ModelKind::random_forest) {
        if (declared == 0) {
            set_input_dim(model.config, tr.channels);
        } else if (declared != tr.channels) {
            throw ConfigError("model input_dim " + std::to_string(declared) + " does not match " +
                              std::to_string(tr.channels) + " feature channels");
        }
    }
    validate(model.config);
    model.scaler = data.scaler;
    model.feature_names = tr.feature_names;
    model.window = tr.window;
    model.stride = tr.stride;
    model.dt = tr.dt;
    model.seed = seed;
    if (auto* rf = std::get_if<RfConfig>(&model.config)) {
        rf->seed = seed;
        model.forest = rf_fit(tr, *rf);
        return model;
    }
    model.net = build_network(model.config, seed);
    train_config.seed = seed;
    model.history = train(*model.net, tr, data.splits.val, train_config);
    return model;
}

std::vector<double> predict(const TrainedModel& model, const WindowedDataset& ds, bool mc_dropout,
                            std::uint64_t seed, std::optional<double> rate_override) {
    if (!model.feature_names.empty() && !ds.feature_names.empty() && ds.feature_names != model.feature_names) {
        throw ConfigError("dataset features [" + join(ds.feature_names, ", ") + "] do not match model features [" +
                          join(model.feature_names, ", ") + "]");
    }
    if (ds.window != model.window) {
        throw ShapeError("dataset window " + std::to_string(ds.window) + " differs from model window " +
                         std::to_string(model.window));
    }
    if (model.forest) return rf_predict(*model.forest, ds);
    if (!model.net) throw ConfigError("model has no trained network");
    Rng rng(seed);
    ForwardMode mode;
    mode.dropout = mc_dropout;
    mode.rng = &rng;
    mode.rate_override = rate_override;
    return predict(*model.net, ds, mode);
}

std::size_t count_parameters(const Network& net) { return net.params().scalar_count(); }

std::size_t count_parameters(const TrainedModel& model) {
    if (model.forest) return count_parameters(*model.forest);
    return model.net ? count_parameters(*model.net) : 0;
}

std::uint64_t estimate_flops(const Network& net, std::size_t window) { return net.flops(window); }

std::uint64_t estimate_flops(const TrainedModel& model) {
    if (model.forest) return estimate_flops(*model.forest);
    return model.net ? estimate_flops(*model.net, model.window) : 0;
}

namespace {

constexpr const char* kModelFile = "model.json";
constexpr const char* kForestFile = "forest.json";

std::string path_in(const std::string& dir, const char* file) {
    return (std::filesystem::path(dir) / file).string();
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json train_losses = nlohmann::json::array();
    nlohmann::json val_losses = nlohmann::json::array();
    for (const auto& e : model.history.epochs) {
        train_losses.push_back(e.train);
        val_losses.push_back(e.val);
    }
    nlohmann::json j = {
        {"format", "powertrace-model"},
        {"version", 1},
        {"kind", std::string(to_string(model.kind()))},
        {"config", config_to_json(model.config)},
        {"seed", model.seed},
        {"scaler", model.scaler.to_json()},
        {"feature_names", model.feature_names},
        {"window", model.window},
        {"stride", model.stride},
        {"dt", model.dt},
        {"history",
         {{"train_mse", train_losses},
          {"val_mse", val_losses},
          {"best_epoch", model.history.best_epoch},
          {"best_val_mse", model.history.epochs.empty() ? 0.0 : model.history.best_val}}},
    };
    if (model.forest) {
        write_file(path_in(dir, kForestFile), forest_to_json(*model.forest).dump() + "\n");
        j["forest"] = kForestFile;
    } else if (model.net) {
        j["params"] = write_param_blobs(model.net->params(), dir);
    } else {
        throw ConfigError("cannot save an untrained model");
    }
    write_file(path_in(dir, kModelFile), j.dump(2) + "\n");
}

TrainedModel load_model(const std::string& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path_in(dir, kModelFile)));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model.json: ") + e.what());
    }
    if (j.value("format", "") != "powertrace-model") throw DataError(dir + " does not hold a powertrace model");
    TrainedModel model;
    try {
        model.config = config_from_json(j.at("config"));
        model.seed = j.at("seed").get<std::uint64_t>();
        model.scaler = ScalerParams::from_json(j.at("scaler"));
        model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        model.window = j.at("window").get<std::size_t>();
        model.stride = j.at("stride").get<std::size_t>();
        model.dt = j.at("dt").get<double>();
        const auto& h = j.at("history");
        const auto tr = h.at("train_mse").get<std::vector<double>>();
        const auto va = h.at("val_mse").get<std::vector<double>>();
        if (tr.size() != va.size()) throw DataError("model history lengths differ");
        for (std::size_t i = 0; i < tr.size(); ++i) model.history.epochs.push_back({tr[i], va[i]});
        model.history.best_epoch = h.at("best_epoch").get<std::size_t>();
        model.history.best_val = h.at("best_val_mse").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model.json: ") + e.what());
    }
    if (j.contains("forest")) {
        try {
            model.forest = forest_from_json(nlohmann::json::parse(read_file(path_in(dir, kForestFile))));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed forest.json: ") + e.what());
        }
    } else {
        model.net = build_network(model.config, model.seed);
        read_param_blobs(model.net->params(), j.at("params"), dir);
    }
    return model;
}

}  // namespace powertrace
