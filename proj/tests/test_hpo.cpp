#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "powertrace/errors.hpp"
#include "powertrace/hpo.hpp"

using namespace powertrace;
using namespace powertrace::hpo;

namespace {

Trial completed(std::size_t id, double value_at_10) {
    Trial t;
    t.id = id;
    t.status = TrialStatus::complete;
    t.intermediate = {{10, value_at_10}};
    t.objective = value_at_10;
    return t;
}

// Smooth bowl with its minimum at LR = 10^-2.5, HD = 32, NL = 2, KS = 3, WS = 20.
double bowl(const Point& p) {
    const double lr = std::log10(p.at("LR")) + 2.5;
    const double hd = (p.at("HD") - 32.0) / 32.0;
    const double nl = p.at("NL") - 2.0;
    const double ks = p.at("KS") - 3.0;
    const double ws = (p.at("WS") - 20.0) / 10.0;
    return lr * lr + hd * hd + 0.5 * nl * nl + 0.25 * ks * ks + ws * ws;
}

struct NoReport final : TrialContext {
    bool report(std::size_t, double) override { return false; }
    std::size_t trial_id() const override { return 0; }
};

}  // namespace

TEST_CASE("median pruner") {
    PrunerConfig cfg;  // 5 warm-up trials, 10 warm-up steps
    std::vector<Trial> history;
    for (std::size_t i = 0; i < 6; ++i) history.push_back(completed(i, static_cast<double>(i + 1)));
    // Median of 1..6 is 3.5.
    CHECK(median_prune(10, 7.0, history, cfg));
    CHECK_FALSE(median_prune(10, 3.5, history, cfg));
    CHECK(median_prune(10, 3.5 + 1e-12, history, cfg));
    CHECK_FALSE(median_prune(9, 100.0, history, cfg));
    CHECK_FALSE(median_prune(11, 100.0, history, cfg));

    std::vector<Trial> four(history.begin(), history.begin() + 4);
    CHECK_FALSE(median_prune(10, 100.0, four, cfg));

    Trial running = completed(9, 0.0);
    running.status = TrialStatus::pruned;
    history.push_back(running);
    CHECK(median_prune(10, 3.6, history, cfg));
}

TEST_CASE("search space validation and JSON") {
    auto space = default_space(ModelKind::transformer, Metric::mae);
    CHECK_NOTHROW(space.validate());
    const auto back = SearchSpace::from_json(space.to_json());
    CHECK(back.to_json() == space.to_json());

    space.dimensions["MH"] = {Dimension::Kind::choice, {3}, 0, 0};
    CHECK_THROWS_AS(space.validate(), ConfigError);

    auto tcn = default_space(ModelKind::tcn, Metric::rmse);
    tcn.dimensions["XX"] = {Dimension::Kind::choice, {1}, 0, 0};
    CHECK_THROWS_AS(tcn.validate(), ConfigError);
    tcn.dimensions.erase("XX");
    tcn.dimensions["LR"] = {Dimension::Kind::log_uniform, {}, 0.0, 1e-2};
    CHECK_THROWS_AS(tcn.validate(), ConfigError);
    tcn.dimensions["LR"] = {Dimension::Kind::uniform, {}, 1e-2, 1e-3};
    CHECK_THROWS_AS(tcn.validate(), ConfigError);
    tcn.dimensions["LR"] = {Dimension::Kind::uniform, {}, 1e-3, 1e-2};
    tcn.dimensions["HD"] = {Dimension::Kind::uniform, {}, 8, 64};
    CHECK_THROWS_AS(tcn.validate(), ConfigError);

    CHECK_THROWS_AS(default_space(ModelKind::random_forest, Metric::mae), ConfigError);
    CHECK_THROWS_AS(SearchSpace::from_json(nlohmann::json{{"model", "tcn"}}), ConfigError);
}

TEST_CASE("sampled points stay inside the space and build valid models") {
    for (const ModelKind kind : {ModelKind::lstm, ModelKind::tcn, ModelKind::transformer}) {
        const auto space = default_space(kind, Metric::mae);
        const RandomSampler sampler(5);
        for (std::size_t i = 0; i < 200; ++i) {
            const Point p = sampler.sample(space, i);
            REQUIRE(p.size() == space.dimensions.size());
            for (const auto& [name, d] : space.dimensions) CHECK(d.contains(p.at(name)));
            CHECK_NOTHROW(config_from_point(kind, p, 3));
        }
    }
}

TEST_CASE("search returns the best complete trial") {
    const auto space = default_space(ModelKind::tcn, Metric::mae);
    const Objective objective = [](const Point& p, TrialContext&) { return bowl(p); };

    SearchOptions opts;
    opts.budget = 1;
    opts.seed = 3;
    const auto one = search(space, objective, opts);
    REQUIRE(one.trials.size() == 1);
    CHECK(one.best.id == 0);
    CHECK(one.best.status == TrialStatus::complete);

    opts.budget = 50;
    const auto res = search(space, objective, opts);
    double min_final = INFINITY;
    for (const auto& t : res.trials) {
        REQUIRE(t.status == TrialStatus::complete);
        min_final = std::min(min_final, *t.objective);
    }
    CHECK(*res.best.objective == min_final);
    REQUIRE(res.leaderboard.size() == 50);
    for (std::size_t i = 1; i < res.leaderboard.size(); ++i) {
        CHECK(*res.trials[res.leaderboard[i - 1]].objective <= *res.trials[res.leaderboard[i]].objective);
    }

    // Top decile of the space, estimated from an independent sample.
    const RandomSampler reference(999);
    std::vector<double> values;
    for (std::size_t i = 0; i < 5000; ++i) values.push_back(bowl(reference.sample(space, i)));
    std::sort(values.begin(), values.end());
    CHECK(*res.best.objective <= values[values.size() / 10]);
}

TEST_CASE("worker count does not change the sampled points") {
    const auto space = default_space(ModelKind::lstm, Metric::rmse);
    const Objective objective = [](const Point& p, TrialContext&) {
        return std::log(p.at("LR")) * std::log(p.at("LR")) + p.at("HD") * 1e-3;
    };
    SearchOptions opts;
    opts.budget = 12;
    opts.seed = 21;
    const auto serial = search(space, objective, opts);
    opts.workers = 2;
    const auto parallel = search(space, objective, opts);
    REQUIRE(serial.trials.size() == parallel.trials.size());
    for (std::size_t i = 0; i < serial.trials.size(); ++i) {
        CHECK(serial.trials[i].point == parallel.trials[i].point);
        CHECK(serial.trials[i].objective == parallel.trials[i].objective);
    }
    CHECK(serial.best.id == parallel.best.id);
}

TEST_CASE("search prunes bad curves and logs every checkpoint") {
    auto space = default_space(ModelKind::tcn, Metric::mae);
    // Trials 0..5 each beat the previous one; later odd trials plateau high and must be pruned at step 10,
    // later even trials track the best curve and survive.
    const Objective objective = [](const Point&, TrialContext& ctx) {
        const bool bad = ctx.trial_id() >= 6 && ctx.trial_id() % 2 == 1;
        double v = 0.0;
        for (std::size_t step = 1; step <= 20; ++step) {
            v = bad ? 10.0 : 1.0 / static_cast<double>(step) + (ctx.trial_id() < 6 ? 0.01 * static_cast<double>(6 - ctx.trial_id()) : 0.0);
            if (ctx.report(step, v)) break;
        }
        return v;
    };
    std::vector<nlohmann::json> log;
    SearchOptions opts;
    opts.budget = 10;
    opts.log = [&](const nlohmann::json& j) { log.push_back(j); };
    const auto res = search(space, objective, opts);
    std::size_t checkpoints = 0;
    for (const auto& t : res.trials) {
        const bool bad = t.id >= 6 && t.id % 2 == 1;
        CAPTURE(t.id);
        CHECK(t.status == (bad ? TrialStatus::pruned : TrialStatus::complete));
        CHECK(t.intermediate.size() == (bad ? 10u : 20u));
        CHECK(t.objective.has_value() == !bad);
        checkpoints += t.intermediate.size();
    }
    CHECK(log.size() == checkpoints + res.trials.size());
    CHECK(log.back().at("status").is_string());
    CHECK(res.best.id == 6);
}

TEST_CASE("search fails when no trial completes") {
    const auto space = default_space(ModelKind::tcn, Metric::mae);
    const Objective failing = [](const Point&, TrialContext&) -> double { throw NumericError("diverged"); };
    SearchOptions opts;
    opts.budget = 3;
    try {
        search(space, failing, opts);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("warm-up") != std::string::npos);
    }
    const Objective nan = [](const Point&, TrialContext&) { return std::nan(""); };
    CHECK_THROWS_AS(search(space, nan, opts), ConfigError);
    opts.budget = 0;
    CHECK_THROWS_AS(search(space, failing, opts), ConfigError);
}

TEST_CASE("presets map onto model configurations") {
    const auto& ice = find_preset("ice-tcn");
    const auto tcn = std::get<TcnConfig>(config_from_point(ice.model, ice.point, 3));
    CHECK(tcn.channels == 64);
    CHECK(tcn.dilations == std::vector<std::size_t>{1, 2, 4});
    CHECK(tcn.kernel == 3);
    CHECK(window_from_point(ice.point, 0) == 10);
    CHECK(train_from_point(ice.point, {}).lr == doctest::Approx(0.01));
    CHECK(ice.metric == Metric::mae);

    const auto& ev = find_preset("ev-transformer");
    const auto tf = std::get<TransformerConfig>(config_from_point(ev.model, ev.point, 4));
    CHECK(tf.d_model == 64);
    CHECK(tf.heads == 2);
    CHECK(tf.encoder_layers == 2);
    CHECK(tf.ff_dim == 32);
    CHECK(tf.dropout == doctest::Approx(0.1));
    CHECK(window_from_point(ev.point, 0) == 50);

    const auto& hev = find_preset("hev-lstm");
    const auto lstm = std::get<LstmConfig>(config_from_point(hev.model, hev.point, 5));
    CHECK(lstm.hidden == 132);
    CHECK(lstm.layers == 9);
    CHECK(hev.metric == Metric::rmse);
    CHECK(hev.notes.find("KS") != std::string::npos);

    CHECK_THROWS_AS(find_preset("diesel"), ConfigError);
}

TEST_CASE("model objective trains and reports each epoch") {
    Rng rng(8);
    AlignedSeries series;
    series.dt = 1.0;
    series.feature_names = {"speed", "engine_rpm"};
    for (std::size_t r = 0; r < 120; ++r) {
        const double s = rng.uniform(0, 1);
        const double e = rng.uniform(0, 1);
        series.timestamps.push_back(static_cast<double>(r));
        series.features.push_back(s);
        series.features.push_back(e);
        series.target.push_back(2 * s + e);
    }
    ModelObjectiveConfig cfg;
    cfg.series = series;
    cfg.features = series.feature_names;
    cfg.model = ModelKind::lstm;
    cfg.train.epochs = 3;
    SearchSpace space;
    space.model = ModelKind::lstm;
    space.dimensions["WS"] = {Dimension::Kind::choice, {4, 6}, 0, 0};
    space.dimensions["HD"] = {Dimension::Kind::choice, {4, 8}, 0, 0};
    space.dimensions["NL"] = {Dimension::Kind::int_uniform, {}, 1, 2};
    space.dimensions["LR"] = {Dimension::Kind::log_uniform, {}, 1e-3, 1e-2};
    SearchOptions opts;
    opts.budget = 3;
    opts.workers = 2;
    const auto res = search(space, make_model_objective(cfg), opts);
    for (const auto& t : res.trials) {
        CHECK(t.status == TrialStatus::complete);
        CHECK(t.intermediate.size() == 3);
        CHECK(std::isfinite(*t.objective));
    }

    NoReport ctx;
    const auto objective = make_model_objective(cfg);
    const Point p{{"WS", 4}, {"HD", 4}, {"NL", 1}, {"LR", 1e-3}};
    CHECK(objective(p, ctx) == objective(p, ctx));
}

TEST_CASE("parallel search with pruning is reproducible") {
    const auto space = default_space(ModelKind::tcn, Metric::mae);
    const Objective objective = [](const Point& p, TrialContext& ctx) {
        double v = 0.0;
        for (std::size_t step = 1; step <= 15; ++step) {
            v = bowl(p) + 1.0 / static_cast<double>(step);
            if (ctx.report(step, v)) break;
        }
        return v;
    };
    const auto run = [&] {
        std::string log;
        SearchOptions opts;
        opts.budget = 24;
        opts.workers = 3;
        opts.seed = 2;
        opts.pruner.warmup_trials = 3;
        opts.log = [&](const nlohmann::json& j) { log += j.dump() + "\n"; };
        search(space, objective, opts);
        return log;
    };
    const std::string first = run();
    CHECK(first.find("\"status\":\"pruned\"") != std::string::npos);
    CHECK(first == run());
}
