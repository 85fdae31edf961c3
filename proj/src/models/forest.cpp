#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "powertrace/errors.hpp"
#include "powertrace/models.hpp"

namespace powertrace {

double Tree::predict(const double* x) const {
    std::uint32_t n = 0;
    while (nodes[n].feature >= 0) {
        const TreeNode& node = nodes[n];
        n = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[n].value;
}

double Tree::mean_leaf_depth() const {
    if (nodes.empty() || nodes[0].samples == 0) return 0.0;
    double weighted = 0.0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [n, depth] = stack.back();
        stack.pop_back();
        const TreeNode& node = nodes[n];
        if (node.feature < 0) {
            weighted += static_cast<double>(node.samples) * depth;
        } else {
            stack.emplace_back(node.left, depth + 1);
            stack.emplace_back(node.right, depth + 1);
        }
    }
    return weighted / nodes[0].samples;
}

namespace {

struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const double* x, const double* y, std::size_t n_features, const RfConfig& cfg)
        : x_(x), y_(y), f_(n_features), cfg_(cfg), importance_(n_features, 0.0) {}

    Tree build(std::vector<std::uint32_t> rows) {
        rows_ = std::move(rows);
        Tree tree;
        struct Pending {
            std::uint32_t node;
            std::size_t begin, end, depth;
        };
        tree.nodes.emplace_back();
        std::vector<Pending> stack{{0, 0, rows_.size(), 0}};
        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            const std::size_t n = p.end - p.begin;
            double sum = 0.0;
            for (std::size_t i = p.begin; i < p.end; ++i) sum += y_[rows_[i]];
            const double mean = sum / static_cast<double>(n);
            tree.nodes[p.node].value = mean;
            tree.nodes[p.node].samples = static_cast<std::uint32_t>(n);
            if (p.depth >= cfg_.max_depth || n < 2 * cfg_.min_samples_leaf) continue;
            double sse = 0.0;
            for (std::size_t i = p.begin; i < p.end; ++i) sse += (y_[rows_[i]] - mean) * (y_[rows_[i]] - mean);
            if (sse <= 0.0) continue;
            const Split split = best_split(p.begin, p.end, sum);
            if (split.feature < 0) continue;

            const auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                                   rows_.begin() + static_cast<std::ptrdiff_t>(p.end),
                                                   [&](std::uint32_t r) {
                                                       return x_[r * f_ + static_cast<std::size_t>(split.feature)] <=
                                                              split.threshold;
                                                   });
            const std::size_t cut = static_cast<std::size_t>(mid - rows_.begin());
            importance_[static_cast<std::size_t>(split.feature)] += split.gain;
            const auto left = static_cast<std::uint32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[p.node];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, cut, p.end, p.depth + 1});
            stack.push_back({left, p.begin, cut, p.depth + 1});
        }
        return tree;
    }

    const std::vector<double>& importance() const { return importance_; }

private:
    Split best_split(std::size_t begin, std::size_t end, double total) {
        const std::size_t n = end - begin;
        const double parent = total * total / static_cast<double>(n);
        Split best;
        buf_.resize(n);
        for (std::size_t f = 0; f < f_; ++f) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint32_t r = rows_[begin + i];
                buf_[i] = {x_[r * f_ + f], r};
            }
            std::sort(buf_.begin(), buf_.end());
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += y_[buf_[i].second];
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (buf_[i].first == buf_[i + 1].first) continue;
                if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<std::int32_t>(f);
                    const double lo = buf_[i].first;
                    const double hi = buf_[i + 1].first;
                    double mid = lo + 0.5 * (hi - lo);
                    if (!(mid < hi)) mid = lo;
                    best.threshold = mid;
                }
            }
        }
        return best;
    }

    const double* x_;
    const double* y_;
    std::size_t f_;
    const RfConfig& cfg_;
    std::vector<double> importance_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::pair<double, std::uint32_t>> buf_;
};

std::vector<std::uint32_t> sample_rows(std::size_t n, const RfConfig& cfg, std::size_t tree) {
    std::vector<std::uint32_t> rows;
    if (!cfg.bootstrap) {
        rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
        return rows;
    }
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.bootstrap_fraction * n)));
    Rng rng(derive_seed(cfg.seed, tree));
    rows.resize(count);
    for (auto& r : rows) r = static_cast<std::uint32_t>(rng.below(n));
    return rows;
}

void check_features(const Forest& forest, const WindowedDataset& ds) {
    if (ds.window * ds.channels != forest.n_features) {
        throw ShapeError("forest expects " + std::to_string(forest.n_features) + " features per window, got " +
                         std::to_string(ds.window * ds.channels));
    }
}

}  // namespace

Forest rf_fit(const WindowedDataset& ds, const RfConfig& config) {
    config.validate();
    if (ds.size() < 2) throw DataError("random forest needs at least 2 training windows");
    const std::size_t features = ds.window * ds.channels;
    Forest forest;
    forest.config = config;
    forest.n_features = features;
    forest.trees.resize(config.n_trees);
    std::vector<std::vector<double>> per_tree_importance(config.n_trees);

    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t i = next++; i < config.n_trees; i = next++) {
            TreeBuilder builder(ds.x.data(), ds.y.data(), features, config);
            forest.trees[i] = builder.build(sample_rows(ds.size(), config, i));
            per_tree_importance[i] = builder.importance();
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, config.n_trees);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    forest.importance.assign(features, 0.0);
    for (const auto& imp : per_tree_importance) {
        for (std::size_t f = 0; f < features; ++f) forest.importance[f] += imp[f];
    }
    double total = 0.0;
    for (const double v : forest.importance) total += v;
    if (total > 0.0) {
        for (auto& v : forest.importance) v /= total;
    }
    return forest;
}

std::vector<std::vector<double>> rf_per_tree(const Forest& forest, const WindowedDataset& ds) {
    check_features(forest, ds);
    std::vector<std::vector<double>> out(forest.trees.size(), std::vector<double>(ds.size()));
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        for (std::size_t k = 0; k < ds.size(); ++k) out[t][k] = forest.trees[t].predict(ds.window_data(k));
    }
    return out;
}

std::vector<double> rf_predict(const Forest& forest, const WindowedDataset& ds) {
    const auto per_tree = rf_per_tree(forest, ds);
    std::vector<double> out(ds.size(), 0.0);
    for (std::size_t k = 0; k < ds.size(); ++k) {
        double s = 0.0;
        for (const auto& row : per_tree) s += row[k];
        out[k] = s / static_cast<double>(per_tree.size());
    }
    return out;
}

const std::vector<double>& rf_feature_importance(const Forest& forest) { return forest.importance; }

std::vector<double> rf_channel_importance(const Forest& forest, std::size_t channels) {
    if (channels == 0 || forest.n_features % channels != 0) {
        throw ShapeError("channel count does not divide the forest's feature count");
    }
    std::vector<double> out(channels, 0.0);
    for (std::size_t f = 0; f < forest.n_features; ++f) out[f % channels] += forest.importance[f];
    return out;
}

std::size_t count_parameters(const Forest& forest) {
    std::size_t n = 0;
    for (const auto& t : forest.trees) n += t.nodes.size();
    return n;
}

std::uint64_t estimate_flops(const Forest& forest) {
    double total = 0.0;
    for (const auto& t : forest.trees) total += t.mean_leaf_depth();
    return static_cast<std::uint64_t>(std::llround(total));
}

nlohmann::json forest_to_json(const Forest& forest) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : forest.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.samples});
        trees.push_back(std::move(nodes));
    }
    nlohmann::json cfg = config_to_json(forest.config);
    return {{"config", cfg},
            {"n_features", forest.n_features},
            {"importance", forest.importance},
            {"node_layout", {"feature", "threshold", "left", "right", "value", "samples"}},
            {"trees", trees}};
}

Forest forest_from_json(const nlohmann::json& j) {
    try {
        Forest forest;
        forest.config = std::get<RfConfig>(config_from_json(j.at("config")));
        forest.n_features = j.at("n_features").get<std::size_t>();
        forest.importance = j.at("importance").get<std::vector<double>>();
        for (const auto& tj : j.at("trees")) {
            Tree t;
            for (const auto& nj : tj) {
                TreeNode n;
                n.feature = nj.at(0).get<std::int32_t>();
                n.threshold = nj.at(1).get<double>();
                n.left = nj.at(2).get<std::uint32_t>();
                n.right = nj.at(3).get<std::uint32_t>();
                n.value = nj.at(4).get<double>();
                n.samples = nj.at(5).get<std::uint32_t>();
                if (n.feature >= static_cast<std::int32_t>(forest.n_features)) {
                    throw DataError("forest node references feature out of range");
                }
                t.nodes.push_back(n);
            }
            for (const auto& n : t.nodes) {
                if (n.feature >= 0 && (n.left >= t.nodes.size() || n.right >= t.nodes.size())) {
                    throw DataError("forest node child index out of range");
                }
            }
            if (t.nodes.empty()) throw DataError("forest contains an empty tree");
            forest.trees.push_back(std::move(t));
        }
        return forest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed forest: ") + e.what());
    } catch (const std::bad_variant_access&) {
        throw DataError("forest config is not a random forest config");
    }
}

}  // namespace powertrace
