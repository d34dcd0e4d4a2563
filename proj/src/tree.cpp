#include "admissible/tree.hpp"

#include "admissible/error.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

namespace admissible {

using nlohmann::json;

void TreeParams::validate() const {
    if (max_depth < 0) throw Error(ErrorKind::InvalidArgument, "max_depth must be >= 0");
    if (min_leaf < 1) throw Error(ErrorKind::InvalidArgument, "min_leaf must be >= 1");
    if (mtry < 0) throw Error(ErrorKind::InvalidArgument, "mtry must be >= 0");
    for (double w : candidate_weights)
        if (!(w >= 0.0) || !std::isfinite(w))
            throw Error(ErrorKind::InvalidArgument, "candidate weights must be finite and >= 0");
}

std::size_t TreeModel::depth() const {
    std::size_t best = 0;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        const auto& node = nodes[static_cast<std::size_t>(id)];
        best = std::max(best, d);
        if (!node.is_leaf()) {
            stack.push_back({node.left, d + 1});
            stack.push_back({node.right, d + 1});
        }
    }
    return best;
}

std::set<std::string> TreeModel::used_features() const {
    std::set<std::string> out;
    for (const auto& node : nodes)
        if (!node.is_leaf()) out.insert(features[static_cast<std::size_t>(node.split.feature)].name);
    return out;
}

namespace {

// n * Gini impurity of a count vector.
double weighted_gini(std::span<const double> counts) {
    double n = 0.0, sq = 0.0;
    for (double c : counts) {
        n += c;
        sq += c * c;
    }
    return n > 0.0 ? n - sq / n : 0.0;
}

struct Candidate {
    double gain = 0.0;
    Split split;
};

class Builder {
public:
    Builder(const std::vector<EncodedColumn>& x, const std::vector<int>& y, std::size_t k,
            const TreeParams& params)
        : x_(x), y_(y), k_(k), params_(params), rng_(params.seed) {}

    std::vector<TreeModel::Node> build(std::vector<std::size_t> rows) {
        grow(std::move(rows), 0);
        return std::move(nodes_);
    }

private:
    std::vector<double> class_counts(std::span<const std::size_t> rows) const {
        std::vector<double> c(k_, 0.0);
        for (auto r : rows) c[static_cast<std::size_t>(y_[r])] += 1.0;
        return c;
    }

    int grow(std::vector<std::size_t> rows, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        const auto counts = class_counts(rows);
        {
            auto& node = nodes_.back();
            node.n = rows.size();
            node.probs.resize(k_);
            for (std::size_t c = 0; c < k_; ++c) node.probs[c] = counts[c] / static_cast<double>(rows.size());
        }
        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
        const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
        if (pure || depth >= params_.max_depth || rows.size() < 2 * min_leaf) return id;

        const auto best = best_split(rows, counts);
        if (!best) return id;

        std::vector<std::size_t> left, right;
        const auto& col = x_[static_cast<std::size_t>(best->split.feature)];
        for (auto r : rows) (best->split.goes_left(col, r) ? left : right).push_back(r);
        nodes_[static_cast<std::size_t>(id)].split = best->split;
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features() {
        const auto p = x_.size();
        std::vector<std::size_t> all(p);
        std::iota(all.begin(), all.end(), std::size_t{0});
        if (params_.mtry == 0 || static_cast<std::size_t>(params_.mtry) >= p) {
            if (params_.candidate_weights.empty()) return all;
            std::vector<std::size_t> positive;
            for (auto f : all)
                if (params_.candidate_weights[f] > 0.0) positive.push_back(f);
            return positive;
        }
        std::vector<double> w = params_.candidate_weights.empty() ? std::vector<double>(p, 1.0)
                                                                  : params_.candidate_weights;
        std::vector<std::size_t> out;
        for (int draw = 0; draw < params_.mtry; ++draw) {
            const double total = std::accumulate(w.begin(), w.end(), 0.0);
            if (!(total > 0.0)) break;
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng_), acc = 0.0;
            std::size_t pick = p;
            for (std::size_t f = 0; f < p; ++f) {
                if (w[f] <= 0.0) continue;
                acc += w[f];
                pick = f;
                if (target < acc) break;
            }
            out.push_back(pick);
            w[pick] = 0.0;
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::optional<Candidate> best_split(std::span<const std::size_t> rows,
                                        const std::vector<double>& counts) {
        const double parent = weighted_gini(counts);
        std::optional<Candidate> best;
        for (auto f : candidate_features()) {
            auto cand = x_[f].categorical ? categorical_split(f, rows, parent) : numeric_split(f, rows, parent);
            if (cand && (!best || cand->gain > best->gain)) best = std::move(cand);
        }
        return best;
    }

    // Gain once missing rows are sent to the larger side; nullopt if either side
    // would be smaller than min_leaf.
    std::optional<std::pair<double, bool>> score(const std::vector<double>& left,
                                                 const std::vector<double>& right,
                                                 const std::vector<double>& miss, double parent) const {
        const double nl = std::accumulate(left.begin(), left.end(), 0.0);
        const double nr = std::accumulate(right.begin(), right.end(), 0.0);
        const bool missing_left = nl >= nr;
        std::vector<double> l = left, r = right;
        for (std::size_t c = 0; c < k_; ++c) (missing_left ? l : r)[c] += miss[c];
        const double ml = static_cast<double>(params_.min_leaf);
        if (std::accumulate(l.begin(), l.end(), 0.0) < ml || std::accumulate(r.begin(), r.end(), 0.0) < ml)
            return std::nullopt;
        return std::make_pair(parent - weighted_gini(l) - weighted_gini(r), missing_left);
    }

    std::optional<Candidate> numeric_split(std::size_t f, std::span<const std::size_t> rows, double parent) const {
        const auto& col = x_[f];
        std::vector<std::size_t> obs;
        std::vector<double> miss(k_, 0.0);
        for (auto r : rows) {
            if (col.missing[r]) miss[static_cast<std::size_t>(y_[r])] += 1.0;
            else obs.push_back(r);
        }
        std::stable_sort(obs.begin(), obs.end(),
                         [&](std::size_t a, std::size_t b) { return col.values[a] < col.values[b]; });
        std::vector<double> left(k_, 0.0), right = class_counts(obs);
        std::optional<Candidate> best;
        for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
            const auto c = static_cast<std::size_t>(y_[obs[i]]);
            left[c] += 1.0;
            right[c] -= 1.0;
            const double a = col.values[obs[i]], b = col.values[obs[i + 1]];
            if (!(a < b)) continue;
            const auto s = score(left, right, miss, parent);
            if (!s || s->first <= 1e-12) continue;
            if (best && s->first <= best->gain) continue;
            double threshold = a + (b - a) / 2.0;
            if (!(threshold < b)) threshold = a;
            Candidate cand;
            cand.gain = s->first;
            cand.split.feature = static_cast<int>(f);
            cand.split.threshold = threshold;
            cand.split.missing_left = s->second;
            best = cand;
        }
        return best;
    }

    std::optional<Candidate> categorical_split(std::size_t f, std::span<const std::size_t> rows,
                                               double parent) const {
        const auto& col = x_[f];
        std::vector<std::vector<double>> level_counts(col.n_levels, std::vector<double>(k_, 0.0));
        std::vector<double> miss(k_, 0.0);
        for (auto r : rows) {
            const auto c = static_cast<std::size_t>(y_[r]);
            if (col.missing[r]) miss[c] += 1.0;
            else level_counts[static_cast<std::size_t>(col.codes[r])][c] += 1.0;
        }
        std::vector<std::size_t> present;
        for (std::size_t l = 0; l < col.n_levels; ++l)
            if (std::accumulate(level_counts[l].begin(), level_counts[l].end(), 0.0) > 0.0) present.push_back(l);
        if (present.size() < 2) return std::nullopt;

        std::optional<Candidate> best;
        auto consider = [&](const std::vector<std::uint8_t>& in_left) {
            std::vector<double> left(k_, 0.0), right(k_, 0.0);
            for (std::size_t i = 0; i < present.size(); ++i)
                for (std::size_t c = 0; c < k_; ++c)
                    (in_left[i] ? left : right)[c] += level_counts[present[i]][c];
            const auto s = score(left, right, miss, parent);
            if (!s || s->first <= 1e-12) return;
            if (best && s->first <= best->gain) return;
            Candidate cand;
            cand.gain = s->first;
            cand.split.feature = static_cast<int>(f);
            cand.split.level_side.assign(col.n_levels, 2);
            for (std::size_t i = 0; i < present.size(); ++i) cand.split.level_side[present[i]] = in_left[i];
            cand.split.missing_left = s->second;
            best = std::move(cand);
        };

        const std::size_t m = present.size();
        if (m <= 8) {
            // Every bipartition, with the first present level pinned left.
            for (std::uint32_t mask = 0; mask + 1 < (1u << (m - 1)); ++mask) {
                std::vector<std::uint8_t> in_left(m, 0);
                in_left[0] = 1;
                for (std::size_t i = 1; i < m; ++i) in_left[i] = (mask >> (i - 1)) & 1u ? 1 : 0;
                consider(in_left);
            }
        } else {
            // Order levels by the share of the first class, then scan prefixes.
            std::vector<std::size_t> order(m);
            std::iota(order.begin(), order.end(), std::size_t{0});
            auto share = [&](std::size_t i) {
                const auto& lc = level_counts[present[i]];
                return lc[0] / std::accumulate(lc.begin(), lc.end(), 0.0);
            };
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return share(a) < share(b); });
            std::vector<std::uint8_t> in_left(m, 0);
            for (std::size_t cut = 0; cut + 1 < m; ++cut) {
                in_left[order[cut]] = 1;
                consider(in_left);
            }
        }
        return best;
    }

    const std::vector<EncodedColumn>& x_;
    const std::vector<int>& y_;
    std::size_t k_;
    const TreeParams& params_;
    std::mt19937_64 rng_;
    std::vector<TreeModel::Node> nodes_;
};

TreeModel fit_with_classes(const Table& table, const std::string& y, std::span<const std::string> features,
                           const TreeParams& params, std::vector<std::string> classes,
                           std::vector<std::size_t> rows) {
    params.validate();
    if (features.empty()) throw Error(ErrorKind::InvalidArgument, "fit_tree needs at least one feature");
    for (const auto& f : features)
        if (f == y) throw Error(ErrorKind::Schema, "target '" + y + "' listed as a feature");
    if (!params.candidate_weights.empty() && params.candidate_weights.size() != features.size())
        throw Error(ErrorKind::InvalidArgument, "candidate weights must align with the feature list");
    TreeModel model;
    model.params = params;
    model.classes = std::move(classes);
    model.features = feature_schema(table, features);
    const auto x = encode_features(table, model.features);
    const auto codes = encode_target_as(table, y, model.classes);
    Builder builder(x, codes, model.classes.size(), params);
    model.nodes = builder.build(std::move(rows));
    return model;
}

std::vector<std::size_t> observed_rows(const Table& table, const std::string& y) {
    const auto& col = table.column(y);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        if (!col.is_missing(i)) rows.push_back(i);
    return rows;
}

json node_to_json(const TreeModel& t, int id) {
    const auto& node = t.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) return json{{"leaf", node.probs}, {"n", node.n}};
    return json{{"split", split_to_json(node.split, t.features)},
                {"n", node.n},
                {"probs", node.probs},
                {"left", node_to_json(t, node.left)},
                {"right", node_to_json(t, node.right)}};
}

int node_from_json(const json& j, TreeModel& t) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    TreeModel::Node node;
    node.n = j.at("n").get<std::size_t>();
    if (j.contains("leaf")) {
        node.probs = j.at("leaf").get<std::vector<double>>();
        if (node.probs.size() != t.classes.size())
            throw Error(ErrorKind::Parse, "leaf distribution does not match the class list");
    } else {
        node.split = split_from_json(j.at("split"), t.features);
        node.probs = j.value("probs", std::vector<double>{});
        node.left = node_from_json(j.at("left"), t);
        node.right = node_from_json(j.at("right"), t);
    }
    t.nodes[static_cast<std::size_t>(id)] = std::move(node);
    return id;
}

}  // namespace

TreeModel fit_tree(const Table& table, const std::string& y, std::span<const std::string> features,
                   const TreeParams& params) {
    // A single observed class is allowed here: the result is one pure leaf.
    const auto& col = table.column(y);
    if (!col.is_categorical()) throw Error(ErrorKind::Schema, "target '" + y + "' must be categorical");
    std::vector<std::uint8_t> seen(col.categories().size(), 0);
    for (std::size_t r = 0; r < table.n_rows(); ++r)
        if (!col.is_missing(r)) seen[static_cast<std::size_t>(col.code(r))] = 1;
    std::vector<std::string> classes;
    for (std::size_t c = 0; c < seen.size(); ++c)
        if (seen[c]) classes.push_back(col.categories()[c]);
    if (classes.empty()) throw Error(ErrorKind::Degenerate, "target '" + y + "' has no observed values");
    return fit_with_classes(table, y, features, params, classes, observed_rows(table, y));
}

ProbMatrix predict_tree(const TreeModel& tree, const Table& table) {
    const auto x = encode_features(table, tree.features);
    ProbMatrix out;
    out.rows = table.n_rows();
    out.classes = tree.classes.size();
    out.probs.resize(out.rows * out.classes);
    for (std::size_t r = 0; r < out.rows; ++r) {
        std::size_t id = 0;
        while (!tree.nodes[id].is_leaf()) {
            const auto& node = tree.nodes[id];
            const bool left = node.split.goes_left(x[static_cast<std::size_t>(node.split.feature)], r);
            id = static_cast<std::size_t>(left ? node.left : node.right);
        }
        std::copy(tree.nodes[id].probs.begin(), tree.nodes[id].probs.end(),
                  out.probs.begin() + static_cast<std::ptrdiff_t>(r * out.classes));
    }
    return out;
}

WeightedForest fit_weighted_forest(const Table& table, const std::string& y,
                                   std::span<const std::string> features,
                                   std::span<const double> selection_probs, int n_trees,
                                   TreeParams params) {
    if (n_trees < 1) throw Error(ErrorKind::InvalidArgument, "n_trees must be >= 1");
    if (selection_probs.size() != features.size())
        throw Error(ErrorKind::InvalidArgument, "selection probabilities must align with the feature list");
    auto target = encode_target(table, y);
    if (target.classes.size() < 2)
        throw Error(ErrorKind::Degenerate, "target '" + y + "' has fewer than two observed classes");
    params.candidate_weights.assign(selection_probs.begin(), selection_probs.end());
    if (params.mtry == 0)
        params.mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(features.size())))));
    const auto rows = observed_rows(table, y);
    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    WeightedForest forest;
    for (int t = 0; t < n_trees; ++t) {
        std::vector<std::size_t> sample(rows.size());
        for (auto& s : sample) s = rows[pick(rng)];
        TreeParams tp = params;
        tp.seed = params.seed + static_cast<std::uint64_t>(t) + 1;
        forest.trees.push_back(fit_with_classes(table, y, features, tp, target.classes, std::move(sample)));
    }
    return forest;
}

ProbMatrix WeightedForest::predict(const Table& table) const {
    if (trees.empty()) throw Error(ErrorKind::InvalidArgument, "empty forest");
    ProbMatrix out = predict_tree(trees.front(), table);
    for (std::size_t t = 1; t < trees.size(); ++t) {
        const auto p = predict_tree(trees[t], table);
        for (std::size_t i = 0; i < out.probs.size(); ++i) out.probs[i] += p.probs[i];
    }
    for (auto& v : out.probs) v /= static_cast<double>(trees.size());
    return out;
}

void to_json(json& j, const TreeParams& p) {
    j = json{{"max_depth", p.max_depth}, {"min_leaf", p.min_leaf}, {"criterion", "gini"}, {"seed", p.seed}};
    if (p.mtry > 0) j["mtry"] = p.mtry;
    if (!p.candidate_weights.empty()) j["candidate_weights"] = p.candidate_weights;
}

void from_json(const json& j, TreeParams& p) {
    TreeParams d;
    p.max_depth = j.value("max_depth", d.max_depth);
    p.min_leaf = j.value("min_leaf", d.min_leaf);
    p.mtry = j.value("mtry", d.mtry);
    p.seed = j.value("seed", d.seed);
    p.candidate_weights = j.value("candidate_weights", std::vector<double>{});
    if (j.contains("criterion") && j.at("criterion") != "gini")
        throw Error(ErrorKind::InvalidArgument, "only the gini criterion is supported");
    p.validate();
}

void to_json(json& j, const TreeModel& t) {
    j = json{{"kind", "tree"},
             {"classes", t.classes},
             {"features", t.features},
             {"params", t.params},
             {"root", node_to_json(t, 0)}};
}

void from_json(const json& j, TreeModel& t) {
    t = TreeModel{};
    t.classes = j.at("classes").get<std::vector<std::string>>();
    t.features = j.at("features").get<std::vector<FeatureSchema>>();
    t.params = j.value("params", json::object()).get<TreeParams>();
    node_from_json(j.at("root"), t);
}

}  // namespace admissible
