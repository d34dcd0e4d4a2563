#include "admissible/boosting.hpp"

#include "admissible/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

namespace admissible {

using nlohmann::json;

namespace {

// Splits must improve the squared-error criterion by more than this.
constexpr double kMinGain = 1e-12;
// Newton leaf steps are capped in magnitude before shrinkage.
constexpr double kMaxLeafStep = 4.0;
constexpr int kMaxBacktracks = 30;

struct Accum {
    double sum = 0.0;
    double count = 0.0;
    void add(double v) {
        sum += v;
        count += 1.0;
    }
};

struct Candidate {
    double gain = kMinGain;
    Split split;
    bool found = false;
};

double split_gain(const Accum& left, const Accum& right, const Accum& total) {
    return left.sum * left.sum / left.count + right.sum * right.sum / right.count -
           total.sum * total.sum / total.count;
}

/// Level-wise builder for one regression tree fitted to residuals.
class TreeBuilder {
public:
    TreeBuilder(std::span<const EncodedColumn> x, const std::vector<std::vector<std::size_t>>& sorted,
                const std::vector<std::vector<std::size_t>>& missing_rows, int max_depth,
                int min_leaf)
        : x_(x), sorted_(sorted), missing_rows_(missing_rows), max_depth_(max_depth),
          min_leaf_(static_cast<double>(min_leaf)) {}

    /// `node_of[i]` must be 0 for rows in the sample and -1 otherwise; on
    /// return it holds each sampled row's leaf id.
    RegressionTree build(std::span<const double> residual, std::vector<int>& node_of,
                         std::vector<double>& gain_by_feature) const {
        RegressionTree tree;
        tree.nodes.emplace_back();
        std::vector<Accum> stats(1);
        for (std::size_t i = 0; i < node_of.size(); ++i)
            if (node_of[i] == 0) stats[0].add(residual[i]);

        std::vector<int> frontier{0};
        for (int depth = 0; depth < max_depth_ && !frontier.empty(); ++depth) {
            std::vector<int> slot_of(tree.nodes.size(), -1);
            std::vector<int> active;
            for (int node : frontier) {
                if (stats[static_cast<std::size_t>(node)].count < 2.0 * min_leaf_) continue;
                slot_of[static_cast<std::size_t>(node)] = static_cast<int>(active.size());
                active.push_back(node);
            }
            if (active.empty()) break;

            std::vector<Candidate> best(active.size());
            for (std::size_t f = 0; f < x_.size(); ++f)
                search_feature(f, residual, node_of, slot_of, active, stats, best);

            std::vector<int> next;
            std::vector<int> split_slot(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < active.size(); ++s) {
                if (!best[s].found) continue;
                const int node = active[s];
                const int left = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                auto& parent = tree.nodes[static_cast<std::size_t>(node)];
                parent.split = best[s].split;
                parent.left = left;
                parent.right = left + 1;
                gain_by_feature[static_cast<std::size_t>(best[s].split.feature)] += best[s].gain;
                split_slot[static_cast<std::size_t>(node)] = static_cast<int>(s);
                next.push_back(left);
                next.push_back(left + 1);
            }
            if (next.empty()) break;
            stats.resize(tree.nodes.size());
            for (std::size_t i = 0; i < node_of.size(); ++i) {
                const int node = node_of[i];
                if (node < 0 || static_cast<std::size_t>(node) >= split_slot.size() ||
                    split_slot[static_cast<std::size_t>(node)] < 0)
                    continue;
                const auto& parent = tree.nodes[static_cast<std::size_t>(node)];
                const auto& col = x_[static_cast<std::size_t>(parent.split.feature)];
                const int child = parent.split.goes_left(col, i) ? parent.left : parent.right;
                node_of[i] = child;
                stats[static_cast<std::size_t>(child)].add(residual[i]);
            }
            frontier = std::move(next);
        }
        return tree;
    }

private:
    void consider(std::size_t slot, const Accum& nonmissing_left, const Accum& nonmissing_total,
                  const Accum& missing, const Accum& total, Split proto,
                  std::vector<Candidate>& best) const {
        const Accum nm_right{nonmissing_total.sum - nonmissing_left.sum,
                             nonmissing_total.count - nonmissing_left.count};
        auto try_option = [&](bool missing_left) {
            Accum left = nonmissing_left, right = nm_right;
            if (missing_left) {
                left.sum += missing.sum;
                left.count += missing.count;
            } else {
                right.sum += missing.sum;
                right.count += missing.count;
            }
            if (left.count < min_leaf_ || right.count < min_leaf_) return;
            const double gain = split_gain(left, right, total);
            if (gain > best[slot].gain) {
                best[slot].gain = gain;
                best[slot].split = proto;
                best[slot].split.missing_left = missing_left;
                best[slot].found = true;
            }
        };
        if (missing.count > 0.0) {
            try_option(true);
            try_option(false);
        } else {
            try_option(nonmissing_left.count >= nm_right.count);
        }
    }

    void search_feature(std::size_t f, std::span<const double> residual,
                        const std::vector<int>& node_of, const std::vector<int>& slot_of,
                        const std::vector<int>& active, const std::vector<Accum>& stats,
                        std::vector<Candidate>& best) const {
        const auto& col = x_[f];
        const std::size_t n_slots = active.size();
        auto slot_for = [&](std::size_t row) -> int {
            const int node = node_of[row];
            if (node < 0 || static_cast<std::size_t>(node) >= slot_of.size()) return -1;
            return slot_of[static_cast<std::size_t>(node)];
        };

        std::vector<Accum> missing(n_slots);
        for (auto row : missing_rows_[f]) {
            const int s = slot_for(row);
            if (s >= 0) missing[static_cast<std::size_t>(s)].add(residual[row]);
        }
        std::vector<Accum> nonmissing(n_slots);
        for (std::size_t s = 0; s < n_slots; ++s) {
            const auto& t = stats[static_cast<std::size_t>(active[s])];
            nonmissing[s] = {t.sum - missing[s].sum, t.count - missing[s].count};
        }

        if (!col.categorical) {
            std::vector<Accum> cum(n_slots);
            std::vector<double> last(n_slots, 0.0);
            std::vector<std::uint8_t> seen(n_slots, 0);
            for (auto row : sorted_[f]) {
                const int si = slot_for(row);
                if (si < 0) continue;
                const auto s = static_cast<std::size_t>(si);
                const double v = col.values[row];
                if (seen[s] && v > last[s]) {
                    double threshold = last[s] + (v - last[s]) * 0.5;
                    if (threshold >= v) threshold = last[s];
                    Split proto;
                    proto.feature = static_cast<int>(f);
                    proto.threshold = threshold;
                    consider(s, cum[s], nonmissing[s], missing[s],
                             stats[static_cast<std::size_t>(active[s])], proto, best);
                }
                cum[s].add(residual[row]);
                last[s] = v;
                seen[s] = 1;
            }
            return;
        }

        const std::size_t levels = col.n_levels;
        std::vector<Accum> by_level(n_slots * levels);
        for (std::size_t row = 0; row < col.codes.size(); ++row) {
            if (col.missing[row]) continue;
            const int s = slot_for(row);
            if (s < 0) continue;
            by_level[static_cast<std::size_t>(s) * levels + static_cast<std::size_t>(col.codes[row])]
                .add(residual[row]);
        }
        std::vector<std::size_t> present;
        for (std::size_t s = 0; s < n_slots; ++s) {
            const Accum* lv = &by_level[s * levels];
            present.clear();
            for (std::size_t c = 0; c < levels; ++c)
                if (lv[c].count > 0.0) present.push_back(c);
            if (present.size() < 2) continue;
            std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
                return lv[a].sum / lv[a].count < lv[b].sum / lv[b].count;
            });
            Split proto;
            proto.feature = static_cast<int>(f);
            proto.level_side.assign(levels, 2);
            for (auto c : present) proto.level_side[c] = 0;
            Accum cum;
            for (std::size_t t = 0; t + 1 < present.size(); ++t) {
                const auto c = present[t];
                cum.sum += lv[c].sum;
                cum.count += lv[c].count;
                proto.level_side[c] = 1;
                consider(s, cum, nonmissing[s], missing[s],
                         stats[static_cast<std::size_t>(active[s])], proto, best);
            }
        }
    }

    std::span<const EncodedColumn> x_;
    const std::vector<std::vector<std::size_t>>& sorted_;
    const std::vector<std::vector<std::size_t>>& missing_rows_;
    int max_depth_;
    double min_leaf_;
};

void softmax_inplace(std::span<double> scores) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (auto& s : scores) {
        s = std::exp(s - mx);
        total += s;
    }
    for (auto& s : scores) s /= total;
}

double mean_log_loss(const std::vector<double>& scores, std::size_t k, const std::vector<int>& y) {
    const std::size_t n = y.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &scores[i * k];
        const double mx = *std::max_element(row, row + k);
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) total += std::exp(row[c] - mx);
        loss += std::log(total) + mx - row[static_cast<std::size_t>(y[i])];
    }
    return loss / static_cast<double>(n);
}

}  // namespace

void BoostParams::validate() const {
    if (n_rounds < 0) throw Error(ErrorKind::InvalidArgument, "n_rounds must be non-negative");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        throw Error(ErrorKind::InvalidArgument, "learning_rate must lie in (0, 1]");
    if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "max_depth must be at least 1");
    if (min_leaf < 1) throw Error(ErrorKind::InvalidArgument, "min_leaf must be at least 1");
    if (!(subsample > 0.0 && subsample <= 1.0))
        throw Error(ErrorKind::InvalidArgument, "subsample must lie in (0, 1]");
}

std::vector<int> ProbMatrix::argmax() const {
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        auto p = row(r);
        out[r] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }
    return out;
}

double RegressionTree::predict(std::span<const EncodedColumn> x, std::size_t row) const {
    std::size_t node = 0;
    for (;;) {
        const auto& nd = nodes[node];
        if (nd.split.feature < 0) return nd.value;
        node = static_cast<std::size_t>(
            nd.split.goes_left(x[static_cast<std::size_t>(nd.split.feature)], row) ? nd.left
                                                                                   : nd.right);
    }
}

BoostedEnsemble fit_boosted(const Table& table, const std::string& target,
                            std::span<const std::string> features, const BoostParams& params) {
    params.validate();
    if (features.empty()) throw Error(ErrorKind::InvalidArgument, "at least one feature is required");
    for (const auto& f : features)
        if (f == target)
            throw Error(ErrorKind::Schema, "target '" + target + "' cannot also be a feature");

    BoostedEnsemble model;
    model.params_ = params;
    model.features_ = feature_schema(table, features);
    const auto enc_y = encode_target(table, target);
    model.classes_ = enc_y.classes;
    const std::size_t n = table.n_rows();
    const std::size_t k = model.classes_.size();
    if (n < 2 * static_cast<std::size_t>(params.min_leaf))
        throw Error(ErrorKind::InvalidArgument,
                    "need at least 2*min_leaf rows (" + std::to_string(2 * params.min_leaf) +
                        "), got " + std::to_string(n));
    const auto x = encode_features(table, model.features_);
    const auto& y = enc_y.y;

    std::vector<std::vector<std::size_t>> sorted(x.size()), missing_rows(x.size());
    for (std::size_t f = 0; f < x.size(); ++f) {
        for (std::size_t i = 0; i < n; ++i)
            if (x[f].missing[i]) missing_rows[f].push_back(i);
        if (x[f].categorical) continue;
        auto& order = sorted[f];
        for (std::size_t i = 0; i < n; ++i)
            if (!x[f].missing[i]) order.push_back(i);
        const auto& v = x[f].values;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    }

    std::vector<double> counts(k, 0.0);
    for (int c : y) counts[static_cast<std::size_t>(c)] += 1.0;
    model.base_scores_.assign(k, 0.0);
    if (k == 2) {
        model.base_scores_[1] = std::log(counts[1] / counts[0]);
    } else {
        for (std::size_t c = 0; c < k; ++c)
            model.base_scores_[c] = std::log(counts[c] / static_cast<double>(n));
    }

    std::vector<double> scores(n * k);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(model.base_scores_.begin(), model.base_scores_.end(), scores.begin() + i * k);
    double loss = mean_log_loss(scores, k, y);
    model.training_loss_.push_back(loss);

    std::vector<double> gain_by_feature(x.size(), 0.0);
    const TreeBuilder builder(x, sorted, missing_rows, params.max_depth, params.min_leaf);
    const std::size_t n_trees = k == 2 ? 1 : k;
    const double multiclass_factor =
        k == 2 ? 1.0 : static_cast<double>(k - 1) / static_cast<double>(k);

    std::mt19937_64 rng(params.seed);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    const auto sample_size = std::max<std::size_t>(
        2 * static_cast<std::size_t>(params.min_leaf),
        static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n))));

    std::vector<double> probs(n * k), residual(n), hessian(n), delta(n * k);
    std::vector<int> node_of(n);
    for (int round = 0; round < params.n_rounds; ++round) {
        std::vector<std::uint8_t> in_sample(n, 1);
        if (sample_size < n) {
            std::fill(in_sample.begin(), in_sample.end(), 0);
            for (std::size_t i = 0; i < sample_size; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(perm[i], perm[pick(rng)]);
                in_sample[perm[i]] = 1;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(scores.begin() + i * k, scores.begin() + (i + 1) * k, probs.begin() + i * k);
            softmax_inplace(std::span<double>(probs.data() + i * k, k));
        }

        std::vector<RegressionTree> group;
        std::vector<double> round_gain(x.size(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        for (std::size_t t = 0; t < n_trees; ++t) {
            const std::size_t cls = k == 2 ? 1 : t;
            for (std::size_t i = 0; i < n; ++i) {
                const double p = probs[i * k + cls];
                residual[i] = (y[i] == static_cast<int>(cls) ? 1.0 : 0.0) - p;
                hessian[i] = p * (1.0 - p);
                node_of[i] = in_sample[i] ? 0 : -1;
            }
            auto tree = builder.build(residual, node_of, round_gain);
            std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (node_of[i] < 0) continue;
                num[static_cast<std::size_t>(node_of[i])] += residual[i];
                den[static_cast<std::size_t>(node_of[i])] += hessian[i];
            }
            for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
                if (tree.nodes[nd].split.feature >= 0) continue;
                double step = multiclass_factor * num[nd] / std::max(den[nd], 1e-12);
                step = std::clamp(step, -kMaxLeafStep, kMaxLeafStep);
                tree.nodes[nd].value = params.learning_rate * step;
            }
            for (std::size_t i = 0; i < n; ++i) delta[i * k + cls] = tree.predict(x, i);
            group.push_back(std::move(tree));
        }

        // Backtrack the round's step until the training loss does not rise.
        double scale = 1.0;
        std::vector<double> trial(n * k);
        double trial_loss = loss;
        bool accepted = false;
        for (int attempt = 0; attempt <= kMaxBacktracks; ++attempt) {
            for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = scores[j] + scale * delta[j];
            trial_loss = mean_log_loss(trial, k, y);
            if (trial_loss <= loss) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            scale = 0.0;
            trial = scores;
            trial_loss = loss;
        }
        if (scale != 1.0) {
            for (auto& tree : group)
                for (auto& nd : tree.nodes) nd.value *= scale;
        }
        if (scale > 0.0)
            for (std::size_t f = 0; f < x.size(); ++f) gain_by_feature[f] += round_gain[f];
        scores.swap(trial);
        loss = trial_loss;
        model.training_loss_.push_back(loss);
        model.trees_.push_back(std::move(group));
    }

    for (std::size_t f = 0; f < x.size(); ++f)
        model.feature_gain_[model.features_[f].name] = gain_by_feature[f];
    return model;
}

BoostedEnsemble fit_boosted_rows(const Table& table, const std::string& target,
                                 std::span<const std::string> features, const BoostParams& params,
                                 std::span<const std::size_t> rows) {
    return fit_boosted(table.take(rows), target, features, params);
}

ProbMatrix BoostedEnsemble::predict_encoded(std::span<const EncodedColumn> x, std::size_t n) const {
    const std::size_t k = classes_.size();
    ProbMatrix out;
    out.rows = n;
    out.classes = k;
    out.probs.resize(n * k);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(base_scores_.begin(), base_scores_.end(), out.probs.begin() + i * k);
    for (const auto& group : trees_) {
        for (std::size_t t = 0; t < group.size(); ++t) {
            const std::size_t cls = k == 2 ? 1 : t;
            for (std::size_t i = 0; i < n; ++i) out.probs[i * k + cls] += group[t].predict(x, i);
        }
    }
    for (std::size_t i = 0; i < n; ++i) softmax_inplace(std::span<double>(out.probs.data() + i * k, k));
    return out;
}

ProbMatrix BoostedEnsemble::predict_proba(const Table& table) const {
    const auto x = encode_features(table, features_);
    return predict_encoded(x, table.n_rows());
}

RelevanceScores relevance_scores(const BoostedEnsemble& model) {
    RelevanceScores out;
    double max_gain = 0.0;
    for (const auto& [name, gain] : model.feature_gain()) max_gain = std::max(max_gain, gain);
    out.degenerate = !(max_gain > 0.0);
    for (const auto& [name, gain] : model.feature_gain())
        out.scores[name] = out.degenerate ? 0.0 : gain / max_gain;
    return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const BoostParams& p) {
    j = json{{"n_rounds", p.n_rounds},   {"learning_rate", p.learning_rate},
             {"max_depth", p.max_depth}, {"min_leaf", p.min_leaf},
             {"subsample", p.subsample}, {"seed", p.seed}};
}

void from_json(const json& j, BoostParams& p) {
    BoostParams d;
    p.n_rounds = j.value("n_rounds", d.n_rounds);
    p.learning_rate = j.value("learning_rate", d.learning_rate);
    p.max_depth = j.value("max_depth", d.max_depth);
    p.min_leaf = j.value("min_leaf", d.min_leaf);
    p.subsample = j.value("subsample", d.subsample);
    p.seed = j.value("seed", d.seed);
    p.validate();
}

void to_json(json& j, const BoostedEnsemble& model) {
    json trees = json::array();
    for (const auto& group : model.trees_) {
        json g = json::array();
        for (const auto& tree : group) {
            json nodes = json::array();
            for (const auto& nd : tree.nodes) {
                if (nd.split.feature < 0) {
                    nodes.push_back(json{{"value", nd.value}});
                } else {
                    auto s = split_to_json(nd.split, model.features_);
                    s["left"] = nd.left;
                    s["right"] = nd.right;
                    nodes.push_back(std::move(s));
                }
            }
            g.push_back(std::move(nodes));
        }
        trees.push_back(std::move(g));
    }
    j = json{{"classes", model.classes_},
             {"base_scores", model.base_scores_},
             {"params", model.params_},
             {"features", model.features_},
             {"trees", std::move(trees)},
             {"feature_gain", model.feature_gain_}};
}

void from_json(const json& j, BoostedEnsemble& model) {
    model.classes_ = j.at("classes").get<std::vector<std::string>>();
    model.base_scores_ = j.at("base_scores").get<std::vector<double>>();
    if (model.classes_.size() < 2 || model.base_scores_.size() != model.classes_.size())
        throw Error(ErrorKind::Parse, "ensemble JSON: classes/base_scores mismatch");
    model.params_ = j.at("params").get<BoostParams>();
    model.features_ = j.at("features").get<std::vector<FeatureSchema>>();
    model.feature_gain_ = j.value("feature_gain", std::map<std::string, double>{});
    model.trees_.clear();
    const std::size_t per_round = model.classes_.size() == 2 ? 1 : model.classes_.size();
    for (const auto& g : j.at("trees")) {
        if (g.size() != per_round) throw Error(ErrorKind::Parse, "ensemble JSON: wrong trees per round");
        std::vector<RegressionTree> group;
        for (const auto& nodes : g) {
            RegressionTree tree;
            for (const auto& nj : nodes) {
                RegressionTree::Node nd;
                if (nj.contains("value")) {
                    nd.value = nj.at("value").get<double>();
                } else {
                    nd.split = split_from_json(nj, model.features_);
                    nd.left = nj.at("left").get<int>();
                    nd.right = nj.at("right").get<int>();
                }
                tree.nodes.push_back(std::move(nd));
            }
            const auto size = static_cast<int>(tree.nodes.size());
            for (const auto& nd : tree.nodes)
                if (nd.split.feature >= 0 && (nd.left <= 0 || nd.left >= size || nd.right <= 0 ||
                                              nd.right >= size))
                    throw Error(ErrorKind::Parse, "ensemble JSON: child index out of range");
            if (tree.nodes.empty()) throw Error(ErrorKind::Parse, "ensemble JSON: empty tree");
            group.push_back(std::move(tree));
        }
        model.trees_.push_back(std::move(group));
    }
}

}  // namespace admissible
