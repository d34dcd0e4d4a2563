#pragma once

#include "admissible/encoding.hpp"
#include "admissible/table.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

struct BoostParams {
    int n_rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
    double subsample = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Row-major n x k matrix of class probabilities.
struct ProbMatrix {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<double> probs;

    double at(std::size_t row, std::size_t cls) const { return probs[row * classes + cls]; }
    std::span<const double> row(std::size_t r) const {
        return {probs.data() + r * classes, classes};
    }
    /// Index of the most probable class per row (lowest index on ties).
    std::vector<int> argmax() const;
};

/// Gradient-boosting regression tree stored as a flat node array; node 0 is
/// the root.
struct RegressionTree {
    struct Node {
        Split split;  // split.feature < 0 marks a leaf
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    std::vector<Node> nodes;

    double predict(std::span<const EncodedColumn> x, std::size_t row) const;
};

/// Multiclass gradient-boosted classifier (logit link for two classes,
/// softmax otherwise).
class BoostedEnsemble {
public:
    const std::vector<std::string>& classes() const noexcept { return classes_; }
    const std::vector<FeatureSchema>& features() const noexcept { return features_; }
    const std::vector<double>& base_scores() const noexcept { return base_scores_; }
    /// trees()[round][t]: one tree per class when k > 2, a single class-1 tree when k = 2.
    const std::vector<std::vector<RegressionTree>>& trees() const noexcept { return trees_; }
    const std::map<std::string, double>& feature_gain() const noexcept { return feature_gain_; }
    const BoostParams& params() const noexcept { return params_; }
    /// Mean training log-loss (nats) after the base score and after each round.
    const std::vector<double>& training_loss() const noexcept { return training_loss_; }

    ProbMatrix predict_proba(const Table& table) const;
    ProbMatrix predict_encoded(std::span<const EncodedColumn> x, std::size_t n) const;

    friend BoostedEnsemble fit_boosted(const Table&, const std::string&,
                                       std::span<const std::string>, const BoostParams&);
    friend void to_json(nlohmann::json&, const BoostedEnsemble&);
    friend void from_json(const nlohmann::json&, BoostedEnsemble&);

private:
    std::vector<std::string> classes_;
    std::vector<FeatureSchema> features_;
    std::vector<double> base_scores_;
    std::vector<std::vector<RegressionTree>> trees_;
    std::map<std::string, double> feature_gain_;
    BoostParams params_;
    std::vector<double> training_loss_;
};

BoostedEnsemble fit_boosted(const Table& table, const std::string& target,
                            std::span<const std::string> features, const BoostParams& params);

/// Fits on the given row subset only.
BoostedEnsemble fit_boosted_rows(const Table& table, const std::string& target,
                                 std::span<const std::string> features, const BoostParams& params,
                                 std::span<const std::size_t> rows);

struct RelevanceScores {
    std::map<std::string, double> scores;  // in [0, 1], max exactly 1 unless degenerate
    bool degenerate = false;               // every feature gain was zero
};

/// Split-gain importance normalised by its maximum.
RelevanceScores relevance_scores(const BoostedEnsemble& model);

void to_json(nlohmann::json& j, const BoostParams& p);
void from_json(const nlohmann::json& j, BoostParams& p);
void to_json(nlohmann::json& j, const BoostedEnsemble& model);
void from_json(const nlohmann::json& j, BoostedEnsemble& model);

}  // namespace admissible
