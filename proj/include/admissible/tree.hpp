#pragma once

#include "admissible/boosting.hpp"
#include "admissible/encoding.hpp"
#include "admissible/table.hpp"

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

struct TreeParams {
    int max_depth = 4;
    int min_leaf = 20;
    /// Split candidates drawn per node; 0 means every feature.
    int mtry = 0;
    /// Per-feature draw weights for `mtry` sampling, aligned with the feature
    /// list; empty means uniform. Zero-weight features are never drawn.
    std::vector<double> candidate_weights;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Binary CART classification tree (Gini criterion), flat node array with the
/// root at index 0.
struct TreeModel {
    struct Node {
        Split split;  // split.feature < 0 marks a leaf
        int left = -1;
        int right = -1;
        std::vector<double> probs;  // class distribution of training rows at the node
        std::size_t n = 0;

        bool is_leaf() const noexcept { return split.feature < 0; }
    };

    std::vector<std::string> classes;
    std::vector<FeatureSchema> features;
    std::vector<Node> nodes;
    TreeParams params;

    std::size_t depth() const;
    /// Names of features used by at least one split.
    std::set<std::string> used_features() const;
};

TreeModel fit_tree(const Table& table, const std::string& y, std::span<const std::string> features,
                   const TreeParams& params = {});

ProbMatrix predict_tree(const TreeModel& tree, const Table& table);

/// Bagged trees whose split candidates are drawn with the given per-feature
/// probabilities.
struct WeightedForest {
    std::vector<TreeModel> trees;

    ProbMatrix predict(const Table& table) const;
};

WeightedForest fit_weighted_forest(const Table& table, const std::string& y,
                                   std::span<const std::string> features,
                                   std::span<const double> selection_probs, int n_trees,
                                   TreeParams params);

void to_json(nlohmann::json& j, const TreeParams& p);
void from_json(const nlohmann::json& j, TreeParams& p);
void to_json(nlohmann::json& j, const TreeModel& t);
void from_json(const nlohmann::json& j, TreeModel& t);

}  // namespace admissible
