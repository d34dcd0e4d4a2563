#pragma once

#include "admissible/boosting.hpp"
#include "admissible/encoding.hpp"
#include "admissible/infotheory.hpp"
#include "admissible/table.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

/// Binary logistic model. Categorical inputs expand to treatment-coded
/// dummy terms named "feature=level" (first level is the baseline); numeric
/// inputs give one term named after the feature.
struct GlmModel {
    std::vector<std::string> classes;  // {negative, positive}
    std::vector<FeatureSchema> features;
    std::vector<std::string> terms;
    double intercept = 0.0;
    std::vector<double> coefficients;     // aligned with terms
    double lambda = 0.0;
    std::vector<double> penalty_weights;  // aligned with terms; may hold +inf; empty when unpenalized
    std::vector<double> std_errors;       // unpenalized fits only
    std::vector<double> safety_bits;      // per input feature, FINE lasso only
    double loglik = 0.0;
    int iterations = 0;

    const std::string& positive_class() const { return classes.at(1); }
    /// Coefficient of a term; 0 when the term is absent.
    double coefficient(const std::string& term) const;
    /// 2k - 2 loglik with k = number of terms + 1.
    double aic() const;
};

/// Unpenalized maximum likelihood by IRLS. `positive_label` defaults to the
/// second class in category order.
GlmModel fit_logistic(const Table& table, const std::string& y, std::span<const std::string> features,
                      const std::optional<std::string>& positive_label = std::nullopt);

/// Backward elimination on AIC: drop whichever input feature lowers AIC the
/// most, until no drop helps.
GlmModel aic_backward_select(const Table& table, const std::string& y,
                             std::span<const std::string> features,
                             const std::optional<std::string>& positive_label = std::nullopt);

/// Logistic lasso minimising NLL + lambda * sum_j w_j |beta_j| by proximal
/// Newton steps with cyclic coordinate descent. `weights` is per input
/// feature (shared by its dummy terms); an infinite weight pins the
/// coefficient at 0 whenever lambda > 0. lambda = 0 disables the penalty.
GlmModel fit_weighted_lasso(const Table& table, const std::string& y,
                            std::span<const std::string> features, std::span<const double> weights,
                            double lambda, const std::optional<std::string>& positive_label = std::nullopt);

/// Safety indices F_j = I(Y; X_j | S) in bits, sharing one fit of P(Y | S).
std::vector<double> safety_indices(const Table& table, const std::string& y,
                                   std::span<const std::string> features,
                                   std::span<const std::string> protected_attrs, const CmiConfig& cfg);

inline constexpr double kSafetyFloor = 1e-4;

/// Lasso with weights 1/F_j; features with F_j <= 1e-4 get infinite weight.
GlmModel fit_fine_lasso(const Table& table, const std::string& y, std::span<const std::string> features,
                        std::span<const std::string> protected_attrs, double lambda, const CmiConfig& cfg,
                        const std::optional<std::string>& positive_label = std::nullopt);

/// Columns ordered as model.classes.
ProbMatrix predict_glm(const GlmModel& model, const Table& table);

/// Negative log-likelihood (nats, summed over rows) at the model's coefficients.
double negative_log_likelihood(const GlmModel& model, const Table& table, const std::string& y);

/// Gradient of the summed NLL: intercept first, then one entry per term.
std::vector<double> nll_gradient(const GlmModel& model, const Table& table, const std::string& y);

/// Largest violation of the lasso optimality conditions at the model's
/// coefficients (0 at an exact optimum).
double kkt_violation(const GlmModel& model, const Table& table, const std::string& y);

/// Selection probabilities F_j / sum F for a weighted forest.
std::map<std::string, double> forest_selection_probs(const std::map<std::string, double>& f_values);

void to_json(nlohmann::json& j, const GlmModel& m);
void from_json(const nlohmann::json& j, GlmModel& m);

}  // namespace admissible
