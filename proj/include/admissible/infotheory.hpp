#pragma once

#include "admissible/boosting.hpp"
#include "admissible/table.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

/// Estimator settings. Logarithms are always base 2 (results in bits).
struct CmiConfig {
    BoostParams learner_params;
    double clip = 1e-6;       // probabilities are clipped into [clip, 1 - clip]
    int cross_fit_folds = 0;  // 0 evaluates on the training rows

    void validate() const;
};

struct CmiEstimate {
    double value_bits = 0.0;
    std::optional<double> pvalue;
    std::vector<double> null_samples;  // bootstrap replicates, empty without a test
    CmiConfig config;
    std::size_t n_used = 0;
};

/// Plug-in estimate of I(Y; X | S) in bits: the sample mean of
/// log2 P(y_i | x_i, s_i) / P(y_i | s_i), both probabilities from boosted
/// classifiers. With no conditioning columns the denominator is the class
/// marginal and the result is plain mutual information.
CmiEstimate estimate_cmi(const Table& table, const std::string& y,
                         std::span<const std::string> x_cols, std::span<const std::string> s_cols,
                         const CmiConfig& cfg = {});

/// estimate_cmi plus a model-based bootstrap test of Y independent of X given S.
/// Null responses are drawn from the fitted P(Y | S); each replicate refits
/// both models. pvalue = (1 + #{null >= observed}) / (B + 1). Replicate b
/// uses seed + b, so the result is independent of thread count.
CmiEstimate cmi_pvalue(const Table& table, const std::string& y,
                       std::span<const std::string> x_cols, std::span<const std::string> s_cols,
                       const CmiConfig& cfg, int B, std::uint64_t seed);

/// Probability of each row's observed class under a model of Y on `cols`
/// (class frequencies when `cols` is empty). Out-of-fold when cross-fitting.
std::vector<double> fitted_class_probs(const Table& table, const std::string& y,
                                       std::span<const std::string> cols, const CmiConfig& cfg);

/// Bootstrap p-value formula shared by every test in the library.
double bootstrap_pvalue(double observed, std::span<const double> null_samples);

/// Clipped mean log2 ratio of the probabilities assigned to the observed classes.
double mean_log2_ratio(std::span<const double> p_full, std::span<const double> p_reduced,
                       double clip);

/// Finite joint pmf p(y, x, s) stored y-major.
class DiscreteJoint {
public:
    DiscreteJoint(std::array<std::size_t, 3> dims, std::vector<double> pmf);

    const std::array<std::size_t, 3>& dims() const noexcept { return dims_; }
    const std::vector<double>& pmf() const noexcept { return pmf_; }
    double operator()(std::size_t y, std::size_t x, std::size_t s) const {
        return pmf_[(y * dims_[1] + x) * dims_[2] + s];
    }

    /// Random joint with Dirichlet(1) cell masses.
    static DiscreteJoint random(std::array<std::size_t, 3> dims, std::mt19937_64& rng);

private:
    std::array<std::size_t, 3> dims_;
    std::vector<double> pmf_;
};

/// sum p(y,x,s) log2[p(y|x,s) / p(y|s)] by brute-force summation.
double exact_cmi(const DiscreteJoint& joint);
/// H(Y|S) - H(Y|S,X), each an expectation of per-stratum entropies.
double entropy_difference_cmi(const DiscreteJoint& joint);

void to_json(nlohmann::json& j, const CmiConfig& c);
void from_json(const nlohmann::json& j, CmiConfig& c);
void to_json(nlohmann::json& j, const CmiEstimate& e);

}  // namespace admissible
