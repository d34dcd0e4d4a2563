#pragma once

#include "admissible/infotheory.hpp"
#include "admissible/table.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

/// Result of an admissible-fairness (ALFA) test: alpha = I(Y; S | X_A).
struct AlfaReport {
    double alpha_bits = 0.0;
    double pvalue = 1.0;
    std::vector<std::string> admissible_used;
    std::vector<std::string> protected_used;
    int B = 0;
    bool marginal_only = false;  // no admissible features: alpha is plain I(Y; S)
};

/// Protected columns take the X slot of the CMI estimator and the
/// admissible features the conditioning slot; the bootstrap nulls resample Y
/// from the fitted P(Y | X_A).
AlfaReport alfa_test(const Table& table, const std::string& y,
                     const std::vector<std::string>& protected_attrs,
                     const std::vector<std::string>& admissible, const CmiConfig& cfg, int B,
                     std::uint64_t seed);

struct ModelPredictions {
    std::string name;
    std::vector<std::string> labels;  // one predicted label per table row
};

struct RankedModel {
    std::string name;
    double alpha_bits = 0.0;
    double pvalue = 1.0;
};

/// Ranks models by the ALFA statistic of their predictions, smallest
/// (least discriminatory) first; names break ties.
std::vector<RankedModel> rank_models_alfa(const std::vector<ModelPredictions>& predictions,
                                          const Table& table,
                                          const std::vector<std::string>& protected_attrs,
                                          const std::vector<std::string>& admissible,
                                          const CmiConfig& cfg, int B, std::uint64_t seed);

struct GroupRate {
    std::string label;
    double rate = 0.0;  // favorable / n
    std::size_t n = 0;
    double air = 1.0;  // rate / reference rate
    bool below_80 = false;
};

struct AirReport {
    std::string reference;
    std::vector<GroupRate> groups;
};

/// Favorable-outcome rate per group.
std::vector<GroupRate> group_rates(const Table& table, const std::string& y,
                                   const std::string& favorable, const std::string& group);

/// Adverse impact ratios against `reference`, by default the group with the
/// highest favorable rate (so every ratio is at most 1).
AirReport air(const Table& table, const std::string& y, const std::string& favorable,
              const std::string& group, const std::optional<std::string>& reference = std::nullopt);

struct CairStratum {
    std::string label;
    double weight = 0.0;  // empirical Pr(stratum)
    double air = 1.0;     // smallest group ratio within the stratum
    AirReport detail;
};

struct CairReport {
    double value = 0.0;
    std::vector<CairStratum> strata;
};

/// Stratum-weighted average of within-stratum adverse impact ratios.
CairReport cair(const Table& table, const std::string& y, const std::string& favorable,
                const std::string& group, const std::string& stratum);

void to_json(nlohmann::json& j, const AlfaReport& r);
void to_json(nlohmann::json& j, const RankedModel& r);
void to_json(nlohmann::json& j, const AirReport& r);
void to_json(nlohmann::json& j, const CairReport& r);

}  // namespace admissible
