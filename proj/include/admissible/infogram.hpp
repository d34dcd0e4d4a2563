#pragma once

#include "admissible/infotheory.hpp"
#include "admissible/table.hpp"

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

struct InfogramConfig {
    double threshold_x = 0.1;  // relevance cut-off (vertical slice of the L)
    double threshold_y = 0.1;  // net-information cut-off (horizontal slice)
    int top_k_prescreen = 50;
    CmiConfig cmi_cfg;

    void validate() const;
};

struct InfogramPoint {
    std::string feature;
    double relevance = 0.0;     // normalised split-gain importance
    double net_info = 0.0;      // normalised C_j (core) or F_j (fair)
    double raw_relevance = 0.0; // cumulative split gain
    double raw_net_info = 0.0;  // bits, unclamped
    bool admissible = false;
};

enum class InfogramMode { Core, Fair };

struct Infogram {
    InfogramMode mode = InfogramMode::Core;
    std::vector<InfogramPoint> points;
    InfogramConfig config;
    std::vector<std::string> protected_attrs;
    bool degenerate = false;  // no feature had positive raw net information
};

/// Relevance vs. net-predictive information I(Y; X_j | X_-j). Features
/// default to every column that is neither the target nor protected.
Infogram core_infogram(const Table& table, const TaskSpec& spec, const InfogramConfig& cfg = {});

/// Relevance vs. safety index I(Y; X_j | S) for protected attributes S.
Infogram fair_infogram(const Table& table, const TaskSpec& spec, const InfogramConfig& cfg = {});

/// Admissible features ordered by net_info, then relevance (both
/// descending), then name.
std::vector<std::string> select_admissible(const Infogram& ig);

/// Copy of `ig` with admissibility recomputed for new thresholds.
Infogram with_thresholds(const Infogram& ig, double threshold_x, double threshold_y);

void to_json(nlohmann::json& j, const InfogramConfig& c);
void from_json(const nlohmann::json& j, InfogramConfig& c);
void to_json(nlohmann::json& j, const Infogram& ig);
void from_json(const nlohmann::json& j, Infogram& ig);

}  // namespace admissible
