#include "admissible/fairness.hpp"

#include "admissible/error.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

namespace admissible {

using nlohmann::json;

namespace {

constexpr double kFourFifths = 0.80;

void check_alfa_roles(const Table& table, const std::string& y,
                      const std::vector<std::string>& protected_attrs,
                      const std::vector<std::string>& admissible) {
    if (protected_attrs.empty())
        throw Error(ErrorKind::InvalidArgument, "ALFA test needs at least one protected attribute");
    table.column(y);
    std::set<std::string> prot(protected_attrs.begin(), protected_attrs.end());
    if (prot.count(y)) throw Error(ErrorKind::Schema, "response '" + y + "' listed as protected");
    for (const auto& a : admissible) {
        if (a == y) throw Error(ErrorKind::Schema, "response '" + y + "' listed as admissible");
        if (prot.count(a))
            throw Error(ErrorKind::Schema, "column '" + a + "' is both protected and admissible");
    }
}

}  // namespace

AlfaReport alfa_test(const Table& table, const std::string& y,
                     const std::vector<std::string>& protected_attrs,
                     const std::vector<std::string>& admissible, const CmiConfig& cfg, int B,
                     std::uint64_t seed) {
    check_alfa_roles(table, y, protected_attrs, admissible);
    const auto est = cmi_pvalue(table, y, protected_attrs, admissible, cfg, B, seed);
    AlfaReport out;
    out.alpha_bits = est.value_bits;
    out.pvalue = *est.pvalue;
    out.admissible_used = admissible;
    out.protected_used = protected_attrs;
    out.B = B;
    out.marginal_only = admissible.empty();
    return out;
}

std::vector<RankedModel> rank_models_alfa(const std::vector<ModelPredictions>& predictions,
                                          const Table& table,
                                          const std::vector<std::string>& protected_attrs,
                                          const std::vector<std::string>& admissible,
                                          const CmiConfig& cfg, int B, std::uint64_t seed) {
    std::string yhat = "__prediction";
    while (table.has(yhat)) yhat += "_";
    std::vector<RankedModel> out;
    for (const auto& model : predictions) {
        if (model.labels.size() != table.n_rows())
            throw Error(ErrorKind::InvalidArgument,
                        "model '" + model.name + "' has " + std::to_string(model.labels.size()) +
                            " predictions for " + std::to_string(table.n_rows()) + " rows");
        const auto augmented = table.with_column(Column::from_labels(yhat, model.labels));
        check_alfa_roles(augmented, yhat, protected_attrs, admissible);
        const auto est = cmi_pvalue(augmented, yhat, protected_attrs, admissible, cfg, B, seed);
        out.push_back({model.name, est.value_bits, *est.pvalue});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedModel& a, const RankedModel& b) {
        if (a.alpha_bits != b.alpha_bits) return a.alpha_bits < b.alpha_bits;
        return a.name < b.name;
    });
    return out;
}

std::vector<GroupRate> group_rates(const Table& table, const std::string& y,
                                   const std::string& favorable, const std::string& group) {
    const auto& ycol = table.column(y);
    const auto& gcol = table.column(group);
    if (!gcol.is_categorical())
        throw Error(ErrorKind::Schema, "group column '" + group + "' must be categorical");
    if (!ycol.is_categorical())
        throw Error(ErrorKind::Schema, "outcome column '" + y + "' must be categorical");
    const auto fav = ycol.code_of(favorable);
    if (!fav)
        throw Error(ErrorKind::Schema, "'" + favorable + "' is not a level of '" + y + "'");
    std::vector<double> hits(gcol.categories().size(), 0.0);
    std::vector<std::size_t> counts(gcol.categories().size(), 0);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        if (gcol.is_missing(i) || ycol.is_missing(i)) continue;
        const auto g = static_cast<std::size_t>(gcol.code(i));
        ++counts[g];
        if (ycol.code(i) == *fav) hits[g] += 1.0;
    }
    std::vector<GroupRate> out;
    for (std::size_t g = 0; g < counts.size(); ++g) {
        if (counts[g] == 0) continue;
        out.push_back({gcol.categories()[g], hits[g] / static_cast<double>(counts[g]), counts[g]});
    }
    return out;
}

AirReport air(const Table& table, const std::string& y, const std::string& favorable,
              const std::string& group, const std::optional<std::string>& reference) {
    AirReport out;
    out.groups = group_rates(table, y, favorable, group);
    if (out.groups.empty()) throw Error(ErrorKind::Undefined, "no rows with an observed group");
    const GroupRate* ref = nullptr;
    if (reference) {
        for (const auto& g : out.groups)
            if (g.label == *reference) ref = &g;
        if (!ref)
            throw Error(ErrorKind::Schema, "reference group '" + *reference + "' has no rows");
    } else {
        ref = &*std::max_element(out.groups.begin(), out.groups.end(),
                                 [](const GroupRate& a, const GroupRate& b) { return a.rate < b.rate; });
    }
    if (!(ref->rate > 0.0))
        throw Error(ErrorKind::Undefined,
                    "reference group '" + ref->label + "' has zero favorable rate; AIR undefined");
    out.reference = ref->label;
    const double ref_rate = ref->rate;
    for (auto& g : out.groups) {
        g.air = g.rate / ref_rate;
        g.below_80 = g.air < kFourFifths;
    }
    return out;
}

CairReport cair(const Table& table, const std::string& y, const std::string& favorable,
                const std::string& group, const std::string& stratum) {
    const auto& scol = table.column(stratum);
    if (!scol.is_categorical())
        throw Error(ErrorKind::Schema, "stratum column '" + stratum + "' must be categorical");
    std::set<std::string> all_groups;
    for (const auto& g : group_rates(table, y, favorable, group)) all_groups.insert(g.label);

    CairReport out;
    std::size_t total = 0;
    for (std::size_t i = 0; i < table.n_rows(); ++i) total += scol.is_missing(i) ? 0 : 1;
    for (std::size_t level = 0; level < scol.categories().size(); ++level) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < table.n_rows(); ++i)
            if (!scol.is_missing(i) && scol.code(i) == static_cast<std::int32_t>(level)) rows.push_back(i);
        if (rows.empty()) continue;
        const auto& label = scol.categories()[level];
        const auto sub = table.take(rows);
        auto detail = air(sub, y, favorable, group);
        if (detail.groups.size() != all_groups.size())
            throw Error(ErrorKind::Undefined,
                        "stratum '" + label + "' does not contain every group of '" + group + "'");
        CairStratum st;
        st.label = label;
        st.weight = static_cast<double>(rows.size()) / static_cast<double>(total);
        st.air = std::min_element(detail.groups.begin(), detail.groups.end(),
                                  [](const GroupRate& a, const GroupRate& b) { return a.air < b.air; })
                     ->air;
        st.detail = std::move(detail);
        out.value += st.weight * st.air;
        out.strata.push_back(std::move(st));
    }
    return out;
}

void to_json(json& j, const AlfaReport& r) {
    j = json{{"alpha_bits", r.alpha_bits},     {"pvalue", r.pvalue},
             {"B", r.B},                       {"admissible_used", r.admissible_used},
             {"protected_used", r.protected_used}};
    if (r.marginal_only) j["marginal_only"] = true;
}

void to_json(json& j, const RankedModel& r) {
    j = json{{"name", r.name}, {"alpha_bits", r.alpha_bits}, {"pvalue", r.pvalue}};
}

void to_json(json& j, const AirReport& r) {
    json groups = json::array();
    for (const auto& g : r.groups)
        groups.push_back(json{{"label", g.label},
                              {"rate", g.rate},
                              {"n", g.n},
                              {"air", g.air},
                              {"below_80", g.below_80}});
    j = json{{"reference", r.reference}, {"groups", std::move(groups)}};
}

void to_json(json& j, const CairReport& r) {
    json strata = json::array();
    for (const auto& s : r.strata)
        strata.push_back(json{{"label", s.label}, {"weight", s.weight}, {"air", s.air}, {"detail", s.detail}});
    j = json{{"value", r.value}, {"strata", std::move(strata)}};
}

}  // namespace admissible
