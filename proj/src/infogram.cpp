#include "admissible/infogram.hpp"

#include "admissible/boosting.hpp"
#include "admissible/error.hpp"
#include "admissible/parallel.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>

namespace admissible {

using nlohmann::json;

void InfogramConfig::validate() const {
    if (!(threshold_x > 0.0 && threshold_x < 1.0) || !(threshold_y > 0.0 && threshold_y < 1.0))
        throw Error(ErrorKind::InvalidArgument, "infogram thresholds must lie in (0, 1)");
    if (top_k_prescreen < 1) throw Error(ErrorKind::InvalidArgument, "top_k_prescreen must be >= 1");
    cmi_cfg.validate();
}

namespace {

std::vector<std::string> resolve_features(const Table& table, const TaskSpec& spec) {
    if (!spec.features.empty()) return spec.features;
    std::vector<std::string> out;
    for (const auto& name : table.column_names()) {
        if (name == spec.target) continue;
        if (std::find(spec.protected_attrs.begin(), spec.protected_attrs.end(), name) !=
            spec.protected_attrs.end())
            continue;
        out.push_back(name);
    }
    return out;
}

struct Screened {
    RelevanceScores relevance;
    std::map<std::string, double> raw_gain;
    std::vector<std::string> survivors;  // descending relevance
};

Screened screen(const Table& table, const std::string& target,
                const std::vector<std::string>& features, const InfogramConfig& cfg) {
    const auto model = fit_boosted(table, target, features, cfg.cmi_cfg.learner_params);
    Screened out;
    out.relevance = relevance_scores(model);
    out.raw_gain = model.feature_gain();
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.raw_gain.at(features[a]) > out.raw_gain.at(features[b]);
    });
    const auto keep = std::min(order.size(), static_cast<std::size_t>(cfg.top_k_prescreen));
    for (std::size_t i = 0; i < keep; ++i) out.survivors.push_back(features[order[i]]);
    return out;
}

Infogram assemble(InfogramMode mode, const Screened& screened, const std::vector<double>& raw_info,
                  const InfogramConfig& cfg, std::vector<std::string> protected_attrs) {
    Infogram ig;
    ig.mode = mode;
    ig.config = cfg;
    ig.protected_attrs = std::move(protected_attrs);
    double max_info = 0.0;
    for (double v : raw_info) max_info = std::max(max_info, v);
    ig.degenerate = !(max_info > 0.0);
    for (std::size_t i = 0; i < screened.survivors.size(); ++i) {
        const auto& name = screened.survivors[i];
        InfogramPoint pt;
        pt.feature = name;
        pt.raw_relevance = screened.raw_gain.at(name);
        pt.relevance = screened.relevance.scores.at(name);
        pt.raw_net_info = raw_info[i];
        pt.net_info = ig.degenerate ? 0.0 : std::max(raw_info[i], 0.0) / max_info;
        pt.admissible = pt.relevance >= cfg.threshold_x && pt.net_info >= cfg.threshold_y;
        ig.points.push_back(std::move(pt));
    }
    return ig;
}

}  // namespace

Infogram core_infogram(const Table& table, const TaskSpec& spec, const InfogramConfig& cfg) {
    cfg.validate();
    TaskSpec resolved = spec;
    resolved.features = resolve_features(table, spec);
    resolved.validate(table);
    if (resolved.features.size() < 2)
        throw Error(ErrorKind::InvalidArgument, "core infogram needs at least two features");

    const auto screened = screen(table, resolved.target, resolved.features, cfg);
    const auto& survivors = screened.survivors;
    const auto p_full = fitted_class_probs(table, resolved.target, survivors, cfg.cmi_cfg);
    std::vector<double> raw(survivors.size(), 0.0);
    parallel_for(survivors.size(), [&](std::size_t j) {
        std::vector<std::string> rest;
        for (std::size_t k = 0; k < survivors.size(); ++k)
            if (k != j) rest.push_back(survivors[k]);
        const auto p_rest = fitted_class_probs(table, resolved.target, rest, cfg.cmi_cfg);
        raw[j] = mean_log2_ratio(p_full, p_rest, cfg.cmi_cfg.clip);
    });
    return assemble(InfogramMode::Core, screened, raw, cfg, {});
}

Infogram fair_infogram(const Table& table, const TaskSpec& spec, const InfogramConfig& cfg) {
    cfg.validate();
    if (spec.protected_attrs.empty())
        throw Error(ErrorKind::InvalidArgument,
                    "fairness infogram needs protected attributes; use the core infogram instead");
    TaskSpec resolved = spec;
    resolved.features = resolve_features(table, spec);
    resolved.validate(table);
    if (resolved.features.empty())
        throw Error(ErrorKind::InvalidArgument, "fairness infogram needs at least one feature");

    const auto screened = screen(table, resolved.target, resolved.features, cfg);
    const auto& survivors = screened.survivors;
    const auto& s = resolved.protected_attrs;
    const auto p_s = fitted_class_probs(table, resolved.target, s, cfg.cmi_cfg);
    std::vector<double> raw(survivors.size(), 0.0);
    parallel_for(survivors.size(), [&](std::size_t j) {
        std::vector<std::string> cols{survivors[j]};
        cols.insert(cols.end(), s.begin(), s.end());
        const auto p_xs = fitted_class_probs(table, resolved.target, cols, cfg.cmi_cfg);
        raw[j] = mean_log2_ratio(p_xs, p_s, cfg.cmi_cfg.clip);
    });
    return assemble(InfogramMode::Fair, screened, raw, cfg, s);
}

std::vector<std::string> select_admissible(const Infogram& ig) {
    std::vector<const InfogramPoint*> picked;
    for (const auto& pt : ig.points)
        if (pt.admissible) picked.push_back(&pt);
    std::sort(picked.begin(), picked.end(), [](const InfogramPoint* a, const InfogramPoint* b) {
        if (a->net_info != b->net_info) return a->net_info > b->net_info;
        if (a->relevance != b->relevance) return a->relevance > b->relevance;
        return a->feature < b->feature;
    });
    std::vector<std::string> out;
    for (const auto* pt : picked) out.push_back(pt->feature);
    return out;
}

Infogram with_thresholds(const Infogram& ig, double threshold_x, double threshold_y) {
    Infogram out = ig;
    out.config.threshold_x = threshold_x;
    out.config.threshold_y = threshold_y;
    out.config.validate();
    for (auto& pt : out.points) pt.admissible = pt.relevance >= threshold_x && pt.net_info >= threshold_y;
    return out;
}

void to_json(json& j, const InfogramConfig& c) {
    j = json{{"threshold_x", c.threshold_x},
             {"threshold_y", c.threshold_y},
             {"top_k_prescreen", c.top_k_prescreen},
             {"cmi", c.cmi_cfg}};
}

void from_json(const json& j, InfogramConfig& c) {
    InfogramConfig d;
    c.threshold_x = j.value("threshold_x", d.threshold_x);
    c.threshold_y = j.value("threshold_y", d.threshold_y);
    c.top_k_prescreen = j.value("top_k_prescreen", d.top_k_prescreen);
    c.cmi_cfg = j.contains("cmi") ? j.at("cmi").get<CmiConfig>() : d.cmi_cfg;
    c.validate();
}

void to_json(json& j, const Infogram& ig) {
    json points = json::array();
    for (const auto& pt : ig.points)
        points.push_back(json{{"feature", pt.feature},
                              {"relevance", pt.relevance},
                              {"net_info", pt.net_info},
                              {"raw_relevance", pt.raw_relevance},
                              {"raw_net_info_bits", pt.raw_net_info},
                              {"admissible", pt.admissible}});
    j = json{{"mode", ig.mode == InfogramMode::Core ? "core" : "fair"},
             {"config", ig.config},
             {"points", std::move(points)},
             {"degenerate", ig.degenerate}};
    if (ig.mode == InfogramMode::Fair) j["protected"] = ig.protected_attrs;
}

void from_json(const json& j, Infogram& ig) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode != "core" && mode != "fair") throw Error(ErrorKind::Parse, "unknown infogram mode '" + mode + "'");
    ig.mode = mode == "core" ? InfogramMode::Core : InfogramMode::Fair;
    ig.config = j.at("config").get<InfogramConfig>();
    ig.protected_attrs = j.value("protected", std::vector<std::string>{});
    ig.degenerate = j.value("degenerate", false);
    ig.points.clear();
    for (const auto& pj : j.at("points")) {
        InfogramPoint pt;
        pt.feature = pj.at("feature").get<std::string>();
        pt.relevance = pj.at("relevance").get<double>();
        pt.net_info = pj.at("net_info").get<double>();
        pt.raw_relevance = pj.value("raw_relevance", 0.0);
        pt.raw_net_info = pj.value("raw_net_info_bits", 0.0);
        pt.admissible = pj.at("admissible").get<bool>();
        ig.points.push_back(std::move(pt));
    }
}

}  // namespace admissible
