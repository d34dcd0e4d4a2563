#include "admissible/infotheory.hpp"

#include "admissible/error.hpp"
#include "admissible/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

namespace admissible {

using nlohmann::json;

void CmiConfig::validate() const {
    learner_params.validate();
    if (!(clip > 0.0 && clip < 0.5)) throw Error(ErrorKind::InvalidArgument, "clip must lie in (0, 0.5)");
    if (cross_fit_folds < 0 || cross_fit_folds == 1)
        throw Error(ErrorKind::InvalidArgument, "cross_fit_folds must be 0 or at least 2");
}

double mean_log2_ratio(std::span<const double> p_full, std::span<const double> p_reduced,
                       double clip) {
    if (p_full.size() != p_reduced.size() || p_full.empty())
        throw Error(ErrorKind::InvalidArgument, "probability vectors must be equal-length and non-empty");
    double total = 0.0;
    for (std::size_t i = 0; i < p_full.size(); ++i) {
        const double a = std::clamp(p_full[i], clip, 1.0 - clip);
        const double b = std::clamp(p_reduced[i], clip, 1.0 - clip);
        total += std::log2(a / b);
    }
    return total / static_cast<double>(p_full.size());
}

double bootstrap_pvalue(double observed, std::span<const double> null_samples) {
    const auto exceed = std::count_if(null_samples.begin(), null_samples.end(),
                                      [&](double v) { return v >= observed; });
    return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(null_samples.size()) + 1.0);
}

namespace {

void check_roles(const Table& table, const std::string& y, std::span<const std::string> x_cols,
                 std::span<const std::string> s_cols) {
    if (!table.column(y).is_categorical())
        throw Error(ErrorKind::Schema, "response '" + y + "' must be categorical");
    if (x_cols.empty()) throw Error(ErrorKind::InvalidArgument, "at least one X column is required");
    std::set<std::string> xs(x_cols.begin(), x_cols.end());
    for (const auto& c : x_cols) table.column(c);
    for (const auto& c : s_cols) {
        table.column(c);
        if (xs.count(c))
            throw Error(ErrorKind::InvalidArgument, "column '" + c + "' appears in both X and S");
    }
    if (xs.count(y) || std::find(s_cols.begin(), s_cols.end(), y) != s_cols.end())
        throw Error(ErrorKind::InvalidArgument, "response '" + y + "' cannot be in X or S");
}

/// Probability each row's observed class receives under `model`; classes the
/// model never saw get probability 0 (the clip floor applies later).
std::vector<double> observed_class_probs(const BoostedEnsemble& model, const Table& table,
                                         const std::string& y) {
    const auto probs = model.predict_proba(table);
    const auto& col = table.column(y);
    std::vector<int> remap(col.categories().size(), -1);
    for (std::size_t c = 0; c < remap.size(); ++c) {
        auto it = std::find(model.classes().begin(), model.classes().end(), col.categories()[c]);
        if (it != model.classes().end()) remap[c] = static_cast<int>(it - model.classes().begin());
    }
    std::vector<double> out(table.n_rows(), 0.0);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        const int c = remap[static_cast<std::size_t>(col.code(i))];
        if (c >= 0) out[i] = probs.at(i, static_cast<std::size_t>(c));
    }
    return out;
}

/// Empirical class frequencies of `train`, evaluated at the classes of `eval`.
std::vector<double> marginal_probs(const Table& train, const Table& eval, const std::string& y) {
    const auto& tc = train.column(y);
    std::vector<double> freq(tc.categories().size(), 0.0);
    for (std::size_t i = 0; i < train.n_rows(); ++i) freq[static_cast<std::size_t>(tc.code(i))] += 1.0;
    for (auto& f : freq) f /= static_cast<double>(train.n_rows());
    const auto& ec = eval.column(y);
    std::vector<double> out(eval.n_rows(), 0.0);
    for (std::size_t i = 0; i < eval.n_rows(); ++i) {
        auto code = tc.code_of(ec.label(i));
        if (code) out[i] = freq[static_cast<std::size_t>(*code)];
    }
    return out;
}

bool single_class(const Table& table, const std::string& y) {
    return table.column(y).observed_levels() < 2;
}

/// P(y_i | .) for `eval` rows from a model trained on `train`.
std::vector<double> conditional_probs(const Table& train, const Table& eval, const std::string& y,
                                      std::span<const std::string> cols, const BoostParams& params) {
    if (cols.empty()) return marginal_probs(train, eval, y);
    if (single_class(train, y)) return marginal_probs(train, eval, y);
    const auto model = fit_boosted(train, y, cols, params);
    return observed_class_probs(model, eval, y);
}

double estimate_value(const Table& table, const std::string& y, std::span<const std::string> x_cols,
                      std::span<const std::string> s_cols, const CmiConfig& cfg) {
    if (single_class(table, y)) return 0.0;
    std::vector<std::string> full(x_cols.begin(), x_cols.end());
    full.insert(full.end(), s_cols.begin(), s_cols.end());
    const auto p_full = fitted_class_probs(table, y, full, cfg);
    const auto p_reduced = fitted_class_probs(table, y, s_cols, cfg);
    return mean_log2_ratio(p_full, p_reduced, cfg.clip);
}

}  // namespace

std::vector<double> fitted_class_probs(const Table& table, const std::string& y,
                                       std::span<const std::string> cols, const CmiConfig& cfg) {
    const std::size_t n = table.n_rows();
    if (cfg.cross_fit_folds == 0) return conditional_probs(table, table, y, cols, cfg.learner_params);

    const auto folds = static_cast<std::size_t>(cfg.cross_fit_folds);
    if (n < 2 * folds) throw Error(ErrorKind::InvalidArgument, "too few rows for cross-fitting");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.learner_params.seed ^ 0x9E3779B97F4A7C15ULL);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> out(n);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows, eval_rows;
        for (std::size_t i = 0; i < n; ++i) (i % folds == f ? eval_rows : train_rows).push_back(perm[i]);
        std::sort(train_rows.begin(), train_rows.end());
        std::sort(eval_rows.begin(), eval_rows.end());
        const auto p = conditional_probs(table.take(train_rows), table.take(eval_rows), y, cols,
                                         cfg.learner_params);
        for (std::size_t i = 0; i < eval_rows.size(); ++i) out[eval_rows[i]] = p[i];
    }
    return out;
}

CmiEstimate estimate_cmi(const Table& table, const std::string& y, std::span<const std::string> x_cols,
                         std::span<const std::string> s_cols, const CmiConfig& cfg) {
    cfg.validate();
    check_roles(table, y, x_cols, s_cols);
    CmiEstimate out;
    out.config = cfg;
    out.n_used = table.n_rows();
    out.value_bits = estimate_value(table, y, x_cols, s_cols, cfg);
    return out;
}

CmiEstimate cmi_pvalue(const Table& table, const std::string& y, std::span<const std::string> x_cols,
                       std::span<const std::string> s_cols, const CmiConfig& cfg, int B,
                       std::uint64_t seed) {
    if (B < 19) throw Error(ErrorKind::InvalidArgument, "bootstrap requires B >= 19");
    auto out = estimate_cmi(table, y, x_cols, s_cols, cfg);
    if (single_class(table, y)) {
        // A constant response resamples to itself, so every replicate is 0.
        out.null_samples.assign(static_cast<std::size_t>(B), 0.0);
        out.pvalue = bootstrap_pvalue(out.value_bits, out.null_samples);
        return out;
    }

    // Null sampling distribution P(Y | S), fitted once.
    const std::size_t n = table.n_rows();
    std::vector<std::string> classes;
    ProbMatrix null_probs;
    if (s_cols.empty()) {
        const auto enc = encode_target(table, y);
        classes = enc.classes;
        std::vector<double> freq(classes.size(), 0.0);
        for (int c : enc.y) freq[static_cast<std::size_t>(c)] += 1.0 / static_cast<double>(n);
        null_probs.rows = n;
        null_probs.classes = classes.size();
        for (std::size_t i = 0; i < n; ++i) null_probs.probs.insert(null_probs.probs.end(), freq.begin(), freq.end());
    } else {
        const auto model = fit_boosted(table, y, s_cols, cfg.learner_params);
        classes = model.classes();
        null_probs = model.predict_proba(table);
    }

    out.null_samples.assign(static_cast<std::size_t>(B), 0.0);
    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        std::mt19937_64 rng(seed + b);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<std::int32_t> codes(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = null_probs.row(i);
            const double u = unit(rng);
            double cum = 0.0;
            std::size_t c = 0;
            while (c + 1 < row.size() && u >= (cum += row[c])) ++c;
            codes[i] = static_cast<std::int32_t>(c);
        }
        const auto resampled = table.with_column(Column::categorical(y, std::move(codes), classes));
        out.null_samples[b] = estimate_value(resampled, y, x_cols, s_cols, cfg);
    });
    out.pvalue = bootstrap_pvalue(out.value_bits, out.null_samples);
    return out;
}

// ---------------------------------------------------------------------------
// Exact discrete oracles

DiscreteJoint::DiscreteJoint(std::array<std::size_t, 3> dims, std::vector<double> pmf)
    : dims_(dims), pmf_(std::move(pmf)) {
    if (dims_[0] == 0 || dims_[1] == 0 || dims_[2] == 0)
        throw Error(ErrorKind::InvalidArgument, "joint dimensions must be positive");
    if (pmf_.size() != dims_[0] * dims_[1] * dims_[2])
        throw Error(ErrorKind::InvalidArgument, "pmf size does not match dimensions");
    double total = 0.0;
    for (double p : pmf_) {
        if (!(p >= 0.0)) throw Error(ErrorKind::InvalidArgument, "pmf entries must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw Error(ErrorKind::InvalidArgument, "pmf is not normalized");
}

DiscreteJoint DiscreteJoint::random(std::array<std::size_t, 3> dims, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> pmf(dims[0] * dims[1] * dims[2]);
    double total = 0.0;
    for (auto& p : pmf) {
        p = expo(rng);
        total += p;
    }
    for (auto& p : pmf) p /= total;
    // Renormalise once more so the sum is within rounding of 1.
    total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    for (auto& p : pmf) p /= total;
    return DiscreteJoint(dims, std::move(pmf));
}

double exact_cmi(const DiscreteJoint& joint) {
    const auto [ny, nx, ns] = joint.dims();
    std::vector<double> p_xs(nx * ns, 0.0), p_s(ns, 0.0), p_ys(ny * ns, 0.0);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t s = 0; s < ns; ++s) {
                const double p = joint(y, x, s);
                p_xs[x * ns + s] += p;
                p_s[s] += p;
                p_ys[y * ns + s] += p;
            }
    double total = 0.0;
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t s = 0; s < ns; ++s) {
                const double p = joint(y, x, s);
                if (p <= 0.0) continue;
                const double y_given_xs = p / p_xs[x * ns + s];
                const double y_given_s = p_ys[y * ns + s] / p_s[s];
                total += p * std::log2(y_given_xs / y_given_s);
            }
    return total;
}

double entropy_difference_cmi(const DiscreteJoint& joint) {
    const auto [ny, nx, ns] = joint.dims();
    // H(Y|S) = sum_s p(s) H(Y | S = s)
    double h_y_s = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
        double ps = 0.0;
        std::vector<double> py(ny, 0.0);
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) py[y] += joint(y, x, s);
        for (double v : py) ps += v;
        if (ps <= 0.0) continue;
        double h = 0.0;
        for (double v : py)
            if (v > 0.0) h -= (v / ps) * std::log2(v / ps);
        h_y_s += ps * h;
    }
    // H(Y|S,X) = sum_{x,s} p(x,s) H(Y | X = x, S = s)
    double h_y_xs = 0.0;
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t s = 0; s < ns; ++s) {
            double pxs = 0.0;
            for (std::size_t y = 0; y < ny; ++y) pxs += joint(y, x, s);
            if (pxs <= 0.0) continue;
            double h = 0.0;
            for (std::size_t y = 0; y < ny; ++y) {
                const double v = joint(y, x, s) / pxs;
                if (v > 0.0) h -= v * std::log2(v);
            }
            h_y_xs += pxs * h;
        }
    return h_y_s - h_y_xs;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const CmiConfig& c) {
    j = json{{"log_base", 2},
             {"clip", c.clip},
             {"cross_fit_folds", c.cross_fit_folds},
             {"learner", c.learner_params}};
}

void from_json(const json& j, CmiConfig& c) {
    CmiConfig d;
    c.clip = j.value("clip", d.clip);
    c.cross_fit_folds = j.value("cross_fit_folds", d.cross_fit_folds);
    c.learner_params = j.contains("learner") ? j.at("learner").get<BoostParams>() : d.learner_params;
    if (j.value("log_base", 2) != 2) throw Error(ErrorKind::InvalidArgument, "log_base is fixed at 2");
    c.validate();
}

void to_json(json& j, const CmiEstimate& e) {
    j = json{{"value_bits", e.value_bits}, {"n_used", e.n_used}, {"config", e.config}};
    if (e.pvalue) {
        j["pvalue"] = *e.pvalue;
        j["B"] = e.null_samples.size();
    }
}

}  // namespace admissible
