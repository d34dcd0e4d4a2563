#include "admissible/glm.hpp"

#include "admissible/error.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace admissible {

using nlohmann::json;

double GlmModel::coefficient(const std::string& term) const {
    for (std::size_t t = 0; t < terms.size(); ++t)
        if (terms[t] == term) return coefficients[t];
    return 0.0;
}

double GlmModel::aic() const { return 2.0 * static_cast<double>(terms.size() + 1) - 2.0 * loglik; }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
    std::vector<std::string> classes;
    std::vector<FeatureSchema> features;
    std::vector<std::string> terms;
    std::vector<std::size_t> term_feature;  // input feature index of each term
    Eigen::MatrixXd X;                      // n x (1 + terms), intercept column first
    Eigen::VectorXd y;                      // 1 = positive class
};

std::vector<std::string> expand_terms(const std::vector<FeatureSchema>& features,
                                      std::vector<std::size_t>* owner = nullptr) {
    std::vector<std::string> terms;
    for (std::size_t f = 0; f < features.size(); ++f) {
        const auto& fs = features[f];
        if (fs.kind == ColumnKind::Numeric) {
            terms.push_back(fs.name);
            if (owner) owner->push_back(f);
        } else {
            for (std::size_t l = 1; l < fs.categories.size(); ++l) {
                terms.push_back(fs.name + "=" + fs.categories[l]);
                if (owner) owner->push_back(f);
            }
        }
    }
    return terms;
}

Eigen::MatrixXd design(const Table& table, const std::vector<FeatureSchema>& features, std::size_t n_terms) {
    const auto enc = encode_features(table, features);
    const auto n = table.n_rows();
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_terms + 1));
    X.col(0).setOnes();
    Eigen::Index col = 1;
    for (std::size_t f = 0; f < features.size(); ++f) {
        const auto& e = enc[f];
        for (std::size_t r = 0; r < n; ++r)
            if (e.missing[r])
                throw Error(ErrorKind::Schema, "feature '" + features[f].name +
                                                   "' has missing or unseen values; logistic models need complete data");
        if (!e.categorical) {
            for (std::size_t r = 0; r < n; ++r) X(static_cast<Eigen::Index>(r), col) = e.values[r];
            ++col;
        } else {
            const auto levels = static_cast<Eigen::Index>(features[f].categories.size());
            for (std::size_t r = 0; r < n; ++r) {
                const auto code = static_cast<Eigen::Index>(e.codes[r]);
                if (code > 0) X(static_cast<Eigen::Index>(r), col + code - 1) = 1.0;
            }
            col += levels - 1;
        }
    }
    return X;
}

std::vector<std::string> binary_classes(const Table& table, const std::string& y,
                                        const std::optional<std::string>& positive) {
    auto target = encode_target(table, y);
    if (target.classes.size() != 2)
        throw Error(ErrorKind::InvalidArgument, "logistic models need a binary target; '" + y + "' has " +
                                                    std::to_string(target.classes.size()) + " classes");
    if (positive) {
        if (*positive == target.classes[0]) std::swap(target.classes[0], target.classes[1]);
        else if (*positive != target.classes[1])
            throw Error(ErrorKind::Schema, "'" + *positive + "' is not a class of '" + y + "'");
    }
    return target.classes;
}

Eigen::VectorXd response(const Table& table, const std::string& y, const std::vector<std::string>& classes) {
    const auto codes = encode_target_as(table, y, classes);
    Eigen::VectorXd out(static_cast<Eigen::Index>(codes.size()));
    for (std::size_t i = 0; i < codes.size(); ++i) out(static_cast<Eigen::Index>(i)) = codes[i] == 1 ? 1.0 : 0.0;
    return out;
}

Problem make_problem(const Table& table, const std::string& y, std::span<const std::string> features,
                     const std::optional<std::string>& positive) {
    for (const auto& f : features)
        if (f == y) throw Error(ErrorKind::Schema, "target '" + y + "' listed as a feature");
    Problem p;
    p.classes = binary_classes(table, y, positive);
    p.features = feature_schema(table, features);
    p.terms = expand_terms(p.features, &p.term_feature);
    p.X = design(table, p.features, p.terms.size());
    p.y = response(table, y, p.classes);
    return p;
}

double sigmoid(double eta) { return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta)); }

// log(1 + e^eta) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double nll(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    double out = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) out += softplus(eta(i)) - y(i) * eta(i);
    return out;
}

Eigen::VectorXd probs_of(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = X * beta;
    return eta.unaryExpr([](double e) { return sigmoid(e); });
}

GlmModel package(const Problem& p, const Eigen::VectorXd& beta, double loglik, int iterations) {
    GlmModel m;
    m.classes = p.classes;
    m.features = p.features;
    m.terms = p.terms;
    m.intercept = beta(0);
    m.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
    m.loglik = loglik;
    m.iterations = iterations;
    return m;
}

Eigen::VectorXd beta_of(const GlmModel& m) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(m.coefficients.size() + 1));
    b(0) = m.intercept;
    for (std::size_t t = 0; t < m.coefficients.size(); ++t) b(static_cast<Eigen::Index>(t + 1)) = m.coefficients[t];
    return b;
}

GlmModel irls(const Problem& p) {
    const auto cols = p.X.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p.X);
    if (qr.rank() < cols)
        throw Error(ErrorKind::Degenerate, "design matrix is rank deficient (collinear or constant terms)");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(cols);
    const double ybar = p.y.mean();
    beta(0) = std::log(ybar / (1.0 - ybar));
    double loss = nll(p.X, p.y, beta);
    int iter = 0;
    for (; iter < 100; ++iter) {
        const Eigen::VectorXd prob = probs_of(p.X, beta);
        const Eigen::VectorXd w = prob.unaryExpr([](double q) { return std::max(q * (1.0 - q), 1e-12); });
        const Eigen::MatrixXd H = p.X.transpose() * w.asDiagonal() * p.X;
        const Eigen::VectorXd g = p.X.transpose() * (p.y - prob);
        const Eigen::VectorXd step = H.ldlt().solve(g);
        double t = 1.0, next = nll(p.X, p.y, beta + step);
        for (int h = 0; h < 40 && !(next <= loss); ++h) {
            t *= 0.5;
            next = nll(p.X, p.y, beta + t * step);
        }
        if (!(next <= loss)) break;
        beta += t * step;
        const double change = loss - next;
        loss = next;
        if (change < 1e-8) {
            ++iter;
            break;
        }
    }
    const Eigen::VectorXd prob = probs_of(p.X, beta);
    for (Eigen::Index i = 0; i < prob.size(); ++i)
        if (prob(i) < 1e-10 || prob(i) > 1.0 - 1e-10)
            throw Error(ErrorKind::Separation,
                        "perfect or quasi-complete separation: the maximum-likelihood estimate is unbounded; "
                        "use fit_fine_lasso (lambda > 0) instead");

    auto m = package(p, beta, -loss, iter);
    const Eigen::VectorXd w = prob.unaryExpr([](double q) { return q * (1.0 - q); });
    const Eigen::MatrixXd H = p.X.transpose() * w.asDiagonal() * p.X;
    const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(cols, cols));
    for (Eigen::Index t = 1; t < cols; ++t) m.std_errors.push_back(std::sqrt(cov(t, t)));
    return m;
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

}  // namespace

GlmModel fit_logistic(const Table& table, const std::string& y, std::span<const std::string> features,
                      const std::optional<std::string>& positive_label) {
    return irls(make_problem(table, y, features, positive_label));
}

GlmModel aic_backward_select(const Table& table, const std::string& y,
                             std::span<const std::string> features,
                             const std::optional<std::string>& positive_label) {
    std::vector<std::string> current(features.begin(), features.end());
    auto best = fit_logistic(table, y, current, positive_label);
    while (!current.empty()) {
        std::optional<GlmModel> candidate;
        std::size_t drop = 0;
        for (std::size_t f = 0; f < current.size(); ++f) {
            std::vector<std::string> reduced = current;
            reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(f));
            auto m = fit_logistic(table, y, reduced, positive_label);
            if (!candidate || m.aic() < candidate->aic()) {
                candidate = std::move(m);
                drop = f;
            }
        }
        if (!(candidate->aic() < best.aic())) break;
        best = std::move(*candidate);
        current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    return best;
}

GlmModel fit_weighted_lasso(const Table& table, const std::string& y,
                            std::span<const std::string> features, std::span<const double> weights,
                            double lambda, const std::optional<std::string>& positive_label) {
    if (!(lambda >= 0.0) || std::isinf(lambda))
        throw Error(ErrorKind::InvalidArgument, "lambda must be a finite value >= 0");
    if (weights.size() != features.size())
        throw Error(ErrorKind::InvalidArgument, "penalty weights must align with the feature list");
    for (double w : weights)
        if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "penalty weights must be >= 0");
    const auto p = make_problem(table, y, features, positive_label);
    const auto m = static_cast<Eigen::Index>(p.terms.size());

    // Effective per-term penalty; lambda = 0 switches the penalty off entirely.
    std::vector<double> pen(static_cast<std::size_t>(m), 0.0);
    std::vector<double> term_weights(static_cast<std::size_t>(m));
    for (Eigen::Index t = 0; t < m; ++t) {
        const double w = weights[p.term_feature[static_cast<std::size_t>(t)]];
        term_weights[static_cast<std::size_t>(t)] = w;
        pen[static_cast<std::size_t>(t)] = lambda == 0.0 ? 0.0 : (std::isinf(w) ? kInf : lambda * w);
    }
    auto objective = [&](const Eigen::VectorXd& b) {
        double v = nll(p.X, p.y, b);
        for (Eigen::Index t = 0; t < m; ++t) {
            const double pt = pen[static_cast<std::size_t>(t)];
            if (pt > 0.0 && b(t + 1) != 0.0) v += pt * std::abs(b(t + 1));
        }
        return v;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m + 1);
    const double ybar = p.y.mean();
    beta(0) = std::log(ybar / (1.0 - ybar));
    double obj = objective(beta);
    Eigen::VectorXd col_sq(m + 1);
    int outer = 0;
    for (; outer < 500; ++outer) {
        const Eigen::VectorXd prob = probs_of(p.X, beta);
        const Eigen::VectorXd w = prob.unaryExpr([](double q) { return std::max(q * (1.0 - q), 1e-10); });
        for (Eigen::Index j = 0; j <= m; ++j) col_sq(j) = w.dot(p.X.col(j).cwiseProduct(p.X.col(j)));
        // Working residual r = z - X b for the quadratic model, z = eta + (y - p) / w.
        Eigen::VectorXd r = (p.y - prob).cwiseQuotient(w);
        Eigen::VectorXd next = beta;
        for (int inner = 0; inner < 10000; ++inner) {
            double max_move = 0.0;
            for (Eigen::Index j = 0; j <= m; ++j) {
                if (!(col_sq(j) > 0.0)) continue;
                const double penalty = j == 0 ? 0.0 : pen[static_cast<std::size_t>(j - 1)];
                if (std::isinf(penalty)) {
                    next(j) = 0.0;
                    continue;
                }
                const double old = next(j);
                const double z = w.dot(p.X.col(j).cwiseProduct(r)) + col_sq(j) * old;
                const double upd = soft_threshold(z, penalty) / col_sq(j);
                if (upd != old) {
                    r -= (upd - old) * p.X.col(j);
                    next(j) = upd;
                    max_move = std::max(max_move, std::abs(upd - old) * std::sqrt(col_sq(j)));
                }
            }
            if (max_move < 1e-13) break;
        }
        const Eigen::VectorXd dir = next - beta;
        double t = 1.0, cand = objective(beta + dir);
        for (int h = 0; h < 60 && !(cand <= obj); ++h) {
            t *= 0.5;
            cand = objective(beta + t * dir);
        }
        if (!(cand <= obj)) break;
        beta += t * dir;
        for (Eigen::Index j = 0; j < m; ++j)
            if (std::isinf(pen[static_cast<std::size_t>(j)])) beta(j + 1) = 0.0;
        const double change = obj - cand;
        obj = cand;
        if (change <= 1e-15 * (1.0 + std::abs(obj)) && t * dir.cwiseAbs().maxCoeff() < 1e-12) {
            ++outer;
            break;
        }
    }
    auto model = package(p, beta, -nll(p.X, p.y, beta), outer);
    model.lambda = lambda;
    model.penalty_weights = std::move(term_weights);
    return model;
}

std::vector<double> safety_indices(const Table& table, const std::string& y,
                                   std::span<const std::string> features,
                                   std::span<const std::string> protected_attrs, const CmiConfig& cfg) {
    if (protected_attrs.empty())
        throw Error(ErrorKind::InvalidArgument, "safety indices need at least one protected attribute");
    for (const auto& f : features)
        for (const auto& s : protected_attrs)
            if (f == s) throw Error(ErrorKind::Schema, "column '" + f + "' is both a feature and protected");
    const std::vector<std::string> s(protected_attrs.begin(), protected_attrs.end());
    const auto p_s = fitted_class_probs(table, y, s, cfg);
    std::vector<double> out;
    for (const auto& f : features) {
        std::vector<std::string> cols{f};
        cols.insert(cols.end(), s.begin(), s.end());
        out.push_back(mean_log2_ratio(fitted_class_probs(table, y, cols, cfg), p_s, cfg.clip));
    }
    return out;
}

GlmModel fit_fine_lasso(const Table& table, const std::string& y, std::span<const std::string> features,
                        std::span<const std::string> protected_attrs, double lambda, const CmiConfig& cfg,
                        const std::optional<std::string>& positive_label) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0");
    const auto f = safety_indices(table, y, features, protected_attrs, cfg);
    std::vector<double> w;
    for (double v : f) w.push_back(v <= kSafetyFloor ? kInf : 1.0 / v);
    auto model = fit_weighted_lasso(table, y, features, w, lambda, positive_label);
    model.safety_bits = f;
    return model;
}

ProbMatrix predict_glm(const GlmModel& model, const Table& table) {
    const auto X = design(table, model.features, model.terms.size());
    const Eigen::VectorXd prob = probs_of(X, beta_of(model));
    ProbMatrix out;
    out.rows = table.n_rows();
    out.classes = 2;
    out.probs.resize(out.rows * 2);
    for (std::size_t i = 0; i < out.rows; ++i) {
        out.probs[2 * i] = 1.0 - prob(static_cast<Eigen::Index>(i));
        out.probs[2 * i + 1] = prob(static_cast<Eigen::Index>(i));
    }
    return out;
}

double negative_log_likelihood(const GlmModel& model, const Table& table, const std::string& y) {
    const auto X = design(table, model.features, model.terms.size());
    return nll(X, response(table, y, model.classes), beta_of(model));
}

std::vector<double> nll_gradient(const GlmModel& model, const Table& table, const std::string& y) {
    const auto X = design(table, model.features, model.terms.size());
    const Eigen::VectorXd g = X.transpose() * (probs_of(X, beta_of(model)) - response(table, y, model.classes));
    return {g.data(), g.data() + g.size()};
}

double kkt_violation(const GlmModel& model, const Table& table, const std::string& y) {
    const auto g = nll_gradient(model, table, y);
    double worst = std::abs(g[0]);
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
        const double w = model.penalty_weights.empty() ? 1.0 : model.penalty_weights[t];
        const double pen = model.lambda == 0.0 ? 0.0 : (std::isinf(w) ? kInf : model.lambda * w);
        const double b = model.coefficients[t];
        const double gt = g[t + 1];
        double v;
        if (std::isinf(pen)) v = b == 0.0 ? 0.0 : kInf;
        else if (b == 0.0) v = std::max(0.0, std::abs(gt) - pen);
        else v = std::abs(gt + pen * (b > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

std::map<std::string, double> forest_selection_probs(const std::map<std::string, double>& f_values) {
    double total = 0.0;
    for (const auto& [name, f] : f_values) {
        if (!(f >= 0.0) || std::isinf(f))
            throw Error(ErrorKind::InvalidArgument, "selection weight of '" + name + "' must be finite and >= 0");
        total += f;
    }
    if (!(total > 0.0)) throw Error(ErrorKind::Degenerate, "every safety index is zero; no feature can be selected");
    std::map<std::string, double> out;
    for (const auto& [name, f] : f_values) out[name] = f / total;
    return out;
}

namespace {

json weight_json(double w) { return std::isinf(w) ? json("inf") : json(w); }

double weight_from(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "inf") throw Error(ErrorKind::Parse, "penalty weight must be a number or \"inf\"");
        return kInf;
    }
    return j.get<double>();
}

}  // namespace

void to_json(json& j, const GlmModel& m) {
    json coefs = json::object(), weights = json::object();
    for (std::size_t t = 0; t < m.terms.size(); ++t) {
        coefs[m.terms[t]] = m.coefficients[t];
        if (!m.penalty_weights.empty()) weights[m.terms[t]] = weight_json(m.penalty_weights[t]);
    }
    j = json{{"kind", "glm"},
             {"link", "logit"},
             {"classes", m.classes},
             {"features", m.features},
             {"terms", m.terms},
             {"intercept", m.intercept},
             {"coefficients", std::move(coefs)},
             {"lambda", m.lambda},
             {"penalty_weights", std::move(weights)},
             {"loglik", m.loglik},
             {"aic", m.aic()},
             {"iterations", m.iterations}};
    if (!m.std_errors.empty()) {
        json se = json::object();
        for (std::size_t t = 0; t < m.terms.size(); ++t) se[m.terms[t]] = m.std_errors[t];
        j["std_errors"] = std::move(se);
    }
    if (!m.safety_bits.empty()) {
        json f = json::object();
        for (std::size_t i = 0; i < m.features.size(); ++i) f[m.features[i].name] = m.safety_bits[i];
        j["safety_bits"] = std::move(f);
    }
}

void from_json(const json& j, GlmModel& m) {
    m = GlmModel{};
    m.classes = j.at("classes").get<std::vector<std::string>>();
    if (m.classes.size() != 2) throw Error(ErrorKind::Parse, "GLM needs exactly two classes");
    m.features = j.at("features").get<std::vector<FeatureSchema>>();
    m.terms = j.at("terms").get<std::vector<std::string>>();
    if (m.terms != expand_terms(m.features)) throw Error(ErrorKind::Parse, "GLM terms do not match its features");
    m.intercept = j.at("intercept").get<double>();
    m.lambda = j.value("lambda", 0.0);
    m.loglik = j.value("loglik", 0.0);
    m.iterations = j.value("iterations", 0);
    const auto& coefs = j.at("coefficients");
    const auto weights = j.value("penalty_weights", json::object());
    for (const auto& t : m.terms) {
        m.coefficients.push_back(coefs.at(t).get<double>());
        if (!weights.empty()) m.penalty_weights.push_back(weight_from(weights.at(t)));
    }
    if (j.contains("std_errors"))
        for (const auto& t : m.terms) m.std_errors.push_back(j.at("std_errors").at(t).get<double>());
    if (j.contains("safety_bits"))
        for (const auto& f : m.features) m.safety_bits.push_back(j.at("safety_bits").at(f.name).get<double>());
}

}  // namespace admissible
