// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 when
// any gating line fails. Tolerances are pinned below.

#include "admissible/error.hpp"
#include "admissible/fairness.hpp"
#include "admissible/generators.hpp"
#include "admissible/glm.hpp"
#include "admissible/infogram.hpp"
#include "admissible/infotheory.hpp"
#include "admissible/tree.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace admissible;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-12;
constexpr double kOracleSeconds = 5.0;
constexpr double kXorLo = 0.90, kXorHi = 1.05, kXorP = 0.01, kNullAbs = 0.05, kNullP = 0.1;
constexpr double kXorSeconds = 60.0;
constexpr double kConsistencyTol = 0.05;
constexpr double kCorrelatedSeconds = 300.0;
constexpr double kInfogramThreshold = 0.1;
constexpr double kBerkeleyTol = 0.01, kBerkeleyAlpha = 0.01, kBerkeleyP = 0.5;
constexpr double kAccuracyGap = 0.03, kShieldingDrop = 0.20;
constexpr double kMleTol = 1e-4, kKktTol = 1e-6;
constexpr double kCalibrationMax = 0.12, kCalibrationLevel = 0.05;

constexpr std::uint64_t kSeed = 1;

struct Outcome {
    enum Kind { Pass, Fail, Skip } kind;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.kind == Outcome::Pass ? "PASS" : (o.kind == Outcome::Fail ? "FAIL" : "SKIP");
    if (o.kind == Outcome::Fail) ++failures;
    char time[32];
    std::snprintf(time, sizeof time, "%.1fs", secs);
    std::cout << "[" << tag << "] " << name << ": " << o.detail << " (" << time << ")" << std::endl;
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> predicted_labels(const ProbMatrix& p, const std::vector<std::string>& classes) {
    std::vector<std::string> out;
    for (int c : p.argmax()) out.push_back(classes[static_cast<std::size_t>(c)]);
    return out;
}

double accuracy(const std::vector<std::string>& pred, const Table& t, const std::string& y) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == t.column(y).label(i);
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

Outcome oracle_identity() {
    std::mt19937_64 rng(kSeed);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::array<std::size_t, 3> dims{1 + rng() % 3, 1 + rng() % 3, 1 + rng() % 3};
        const auto j = DiscreteJoint::random(dims, rng);
        worst = std::max(worst, std::abs(exact_cmi(j) - entropy_difference_cmi(j)));
    }
    const double secs = elapsed(t0);
    const bool ok = worst <= kOracleTol && secs < kOracleSeconds;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "100 random joints, max |exact - entropy difference| = " + fmt(worst) + " (tol 1e-12), runtime " +
                fmt(secs, 3) + "s (< 5s)"};
}

Outcome xor_experiment() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> x{"X"}, s{"S"};
    const auto alt = cmi_pvalue(gen_xor(500, kSeed), "Y", x, s, {}, 200, kSeed);
    const auto null = cmi_pvalue(gen_xor_null(500, kSeed), "Y", x, s, {}, 200, kSeed);
    const double secs = elapsed(t0);
    const bool ok = alt.value_bits >= kXorLo && alt.value_bits <= kXorHi && *alt.pvalue < kXorP &&
                    std::abs(null.value_bits) <= kNullAbs && *null.pvalue > kNullP && secs < kXorSeconds;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "xor estimate " + fmt(alt.value_bits) + " bits in [0.90, 1.05], p = " + fmt(*alt.pvalue) +
                " < 0.01; independent-Y estimate " + fmt(null.value_bits) + " (|.| <= 0.05), p = " +
                fmt(*null.pvalue) + " > 0.1; B = 200, runtime " + fmt(secs, 3) + "s (< 60s)"};
}

Outcome consistency() {
    std::mt19937_64 rng(kSeed);
    const std::vector<std::string> x{"X"}, s{"S"};
    double total = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        const auto joint = DiscreteJoint::random({2, 3, 3}, rng);
        const auto t = sample_joint(joint, 5000, kSeed + static_cast<std::uint64_t>(draw));
        total += std::abs(estimate_cmi(t, "Y", x, s).value_bits - exact_cmi(joint));
    }
    const double mean = total / 20.0;
    return {mean <= kConsistencyTol ? Outcome::Pass : Outcome::Fail,
            "20 draws of n = 5000 from random (2,3,3) joints, mean |estimate - exact| = " + fmt(mean) +
                " bits (<= 0.05)"};
}

Outcome correlated_infogram() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ig = core_infogram(gen_correlated(500, 50, kSeed), TaskSpec{"Y", {}, {}, std::nullopt});
    const double secs = elapsed(t0);
    auto pts = ig.points;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.relevance != b.relevance ? a.relevance > b.relevance : a.feature < b.feature;
    });
    std::set<std::string> top;
    for (std::size_t i = 0; i < 3 && i < pts.size(); ++i) top.insert(pts[i].feature);
    double c50 = -1.0;
    bool x1 = false, x2 = false, x50 = true;
    for (const auto& p : ig.points) {
        if (p.feature == "X1") x1 = p.admissible;
        if (p.feature == "X2") x2 = p.admissible;
        if (p.feature == "X50") {
            x50 = p.admissible;
            c50 = p.net_info;
        }
    }
    const bool ok = top == std::set<std::string>{"X1", "X2", "X50"} && x1 && x2 && !x50 &&
                    c50 < kInfogramThreshold && secs < kCorrelatedSeconds;
    std::string tops;
    for (const auto& f : top) tops += (tops.empty() ? "" : ",") + f;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "gen_correlated(500, 50, seed 1): relevance top-3 {" + tops + "}, X1 " + (x1 ? "admissible" : "excluded") +
                ", X2 " + (x2 ? "admissible" : "excluded") + ", X50 net_info " + fmt(c50) + " (< 0.1) " +
                (x50 ? "admissible" : "excluded") + ", runtime " + fmt(secs, 3) + "s (< 300s)"};
}

Outcome berkeley() {
    const auto t = berkeley_admissions();
    const auto marginal = air(t, "admitted", "1", "gender");
    double female = 0.0;
    for (const auto& g : marginal.groups)
        if (g.label == "female") female = g.air;
    const auto c = cair(t, "admitted", "1", "gender", "dept");
    const auto alfa = alfa_test(t, "admitted", {"gender"}, {"dept"}, {}, 200, kSeed);
    const bool ok = std::abs(female - 0.74) <= kBerkeleyTol && std::abs(c.strata.at(0).air - 0.92) <= kBerkeleyTol &&
                    std::abs(c.strata.at(1).air - 0.94) <= kBerkeleyTol && std::abs(c.value - 0.93) <= kBerkeleyTol &&
                    alfa.alpha_bits <= kBerkeleyAlpha && alfa.pvalue > kBerkeleyP;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "AIR " + fmt(female) + " (0.74), dept I " + fmt(c.strata[0].air) + " (0.92), dept II " +
                fmt(c.strata[1].air) + " (0.94), CAIR " + fmt(c.value) + " (0.93), all +-0.01; alpha " +
                fmt(alfa.alpha_bits) + " bits (<= 0.01), p = " + fmt(alfa.pvalue) + " (> 0.5), B = 200"};
}

Outcome alfa_ranking() {
    const auto t = gen_planted_bias(2000, kSeed, 1.2);
    const auto [train, test] = train_test_split(t, 0.2, kSeed);
    const std::vector<std::string> adm{"X1", "X2"}, with_proxy{"X1", "X2", "Z"}, prot{"S"};
    const auto ma = fit_logistic(train, "Y", adm);
    const auto mr = fit_logistic(train, "Y", with_proxy);
    const double acc_a = accuracy(predicted_labels(predict_glm(ma, test), ma.classes), test, "Y");
    const double acc_r = accuracy(predicted_labels(predict_glm(mr, test), mr.classes), test, "Y");
    const auto ranked = rank_models_alfa({{"admissible-only", predicted_labels(predict_glm(ma, t), ma.classes)},
                                          {"with-proxy", predicted_labels(predict_glm(mr, t), mr.classes)}},
                                         t, prot, adm, {}, 100, kSeed);
    const std::vector<std::string> s{"S"};
    const double plain = estimate_cmi(t, "Y", s, adm).value_bits;
    const double shielded = estimate_cmi(t, "Y", s, with_proxy).value_bits;
    const double drop = plain > 0 ? 1.0 - shielded / plain : 0.0;
    const bool ok = ranked[0].name == "admissible-only" && ranked[0].alpha_bits < ranked[1].alpha_bits &&
                    std::abs(acc_a - acc_r) <= kAccuracyGap && drop >= kShieldingDrop;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "planted bias n = 2000: alpha admissible-only " + fmt(ranked[0].name == "admissible-only"
                                                                      ? ranked[0].alpha_bits
                                                                      : ranked[1].alpha_bits) +
                " vs with-proxy " + fmt(ranked[0].name == "with-proxy" ? ranked[0].alpha_bits : ranked[1].alpha_bits) +
                ", first = " + ranked[0].name + "; held-out accuracy " + fmt(acc_a) + " vs " + fmt(acc_r) +
                " (gap <= 0.03); shielding I(Y;S|X_A) " + fmt(plain) + " -> " + fmt(shielded) + " with proxy, drop " +
                fmt(100 * drop, 3) + "% (>= 20%)"};
}

// S drives Y together with x; "copy" relabels S exactly.
Table protected_copy_table(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u;
    std::vector<double> x(n), w(n);
    std::vector<std::string> s(n), copy(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool g = rng() % 2;
        s[i] = g ? "f" : "m";
        copy[i] = g ? "F" : "M";
        x[i] = nd(rng);
        w[i] = nd(rng);
        const double eta = 1.5 * x[i] - 0.7 * w[i] + (g ? 1.0 : -1.0);
        y[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? "1" : "0";
    }
    return Table("copy", {Column::from_labels("S", s), Column::from_labels("copy", copy), Column::numeric("x", x),
                          Column::numeric("w", w), Column::from_labels("y", y)});
}

Outcome fine_lasso() {
    const auto t = protected_copy_table(1500, kSeed);
    const std::vector<std::string> f{"copy", "x", "w"}, free{"x", "w"}, prot{"S"};
    const auto mle = fit_logistic(t, "y", free);
    const auto l0 = fit_fine_lasso(t, "y", free, prot, 0.0, {});
    double mle_gap = std::abs(l0.intercept - mle.intercept);
    for (const auto& term : mle.terms) mle_gap = std::max(mle_gap, std::abs(l0.coefficient(term) - mle.coefficient(term)));
    double proxy_abs = 0.0, kkt = kkt_violation(l0, t, "y");
    double f_copy = 0.0;
    for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        const auto m = fit_fine_lasso(t, "y", f, prot, lambda, {});
        f_copy = m.safety_bits.at(0);
        for (std::size_t k = 0; k < m.terms.size(); ++k)
            if (m.terms[k].rfind("copy=", 0) == 0) proxy_abs = std::max(proxy_abs, std::abs(m.coefficients[k]));
        kkt = std::max(kkt, kkt_violation(m, t, "y"));
    }
    const bool ok = mle_gap <= kMleTol && proxy_abs == 0.0 && f_copy <= kSafetyFloor && kkt <= kKktTol;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "lambda = 0 vs IRLS max |diff| " + fmt(mle_gap) + " (<= 1e-4); F(copy of S) = " + fmt(f_copy) +
                " and its coefficient max |b| = " + fmt(proxy_abs) +
                " over lambda in {0.01, 0.1, 1, 10, 100} (exactly 0); max KKT violation " + fmt(kkt) + " (<= 1e-6)"};
}

Outcome calibration() {
    const std::size_t n = 500;
    const std::vector<std::string> x{"X"}, s{"S"};
    int rejections = 0;
    for (int sim = 0; sim < 100; ++sim) {
        std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(sim));
        std::normal_distribution<double> nd;
        std::uniform_real_distribution<double> u;
        std::vector<double> xv(n);
        std::vector<std::string> sv(n), yv(n);
        const double rate[3] = {0.2, 0.5, 0.7};
        for (std::size_t i = 0; i < n; ++i) {
            const auto level = static_cast<std::size_t>(rng() % 3);
            sv[i] = "s" + std::to_string(level);
            xv[i] = nd(rng);
            yv[i] = u(rng) < rate[level] ? "1" : "0";
        }
        const Table t("null", {Column::from_labels("S", sv), Column::numeric("X", xv), Column::from_labels("Y", yv)});
        const auto e = cmi_pvalue(t, "Y", x, s, {}, 99, 5000 + static_cast<std::uint64_t>(sim) * 100);
        rejections += *e.pvalue < kCalibrationLevel;
    }
    const double frac = rejections / 100.0;
    return {frac <= kCalibrationMax ? Outcome::Pass : Outcome::Fail,
            "Y depends on S only, 100 simulations, n = 500, B = 99: fraction p < 0.05 = " + fmt(frac) + " (in [0, 0.12])"};
}

std::set<std::string> admissible_set(const Table& t) {
    const auto ig = core_infogram(t, TaskSpec{"Y", {}, {}, std::nullopt});
    const auto a = select_admissible(ig);
    return {a.begin(), a.end()};
}

std::string join(const std::set<std::string>& s) {
    std::string out;
    for (const auto& v : s) out += (out.empty() ? "" : ",") + v;
    return "{" + out + "}";
}

Outcome monk() {
    const char* env = std::getenv("ADMISSIBLE_MONK_DIR");
    std::string diag;
    {
        // Noise-free factorial design, printed for context only.
        diag = "; factorial design (not gating): MONK-1 " + join(admissible_set(monk_full(1))) + ", MONK-3 " +
               join(admissible_set(monk_full(3)));
    }
    if (!env) return {Outcome::Skip, "UCI files not available (set ADMISSIBLE_MONK_DIR to a folder holding monks-N.train)" + diag};
    const fs::path dir(env);
    for (int k = 1; k <= 3; ++k)
        if (!fs::exists(dir / ("monks-" + std::to_string(k) + ".train")))
            return {Outcome::Skip, "missing " + (dir / ("monks-" + std::to_string(k) + ".train")).string() + diag};
    const auto m1 = admissible_set(load_monk(dir / "monks-1.train"));
    const auto m2 = admissible_set(load_monk(dir / "monks-2.train"));
    const auto m3 = admissible_set(load_monk(dir / "monks-3.train"));
    const bool ok = m1 == std::set<std::string>{"X1", "X2", "X5"} && m3 == std::set<std::string>{"X2", "X5"} &&
                    m2.size() >= 5;
    return {ok ? Outcome::Pass : Outcome::Fail,
            "MONK-1 " + join(m1) + " (want {X1,X2,X5}), MONK-3 " + join(m3) + " (want {X2,X5}), MONK-2 " +
                std::to_string(m2.size()) + " of 6 admissible (want >= 5)"};
}

// Each CSV in the folder is a demo; its last column is the target.
Outcome real_data() {
    const char* env = std::getenv("ADMISSIBLE_DEMO_DIR");
    if (!env || !fs::is_directory(env))
        return {Outcome::Skip, "real datasets are not bundled (set ADMISSIBLE_DEMO_DIR to a folder of CSV files whose "
                               "last column is the target); published accuracies are not asserted"};
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(env))
        if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) return {Outcome::Skip, "no CSV files in " + std::string(env)};
    bool ok = true;
    std::string detail;
    for (const auto& path : files) {
        const auto raw = load_csv(path);
        const std::string target = raw.column_names().back();
        const auto t = as_categorical(raw, std::vector<std::string>{target});
        std::vector<std::string> features = t.column_names();
        features.pop_back();
        const auto [train, test] = train_test_split(t, 0.2, kSeed);
        const auto tree = fit_tree(train, target, features, {});
        const double acc = accuracy(predicted_labels(predict_tree(tree, test), tree.classes), test, target);
        std::map<std::string, std::size_t> counts;
        for (std::size_t i = 0; i < train.n_rows(); ++i) ++counts[train.column(target).label(i)];
        const auto majority =
            std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
        std::size_t hit = 0;
        for (std::size_t i = 0; i < test.n_rows(); ++i) hit += test.column(target).label(i) == majority;
        const double base = static_cast<double>(hit) / static_cast<double>(test.n_rows());
        ok = ok && acc >= base;
        detail += (detail.empty() ? "" : "; ") + path.filename().string() + " tree accuracy " + fmt(acc) +
                  " vs majority " + fmt(base);
    }
    return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

}  // namespace

int main() {
    report("oracle identity", oracle_identity);
    report("xor experiment", xor_experiment);
    report("estimator consistency", consistency);
    report("correlated-proxy infogram", correlated_infogram);
    report("berkeley numbers", berkeley);
    report("alfa ranking and shielding", alfa_ranking);
    report("fine lasso properties", fine_lasso);
    report("bootstrap calibration", calibration);
    report("monk reproduction", monk);
    report("real-data demos", real_data);
    std::cout << (failures == 0 ? "acceptance: all gating criteria passed" : "acceptance: " + std::to_string(failures) + " failing")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
