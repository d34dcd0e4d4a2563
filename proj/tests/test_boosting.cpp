#include "helpers.hpp"

#include "admissible/boosting.hpp"
#include "admissible/error.hpp"
#include "admissible/generators.hpp"

#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

using namespace admissible;

namespace {

double training_accuracy(const BoostedEnsemble& m, const Table& t, const std::string& y) {
    const auto pred = m.predict_proba(t).argmax();
    const auto truth = encode_target_as(t, y, m.classes());
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

Table three_class(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> a(n), b(n);
    std::vector<std::string> c(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = nd(rng);
        b[i] = nd(rng);
        c[i] = std::string(1, static_cast<char>('p' + rng() % 4));
        const double s = a[i] + (c[i] == "q" ? 1.0 : 0.0) + 0.5 * nd(rng);
        y[i] = s < -0.5 ? "lo" : (s < 0.7 ? "mid" : "hi");
    }
    std::vector<std::uint8_t> miss(n, 0);
    for (std::size_t i = 0; i < n; i += 9) miss[i] = 1;
    return Table("three", {Column::numeric("a", a, miss), Column::numeric("b", b), Column::from_labels("c", c),
                           Column::from_labels("y", y)});
}

}  // namespace

TEST_CASE("separable binary feature: perfect fit and concentrated gain") {
    std::vector<std::string> x, y;
    std::vector<double> noise;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        x.push_back(i % 2 ? "on" : "off");
        y.push_back(i % 2 ? "yes" : "no");
        noise.push_back(std::uniform_real_distribution<double>()(rng));
    }
    const Table t("sep", {Column::from_labels("x", x), Column::numeric("n", noise), Column::from_labels("y", y)});
    const std::vector<std::string> f{"x", "n"};
    const auto m = fit_boosted(t, "y", f, {});
    CHECK(training_accuracy(m, t, "y") == 1.0);
    const auto r = relevance_scores(m);
    CHECK(r.scores.at("x") == 1.0);
    CHECK(r.scores.at("n") < 0.01);
}

TEST_CASE("xor is learned exactly at depth 2") {
    const auto t = gen_xor(400, 3);
    const std::vector<std::string> f{"X", "S"};
    BoostParams p;
    p.max_depth = 2;
    CHECK(training_accuracy(fit_boosted(t, "Y", f, p), t, "Y") == 1.0);
}

TEST_CASE("no-signal features: held-out log-loss near the marginal entropy") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    const std::size_t n = 4000;
    std::vector<double> a(n), b(n);
    std::vector<std::string> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = nd(rng);
        b[i] = nd(rng);
        y[i] = std::bernoulli_distribution(0.3)(rng) ? "1" : "0";
    }
    const Table t("null", {Column::numeric("a", a), Column::numeric("b", b), Column::from_labels("y", y)});
    const auto [train, test] = train_test_split(t, 0.5, 2);
    const std::vector<std::string> f{"a", "b"};
    const auto m = fit_boosted(train, "y", f, {});
    const auto p = m.predict_proba(test);
    const auto codes = encode_target_as(test, "y", m.classes());
    // Oracle: the marginal predictor fitted on the training half.
    const auto tr_codes = encode_target_as(train, "y", m.classes());
    std::vector<double> prior(m.classes().size(), 0.0);
    for (int c : tr_codes) prior[static_cast<std::size_t>(c)] += 1.0 / static_cast<double>(tr_codes.size());
    double model_loss = 0, marginal_loss = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        model_loss -= std::log(p.at(i, static_cast<std::size_t>(codes[i]))) / static_cast<double>(codes.size());
        marginal_loss -= std::log(prior[static_cast<std::size_t>(codes[i])]) / static_cast<double>(codes.size());
    }
    CHECK(std::abs(model_loss - marginal_loss) <= 0.05);
}

TEST_CASE("probability rows are stochastic and two-class columns complementary") {
    const auto t = three_class(600, 4);
    const std::vector<std::string> f{"a", "b", "c"};
    const auto m = fit_boosted(t, "y", f, {});
    CHECK(m.trees().size() == 100);
    for (const auto& group : m.trees()) CHECK(group.size() == 3);
    const auto p = m.predict_proba(t);
    for (std::size_t i = 0; i < p.rows; ++i) {
        double s = 0;
        for (std::size_t c = 0; c < p.classes; ++c) {
            CHECK(p.at(i, c) >= 0.0);
            CHECK(p.at(i, c) <= 1.0);
            s += p.at(i, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    const auto x = gen_xor(300, 1);
    const std::vector<std::string> fx{"X", "S"};
    const auto mb = fit_boosted(x, "Y", fx, {});
    for (const auto& group : mb.trees()) CHECK(group.size() == 1);
    const auto pb = mb.predict_proba(x);
    for (std::size_t i = 0; i < pb.rows; ++i) CHECK(pb.at(i, 0) == doctest::Approx(1.0 - pb.at(i, 1)).epsilon(1e-12));
}

TEST_CASE("training loss never increases across rounds") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto t = three_class(500, seed);
        const std::vector<std::string> f{"a", "b", "c"};
        BoostParams p;
        p.learning_rate = 0.5;
        p.seed = seed;
        const auto m = fit_boosted(t, "y", f, p);
        const auto& loss = m.training_loss();
        REQUIRE(loss.size() == 101);
        for (std::size_t r = 1; r < loss.size(); ++r) CHECK(loss[r] <= loss[r - 1]);
    }
    const auto x = gen_correlated(300, 6, 5);
    const std::vector<std::string> f{"X1", "X2", "X3", "X4", "X5", "X6"};
    BoostParams p;
    p.learning_rate = 1.0;
    p.subsample = 0.7;
    const auto model = fit_boosted(x, "Y", f, p);
    const auto& loss = model.training_loss();
    for (std::size_t r = 1; r < loss.size(); ++r) CHECK(loss[r] <= loss[r - 1]);
}

TEST_CASE("fitting is deterministic for a seed") {
    const auto t = three_class(400, 6);
    const std::vector<std::string> f{"a", "b", "c"};
    BoostParams p;
    p.subsample = 0.8;
    p.seed = 17;
    const nlohmann::json a = fit_boosted(t, "y", f, p);
    const nlohmann::json b = fit_boosted(t, "y", f, p);
    CHECK(a.dump() == b.dump());
    p.seed = 18;
    const nlohmann::json c = fit_boosted(t, "y", f, p);
    CHECK(a.dump() != c.dump());
}

TEST_CASE("zero-round model predicts the class priors") {
    const auto t = three_class(300, 2);
    const std::vector<std::string> f{"a"};
    BoostParams p;
    p.n_rounds = 0;
    const auto m = fit_boosted(t, "y", f, p);
    const auto codes = encode_target_as(t, "y", m.classes());
    std::vector<double> prior(m.classes().size(), 0.0);
    for (int c : codes) prior[static_cast<std::size_t>(c)] += 1.0 / static_cast<double>(codes.size());
    const auto probs = m.predict_proba(t);
    for (std::size_t i = 0; i < probs.rows; ++i)
        for (std::size_t c = 0; c < probs.classes; ++c) CHECK(probs.at(i, c) == doctest::Approx(prior[c]).epsilon(1e-12));
}

TEST_CASE("relevance scores: normalised, one exact maximum, degenerate flag") {
    const auto t = three_class(500, 9);
    const std::vector<std::string> f{"a", "b", "c"};
    const auto r = relevance_scores(fit_boosted(t, "y", f, {}));
    CHECK_FALSE(r.degenerate);
    int ones = 0;
    for (const auto& [name, v] : r.scores) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        ones += v == 1.0;
    }
    CHECK(ones == 1);
    CHECK(r.scores.at("a") == 1.0);

    const std::vector<std::string> one{"b"};
    CHECK(relevance_scores(fit_boosted(t, "y", one, {})).scores.at("b") == 1.0);

    std::vector<std::string> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = i % 3 ? "a" : "b";
    const Table constant_x("cx", {Column::numeric("k", std::vector<double>(50, 2.0)), Column::from_labels("y", y)});
    const std::vector<std::string> k{"k"};
    const auto d = relevance_scores(fit_boosted(constant_x, "y", k, {}));
    CHECK(d.degenerate);
    CHECK(d.scores.at("k") == 0.0);
}

TEST_CASE("unseen levels and missing cells predict without error") {
    const auto t = three_class(400, 3);
    const std::vector<std::string> f{"a", "b", "c"};
    const auto m = fit_boosted(t, "y", f, {});
    const Table probe("probe", {Column::numeric("a", {0.0, 0.0}, {1, 0}), Column::numeric("b", {0.1, 0.2}),
                                testing::labels("c", {"zzz", "p"})});
    const auto p = m.predict_proba(probe);
    CHECK(p.rows == 2);
    const Table wrong("w", {testing::labels("a", {"x"}), Column::numeric("b", {0}), testing::labels("c", {"p"})});
    CHECK_THROWS_AS(m.predict_proba(wrong), Error);
}

TEST_CASE("fit errors: single class and absent feature") {
    const Table t("t", {Column::numeric("x", {1, 2, 3, 4}), testing::labels("y", {"a", "a", "a", "a"})});
    const std::vector<std::string> x{"x"}, nope{"nope"};
    CHECK_THROWS_AS(fit_boosted(t, "y", x, {}), Error);
    const auto xor_t = gen_xor(50, 1);
    CHECK_THROWS_AS(fit_boosted(xor_t, "Y", nope, {}), Error);
    BoostParams bad;
    bad.learning_rate = 0.0;
    const std::vector<std::string> fx{"X"};
    CHECK_THROWS_AS(fit_boosted(xor_t, "Y", fx, bad), Error);
}

TEST_CASE("ensemble json round trip predicts identically") {
    const auto t = three_class(300, 12);
    const std::vector<std::string> f{"a", "b", "c"};
    const auto m = fit_boosted(t, "y", f, {});
    const nlohmann::json j = m;
    for (const char* key : {"classes", "base_scores", "params", "trees", "feature_gain"}) CHECK(j.contains(key));
    const auto back = nlohmann::json::parse(j.dump()).get<BoostedEnsemble>();
    CHECK(back.predict_proba(t).probs == m.predict_proba(t).probs);
}
