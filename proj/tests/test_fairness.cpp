#include "helpers.hpp"

#include "admissible/error.hpp"
#include "admissible/fairness.hpp"
#include "admissible/generators.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <random>

using namespace admissible;

namespace {

// Admitted / applied per (dept, gender), straight from the published table.
struct Cell {
    double admitted, applied;
};
constexpr Cell kMaleI{353, 560}, kFemaleI{17, 25}, kMaleII{138, 417}, kFemaleII{131, 375};

const GroupRate& group(const AirReport& r, const std::string& label) {
    const auto it = std::find_if(r.groups.begin(), r.groups.end(), [&](const GroupRate& g) { return g.label == label; });
    REQUIRE(it != r.groups.end());
    return *it;
}

Table rates_table(const std::vector<std::pair<std::string, std::pair<int, int>>>& spec, int copies = 1) {
    std::vector<std::string> g, y;
    for (int c = 0; c < copies; ++c)
        for (const auto& [label, counts] : spec) {
            for (int i = 0; i < counts.second; ++i) {
                g.push_back(label);
                y.push_back(i < counts.first ? "yes" : "no");
            }
        }
    return Table("rates", {Column::from_labels("g", g), Column::from_labels("y", y)});
}

}  // namespace

TEST_CASE("berkeley adverse impact ratios") {
    const auto t = berkeley_admissions();
    const double female = (kFemaleI.admitted + kFemaleII.admitted) / (kFemaleI.applied + kFemaleII.applied);
    const double male = (kMaleI.admitted + kMaleII.admitted) / (kMaleI.applied + kMaleII.applied);
    const auto r = air(t, "admitted", "1", "gender");
    CHECK(r.reference == "male");
    CHECK(group(r, "female").air == doctest::Approx(female / male).epsilon(1e-12));
    CHECK(std::abs(group(r, "female").air - 0.74) <= 0.01);
    CHECK(group(r, "female").below_80);
    CHECK_FALSE(group(r, "male").below_80);
    CHECK(group(r, "male").air == 1.0);
    CHECK(group(r, "female").n == 400);
}

TEST_CASE("berkeley conditional ratios and cair") {
    const auto t = berkeley_admissions();
    const double w1 = (kMaleI.applied + kFemaleI.applied) / 1377.0;
    CHECK(w1 == doctest::Approx(585.0 / 1377.0));
    const double air1 = (kMaleI.admitted / kMaleI.applied) / (kFemaleI.admitted / kFemaleI.applied);
    const double air2 = (kMaleII.admitted / kMaleII.applied) / (kFemaleII.admitted / kFemaleII.applied);
    const auto c = cair(t, "admitted", "1", "gender", "dept");
    REQUIRE(c.strata.size() == 2);
    CHECK(c.strata[0].label == "I");
    CHECK(c.strata[0].weight == doctest::Approx(w1).epsilon(1e-12));
    CHECK(c.strata[0].air == doctest::Approx(air1).epsilon(1e-12));
    CHECK(c.strata[1].air == doctest::Approx(air2).epsilon(1e-12));
    CHECK(c.value == doctest::Approx(w1 * air1 + (1 - w1) * air2).epsilon(1e-12));
    CHECK(std::abs(c.strata[0].air - 0.92) <= 0.01);
    CHECK(std::abs(c.strata[1].air - 0.94) <= 0.01);
    CHECK(std::abs(c.value - 0.93) <= 0.01);
    CHECK(c.value >= std::min(air1, air2));
    CHECK(c.value <= std::max(air1, air2));
    // Women have the higher rate within both departments.
    CHECK(c.strata[0].detail.reference == "female");
    CHECK(c.strata[1].detail.reference == "female");
}

TEST_CASE("air: equal rates, explicit reference and scale freedom") {
    const auto eq = air(rates_table({{"a", {3, 10}}, {"b", {6, 20}}}), "y", "yes", "g");
    for (const auto& g : eq.groups) {
        CHECK(g.air == doctest::Approx(1.0));
        CHECK_FALSE(g.below_80);
    }
    const auto base = rates_table({{"a", {3, 10}}, {"b", {8, 10}}, {"c", {5, 10}}});
    const auto ref = air(base, "y", "yes", "g", std::string("c"));
    CHECK(ref.reference == "c");
    CHECK(group(ref, "b").air == doctest::Approx(1.6));
    CHECK(group(ref, "a").air == doctest::Approx(0.6));
    const auto once = air(base, "y", "yes", "g");
    const auto twice = air(rates_table({{"a", {3, 10}}, {"b", {8, 10}}, {"c", {5, 10}}}, 2), "y", "yes", "g");
    for (const auto& g : once.groups) CHECK(group(twice, g.label).air == g.air);
}

TEST_CASE("single stratum cair equals its marginal air") {
    auto t = rates_table({{"a", {4, 10}}, {"b", {7, 10}}});
    t = t.with_column(Column::from_labels("d", std::vector<std::string>(t.n_rows(), "only")));
    const auto c = cair(t, "y", "yes", "g", "d");
    CHECK(c.value == doctest::Approx(group(air(t, "y", "yes", "g"), "a").air));
}

TEST_CASE("undefined ratios raise") {
    CHECK_THROWS_AS(air(rates_table({{"a", {0, 10}}, {"b", {0, 10}}}), "y", "yes", "g"), Error);
    CHECK_THROWS_AS(air(rates_table({{"a", {1, 10}}, {"b", {0, 10}}}), "y", "yes", "g", std::string("b")), Error);
    CHECK_THROWS_AS(air(rates_table({{"a", {1, 10}}}), "y", "yes", "g", std::string("zz")), Error);
    // Group b never appears in stratum 2.
    std::vector<std::string> g{"a", "b", "a", "a"}, y{"yes", "no", "yes", "no"}, d{"1", "1", "2", "2"};
    const Table t("gap", {Column::from_labels("g", g), Column::from_labels("y", y), Column::from_labels("d", d)});
    try {
        cair(t, "y", "yes", "g", "d");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Undefined);
        CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
}

TEST_CASE("alfa on berkeley: no residual gender effect given department") {
    const auto r = alfa_test(berkeley_admissions(), "admitted", {"gender"}, {"dept"}, {}, 99, 5);
    CHECK(r.alpha_bits <= 0.01);
    CHECK(r.pvalue > 0.5);
    CHECK_FALSE(r.marginal_only);
    CHECK(r.B == 99);
}

TEST_CASE("alfa with y a function of the admissible features") {
    std::mt19937_64 rng(21);
    const std::size_t n = 2000;
    std::vector<std::string> s(n), a(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int sv = static_cast<int>(rng() % 2);
        // A depends on S, Y on A only.
        const int av = static_cast<int>(rng() % 3) + (sv && rng() % 2 ? 1 : 0);
        s[i] = std::to_string(sv);
        a[i] = std::to_string(av);
        y[i] = av >= 2 ? "1" : "0";
    }
    const Table t("det", {Column::from_labels("S", s), Column::from_labels("A", a), Column::from_labels("Y", y)});
    const auto r = alfa_test(t, "Y", {"S"}, {"A"}, {}, 49, 3);
    CHECK(r.alpha_bits <= 0.02);
    CHECK(r.pvalue > 0.1);
    // Marginally S is informative about Y through A.
    const auto m = alfa_test(t, "Y", {"S"}, {}, {}, 19, 3);
    CHECK(m.marginal_only);
    CHECK(m.alpha_bits > r.alpha_bits);
}

TEST_CASE("model ranking") {
    const auto t = gen_planted_bias(1500, 4);
    std::vector<std::string> fair(t.n_rows()), proxy(t.n_rows()), constant(t.n_rows(), "1");
    const auto& x1 = t.column("X1");
    const auto& z = t.column("Z");
    for (std::size_t i = 0; i < t.n_rows(); ++i) {
        fair[i] = x1.value(i) > 0 ? "1" : "0";
        proxy[i] = x1.value(i) + 2.0 * (z.value(i) - 0.5) > 0 ? "1" : "0";
    }
    const std::vector<std::string> prot{"S"}, adm{"X1", "X2"};
    const auto ranked = rank_models_alfa({{"proxy", proxy}, {"fair", fair}, {"flat", constant}}, t, prot, adm, {}, 19, 2);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked.back().name == "proxy");
    const auto flat = std::find_if(ranked.begin(), ranked.end(), [](const RankedModel& m) { return m.name == "flat"; });
    CHECK(flat->alpha_bits == 0.0);
    CHECK(ranked[0].alpha_bits <= ranked[1].alpha_bits);
    CHECK(ranked[1].alpha_bits < ranked[2].alpha_bits);

    // Renaming models permutes names but not the order of the prediction vectors.
    const std::map<std::string, std::string> rename{{"proxy", "zeta"}, {"fair", "alpha"}, {"flat", "mu"}};
    const auto renamed = rank_models_alfa({{"zeta", proxy}, {"alpha", fair}, {"mu", constant}}, t, prot, adm, {}, 19, 2);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(renamed[i].name == rename.at(ranked[i].name));
        CHECK(renamed[i].alpha_bits == ranked[i].alpha_bits);
    }

    const auto tie = rank_models_alfa({{"b", fair}, {"a", fair}}, t, prot, adm, {}, 19, 2);
    CHECK(tie[0].name == "a");
    CHECK(tie[0].alpha_bits == tie[1].alpha_bits);

    CHECK_THROWS_AS(rank_models_alfa({{"short", {"1", "0"}}}, t, prot, adm, {}, 19, 2), Error);
}

TEST_CASE("report json") {
    const auto t = berkeley_admissions();
    const nlohmann::json a = air(t, "admitted", "1", "gender");
    CHECK(a.at("reference") == "male");
    CHECK(a.at("groups").size() == 2);
    const nlohmann::json c = cair(t, "admitted", "1", "gender", "dept");
    CHECK(c.at("strata").size() == 2);
    CHECK(c.contains("value"));
}
