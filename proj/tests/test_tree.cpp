#include "helpers.hpp"

#include "admissible/error.hpp"
#include "admissible/generators.hpp"
#include "admissible/tree.hpp"

#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>

using namespace admissible;

namespace {

double accuracy(const ProbMatrix& p, const Table& t, const std::string& y, const std::vector<std::string>& classes) {
    const auto pred = p.argmax();
    const auto truth = encode_target_as(t, y, classes);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// y = 1 exactly in the quadrant a > 0.3, b > -0.2.
Table quadrant(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> a(n), b(n), c(n);
    std::vector<std::string> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
        c[i] = u(rng);
        y[i] = a[i] > 0.3 && b[i] > -0.2 ? "in" : "out";
    }
    return Table("quad", {Column::numeric("a", a), Column::numeric("b", b), Column::numeric("c", c),
                          Column::from_labels("y", y)});
}

struct BestSplit {
    std::size_t feature = 0;
    double lo = 0, hi = 0;  // any threshold in [lo, hi) realises the split
    double impurity = 1e300;
};

double gini(double pos, double n) {
    const double p = pos / n;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

// Exhaustive search for the root split minimising weighted Gini impurity.
BestSplit brute_force_root(const Table& t, const std::vector<std::string>& features, const std::string& y,
                           const std::string& positive, std::size_t min_leaf) {
    BestSplit best;
    const auto& ycol = t.column(y);
    for (std::size_t f = 0; f < features.size(); ++f) {
        const auto& col = t.column(features[f]);
        std::vector<std::size_t> order(t.n_rows());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto l, auto r) { return col.value(l) < col.value(r); });
        double total_pos = 0;
        for (std::size_t i : order) total_pos += ycol.label(i) == positive;
        double left_pos = 0;
        const double n = static_cast<double>(order.size());
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            left_pos += ycol.label(order[k]) == positive;
            const double lo = col.value(order[k]), hi = col.value(order[k + 1]);
            if (lo == hi || k + 1 < min_leaf || order.size() - k - 1 < min_leaf) continue;
            const double nl = static_cast<double>(k + 1), nr = n - nl;
            const double imp = nl / n * gini(left_pos, nl) + nr / n * gini(total_pos - left_pos, nr);
            if (imp < best.impurity - 1e-12) best = {f, lo, hi, imp};
        }
    }
    return best;
}

}  // namespace

TEST_CASE("pure input gives a single one-hot leaf") {
    const Table t("pure", {Column::numeric("x", {1, 2, 3, 4, 5}), testing::labels("y", {"a", "a", "a", "a", "a"})});
    const std::vector<std::string> f{"x"};
    const auto tree = fit_tree(t, "y", f, {});
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].probs == std::vector<double>{1.0});
    const auto p = predict_tree(tree, t);
    for (std::size_t i = 0; i < p.rows; ++i) CHECK(p.at(i, 0) == 1.0);
}

TEST_CASE("xor at depth 2 is fitted exactly") {
    const auto t = gen_xor(400, 2);
    const std::vector<std::string> f{"X", "S"};
    TreeParams p;
    p.max_depth = 2;
    const auto tree = fit_tree(t, "Y", f, p);
    CHECK(accuracy(predict_tree(tree, t), t, "Y", tree.classes) == 1.0);
    CHECK(tree.depth() == 2);
    // Any depth-1 rule is at chance on xor, so depth 2 is the minimum.
    p.max_depth = 1;
    const auto stump = fit_tree(t, "Y", f, p);
    CHECK(accuracy(predict_tree(stump, t), t, "Y", stump.classes) <= 0.6);
}

TEST_CASE("quadrant rule: root split matches exhaustive search, depth 2 is exact") {
    const auto t = quadrant(600, 5);
    const std::vector<std::string> f{"a", "b", "c"};
    TreeParams p;
    p.max_depth = 2;
    p.min_leaf = 5;
    const auto tree = fit_tree(t, "y", f, p);
    const auto oracle = brute_force_root(t, f, "y", "in", 5);
    REQUIRE_FALSE(tree.nodes[0].is_leaf());
    CHECK(static_cast<std::size_t>(tree.nodes[0].split.feature) == oracle.feature);
    CHECK(tree.nodes[0].split.threshold >= oracle.lo);
    CHECK(tree.nodes[0].split.threshold < oracle.hi);
    CHECK(accuracy(predict_tree(tree, t), t, "y", tree.classes) == 1.0);
    CHECK(tree.used_features() == std::set<std::string>{"a", "b"});
}

TEST_CASE("structural limits and feature confinement") {
    const auto t = gen_planted_bias(800, 3);
    const std::vector<std::string> f{"X1", "X2", "N"};
    for (int depth : {1, 2, 3, 5}) {
        TreeParams p;
        p.max_depth = depth;
        p.min_leaf = 10;
        const auto tree = fit_tree(t, "Y", f, p);
        CHECK(tree.depth() <= static_cast<std::size_t>(depth));
        for (const auto& name : tree.used_features()) CHECK(std::find(f.begin(), f.end(), name) != f.end());
        for (const auto& node : tree.nodes) {
            CHECK(node.n >= 10);
            if (!node.is_leaf()) CHECK(tree.nodes[node.left].n + tree.nodes[node.right].n == node.n);
        }
    }
}

TEST_CASE("missing cells follow the stored default direction") {
    std::vector<double> x;
    std::vector<std::uint8_t> miss;
    std::vector<std::string> y;
    for (int i = 0; i < 100; ++i) {
        x.push_back(i);
        miss.push_back(i % 10 == 0);
        y.push_back(i < 50 ? "lo" : "hi");
    }
    const Table t("m", {Column::numeric("x", x, miss), Column::from_labels("y", y)});
    const std::vector<std::string> f{"x"};
    TreeParams p;
    p.min_leaf = 5;
    const auto tree = fit_tree(t, "y", f, p);
    REQUIRE_FALSE(tree.nodes[0].is_leaf());
    const Table probe("probe", {Column::numeric("x", {0.0}, {1}), testing::labels("y", {"lo"})});
    const auto pr = predict_tree(tree, probe);
    const auto& root = tree.nodes[0];
    int leaf = root.split.missing_left ? root.left : root.right;
    while (!tree.nodes[static_cast<std::size_t>(leaf)].is_leaf()) {
        const auto& node = tree.nodes[static_cast<std::size_t>(leaf)];
        leaf = node.split.missing_left ? node.left : node.right;
    }
    CHECK(std::vector<double>(pr.row(0).begin(), pr.row(0).end()) == tree.nodes[static_cast<std::size_t>(leaf)].probs);
}

TEST_CASE("categorical splits on many levels") {
    std::mt19937_64 rng(4);
    std::vector<std::string> c, y;
    for (int i = 0; i < 600; ++i) {
        const int level = static_cast<int>(rng() % 12);
        c.push_back("L" + std::to_string(level));
        y.push_back(level % 3 == 0 ? "a" : "b");
    }
    const Table t("cat", {Column::from_labels("c", c), Column::from_labels("y", y)});
    const std::vector<std::string> f{"c"};
    const auto tree = fit_tree(t, "y", f, {});
    CHECK(accuracy(predict_tree(tree, t), t, "y", tree.classes) == 1.0);
}

TEST_CASE("json round trip is bit exact") {
    const auto t = gen_planted_bias(500, 8);
    const std::vector<std::string> f{"X1", "X2", "Z"};
    const auto tree = fit_tree(t, "Y", f, {});
    const nlohmann::json j = tree;
    CHECK(j.at("kind") == "tree");
    const auto back = nlohmann::json::parse(j.dump()).get<TreeModel>();
    CHECK(back.nodes.size() == tree.nodes.size());
    CHECK(predict_tree(back, t).probs == predict_tree(tree, t).probs);
    CHECK(nlohmann::json(back).dump() == j.dump());
}

TEST_CASE("weighted forest never draws zero-probability features") {
    const auto t = gen_planted_bias(600, 2);
    const std::vector<std::string> f{"X1", "X2", "Z", "N"};
    const std::vector<double> probs{0.5, 0.5, 0.0, 0.0};
    TreeParams p;
    p.max_depth = 3;
    p.seed = 3;
    const auto forest = fit_weighted_forest(t, "Y", f, probs, 10, p);
    CHECK(forest.trees.size() == 10);
    for (const auto& tree : forest.trees)
        for (const auto& name : tree.used_features()) CHECK((name == "X1" || name == "X2"));
    const auto pr = forest.predict(t);
    for (std::size_t i = 0; i < pr.rows; ++i) CHECK(pr.at(i, 0) + pr.at(i, 1) == doctest::Approx(1.0));
    const std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(fit_weighted_forest(t, "Y", f, bad, 10, p), Error);
}

TEST_CASE("parameter validation") {
    const auto t = gen_xor(50, 1);
    const std::vector<std::string> f{"X"};
    TreeParams p;
    p.max_depth = -1;
    CHECK_THROWS_AS(fit_tree(t, "Y", f, p), Error);
    p = {};
    p.min_leaf = 0;
    CHECK_THROWS_AS(fit_tree(t, "Y", f, p), Error);
}
