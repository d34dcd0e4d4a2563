#include "admissible/generators.hpp"

#include "admissible/error.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace admissible {

namespace {

const std::vector<std::string> kBinary{"0", "1"};

Column binary_column(std::string name, const std::vector<std::int32_t>& bits) {
    return Column::categorical(std::move(name), bits, kBinary);
}

std::vector<std::string> index_labels(std::size_t levels) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < levels; ++i) out.push_back(std::to_string(i));
    return out;
}

void require_rows(std::size_t n) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "generator needs n >= 1");
}

}  // namespace

Table gen_xor(std::size_t n, std::uint64_t seed) {
    require_rows(n);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::int32_t> x(n), s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = coin(rng);
        s[i] = coin(rng);
        y[i] = x[i] ^ s[i];
    }
    return Table("xor", {binary_column("X", x), binary_column("S", s), binary_column("Y", y)});
}

Table gen_xor_null(std::size_t n, std::uint64_t seed) {
    require_rows(n);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::int32_t> x(n), s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = coin(rng);
        s[i] = coin(rng);
        y[i] = coin(rng);
    }
    return Table("xor_null", {binary_column("X", x), binary_column("S", s), binary_column("Y", y)});
}

Table gen_correlated(std::size_t n, std::size_t p, std::uint64_t seed) {
    require_rows(n);
    if (p < 3) throw Error(ErrorKind::InvalidArgument, "gen_correlated needs p >= 3");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double eps_sd = std::sqrt(2.0);

    std::vector<std::vector<double>> x(p, std::vector<double>(n));
    std::vector<std::int32_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j + 1 < p; ++j) x[j][i] = normal(rng);
        x[p - 1][i] = 2.0 * x[0][i] - x[1][i] + eps_sd * normal(rng);
        const double logit = 3.0 * std::sin(x[0][i]) - 2.0 * x[1][i];
        const double prob = 1.0 / (1.0 + std::exp(-logit));
        y[i] = unit(rng) < prob ? 1 : 0;
    }
    std::vector<Column> cols;
    for (std::size_t j = 0; j < p; ++j)
        cols.push_back(Column::numeric("X" + std::to_string(j + 1), std::move(x[j])));
    cols.push_back(binary_column("Y", y));
    return Table("correlated", std::move(cols));
}

Table sample_joint(const DiscreteJoint& joint, std::size_t n, std::uint64_t seed) {
    require_rows(n);
    std::mt19937_64 rng(seed);
    const auto& pmf = joint.pmf();
    std::discrete_distribution<std::size_t> cell(pmf.begin(), pmf.end());
    const auto [ny, nx, ns] = joint.dims();
    std::vector<std::int32_t> y(n), x(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = cell(rng);
        s[i] = static_cast<std::int32_t>(c % ns);
        x[i] = static_cast<std::int32_t>((c / ns) % nx);
        y[i] = static_cast<std::int32_t>(c / (ns * nx));
    }
    return Table("joint", {Column::categorical("Y", y, index_labels(ny)),
                           Column::categorical("X", x, index_labels(nx)),
                           Column::categorical("S", s, index_labels(ns))});
}

Table berkeley_admissions() {
    struct Cell {
        std::int32_t dept, gender, admitted, count;
    };
    // dept: 0 = I, 1 = II; gender: 0 = male, 1 = female; admitted: code of "1"/"0"
    const std::array<Cell, 8> cells{{{0, 0, 0, 353},
                                     {0, 0, 1, 207},
                                     {0, 1, 0, 17},
                                     {0, 1, 1, 8},
                                     {1, 0, 0, 138},
                                     {1, 0, 1, 279},
                                     {1, 1, 0, 131},
                                     {1, 1, 1, 244}}};
    std::vector<std::int32_t> dept, gender, admitted;
    for (const auto& c : cells)
        for (std::int32_t i = 0; i < c.count; ++i) {
            dept.push_back(c.dept);
            gender.push_back(c.gender);
            admitted.push_back(c.admitted);
        }
    return Table("berkeley", {Column::categorical("dept", dept, {"I", "II"}),
                              Column::categorical("gender", gender, {"male", "female"}),
                              Column::categorical("admitted", admitted, {"1", "0"})});
}

Table gen_planted_bias(std::size_t n, std::uint64_t seed, double bias_strength) {
    require_rows(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::int32_t> s(n), y(n);
    std::vector<double> x1(n), x2(n), z(n), noise(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = coin(rng);
        x1[i] = normal(rng);
        x2[i] = normal(rng);
        z[i] = static_cast<double>(s[i]) + 0.25 * normal(rng);
        noise[i] = normal(rng);
        const double logit = 1.5 * x1[i] - x2[i] + bias_strength * (static_cast<double>(s[i]) - 0.5);
        y[i] = unit(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0;
    }
    return Table("planted_bias",
                 {binary_column("S", s), Column::numeric("X1", std::move(x1)),
                  Column::numeric("X2", std::move(x2)), Column::numeric("Z", std::move(z)),
                  Column::numeric("N", std::move(noise)), binary_column("Y", y)});
}

namespace {

constexpr std::array<int, 6> kMonkLevels{3, 3, 2, 3, 4, 2};

int monk_label(int problem, const std::array<int, 6>& a) {
    switch (problem) {
    case 1: return (a[0] == a[1] || a[4] == 1) ? 1 : 0;
    case 2: {
        int ones = 0;
        for (int v : a) ones += v == 1;
        return ones == 2 ? 1 : 0;
    }
    case 3: return ((a[4] == 3 && a[3] == 1) || (a[4] != 4 && a[1] != 3)) ? 1 : 0;
    default: throw Error(ErrorKind::InvalidArgument, "MONK problem must be 1, 2 or 3");
    }
}

Table monk_table(std::string name, const std::vector<std::array<int, 6>>& rows,
                 const std::vector<int>& labels) {
    std::vector<Column> cols;
    for (std::size_t j = 0; j < 6; ++j) {
        std::vector<std::int32_t> codes;
        for (const auto& r : rows) codes.push_back(r[j] - 1);
        std::vector<std::string> cats;
        for (int v = 1; v <= kMonkLevels[j]; ++v) cats.push_back(std::to_string(v));
        cols.push_back(Column::categorical("X" + std::to_string(j + 1), std::move(codes), std::move(cats)));
    }
    std::vector<std::int32_t> y(labels.begin(), labels.end());
    cols.push_back(binary_column("Y", y));
    return Table(std::move(name), std::move(cols));
}

}  // namespace

Table monk_full(int problem) {
    std::vector<std::array<int, 6>> rows;
    std::vector<int> labels;
    std::array<int, 6> a{};
    for (a[0] = 1; a[0] <= 3; ++a[0])
        for (a[1] = 1; a[1] <= 3; ++a[1])
            for (a[2] = 1; a[2] <= 2; ++a[2])
                for (a[3] = 1; a[3] <= 3; ++a[3])
                    for (a[4] = 1; a[4] <= 4; ++a[4])
                        for (a[5] = 1; a[5] <= 2; ++a[5]) {
                            rows.push_back(a);
                            labels.push_back(monk_label(problem, a));
                        }
    return monk_table("monk" + std::to_string(problem), rows, labels);
}

Table load_monk(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
    std::vector<std::array<int, 6>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        int cls = 0;
        if (!(fields >> cls)) continue;
        std::array<int, 6> a{};
        for (std::size_t j = 0; j < 6; ++j) {
            if (!(fields >> a[j]) || a[j] < 1 || a[j] > kMonkLevels[j])
                throw Error(ErrorKind::Parse,
                            path.string() + ": bad attribute on line " + std::to_string(line_no));
        }
        if (cls != 0 && cls != 1)
            throw Error(ErrorKind::Parse, path.string() + ": bad class on line " + std::to_string(line_no));
        rows.push_back(a);
        labels.push_back(cls);
    }
    if (rows.empty()) throw Error(ErrorKind::Parse, path.string() + ": no records");
    return monk_table(path.stem().string(), rows, labels);
}

}  // namespace admissible
