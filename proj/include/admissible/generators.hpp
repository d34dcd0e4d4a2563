#pragma once

#include "admissible/infotheory.hpp"
#include "admissible/table.hpp"

#include <cstdint>
#include <filesystem>

namespace admissible {

/// X, S ~ Bernoulli(0.5) and Y = X xor S; columns "X", "S", "Y" (labels "0"/"1").
/// Population I(Y; X | S) = 1 bit.
Table gen_xor(std::size_t n, std::uint64_t seed);

/// Same X and S, but Y ~ Bernoulli(0.5) independently; I(Y; X | S) = 0.
Table gen_xor_null(std::size_t n, std::uint64_t seed);

/// Correlated-features design: X_1..X_{p-1} iid N(0,1), the imitator
/// X_p = 2 X_1 - X_2 + eps with eps ~ N(0, variance 2), and binary Y with
/// logit 3 sin(X_1) - 2 X_2. Columns "X1".."Xp", "Y".
Table gen_correlated(std::size_t n, std::size_t p, std::uint64_t seed);

/// i.i.d. draws from a finite joint; columns "Y", "X", "S" with labels "0".."d-1".
Table sample_joint(const DiscreteJoint& joint, std::size_t n, std::uint64_t seed);

/// Departments B and D of the 1973 Berkeley admissions: columns "dept"
/// (I/II), "gender" (male/female), "admitted" (1/0); 1377 rows.
Table berkeley_admissions();

/// Synthetic lending data with a planted protected-attribute effect.
/// Columns: "S" (protected, 0/1), "X1", "X2" (admissible, independent of S),
/// "Z" (proxy, S plus small noise), "N" (noise), "Y".
/// Y has logit 1.5 X1 - X2 + bias_strength (S - 1/2).
Table gen_planted_bias(std::size_t n, std::uint64_t seed, double bias_strength = 1.2);

/// All 432 attribute combinations of a MONK problem (1, 2 or 3), labelled
/// by the noise-free rule. Columns "X1".."X6" (categorical), "Y".
Table monk_full(int problem);

/// Reads a UCI MONK file ("class a1 .. a6 id" per line).
Table load_monk(const std::filesystem::path& path);

}  // namespace admissible
