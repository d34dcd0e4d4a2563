#pragma once

#include "admissible/table.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

/// Kind and category table of a model input, frozen at fit time.
struct FeatureSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> categories;
};

/// Model-ready view of one input column, coded against a FeatureSchema.
struct EncodedColumn {
    bool categorical = false;
    std::vector<double> values;
    std::vector<std::int32_t> codes;
    std::vector<std::uint8_t> missing;
    std::size_t n_levels = 0;
};

std::vector<FeatureSchema> feature_schema(const Table& table, std::span<const std::string> features);

/// Encodes `table` against a frozen schema. Categorical labels are matched by
/// text; levels unseen at fit time are treated as missing.
std::vector<EncodedColumn> encode_features(const Table& table,
                                           std::span<const FeatureSchema> schema);

/// Class labels (observed levels, in category-table order) and per-row class
/// indices of a categorical target.
struct EncodedTarget {
    std::vector<std::string> classes;
    std::vector<int> y;
};

EncodedTarget encode_target(const Table& table, const std::string& target);
/// Encodes against a fixed class list; rows whose label is not listed are an error.
std::vector<int> encode_target_as(const Table& table, const std::string& target,
                                  std::span<const std::string> classes);

/// A binary split on one feature. Numeric: left when x <= threshold.
/// Categorical: per training level, 1 = left, 0 = right, 2 = not seen at this
/// node (follows the missing direction).
struct Split {
    int feature = -1;
    double threshold = 0.0;
    std::vector<std::uint8_t> level_side;
    bool missing_left = true;

    bool goes_left(const EncodedColumn& col, std::size_t row) const {
        if (col.missing[row]) return missing_left;
        if (!col.categorical) return col.values[row] <= threshold;
        const auto code = static_cast<std::size_t>(col.codes[row]);
        if (code >= level_side.size() || level_side[code] == 2) return missing_left;
        return level_side[code] == 1;
    }
};

void to_json(nlohmann::json& j, const FeatureSchema& f);
void from_json(const nlohmann::json& j, FeatureSchema& f);

/// JSON form names categories by label so it survives re-coding.
nlohmann::json split_to_json(const Split& s, std::span<const FeatureSchema> schema);
Split split_from_json(const nlohmann::json& j, std::span<const FeatureSchema> schema);

}  // namespace admissible
