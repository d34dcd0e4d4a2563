#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace admissible {

enum class ColumnKind { Numeric, Categorical };

const char* to_string(ColumnKind kind) noexcept;

/// One typed column. Missing cells are carried by `missing`; the payload
/// entry under a missing cell is meaningless (0.0 for numeric, -1 for codes).
class Column {
public:
    static Column numeric(std::string name, std::vector<double> values,
                          std::vector<std::uint8_t> missing = {});
    static Column categorical(std::string name, std::vector<std::int32_t> codes,
                              std::vector<std::string> categories,
                              std::vector<std::uint8_t> missing = {});
    /// Builds a categorical column from raw labels; categories are ordered by
    /// first appearance. Empty labels become missing.
    static Column from_labels(std::string name, std::span<const std::string> labels);

    const std::string& name() const noexcept { return name_; }
    ColumnKind kind() const noexcept { return kind_; }
    bool is_numeric() const noexcept { return kind_ == ColumnKind::Numeric; }
    bool is_categorical() const noexcept { return kind_ == ColumnKind::Categorical; }
    std::size_t size() const noexcept { return missing_.size(); }

    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::int32_t>& codes() const noexcept { return codes_; }
    const std::vector<std::string>& categories() const noexcept { return categories_; }
    const std::vector<std::uint8_t>& missing_mask() const noexcept { return missing_; }

    bool is_missing(std::size_t row) const { return missing_[row] != 0; }
    bool has_missing() const noexcept;
    double value(std::size_t row) const { return values_[row]; }
    std::int32_t code(std::size_t row) const { return codes_[row]; }
    /// Label of a categorical cell, or the empty string when missing.
    const std::string& label(std::size_t row) const;
    /// Code of `label` in the category table, if present.
    std::optional<std::int32_t> code_of(std::string_view label) const;
    /// Number of distinct observed (non-missing) categories.
    std::size_t observed_levels() const;

    Column take(std::span<const std::size_t> rows) const;
    Column renamed(std::string name) const;

private:
    Column() = default;
    void validate() const;

    std::string name_;
    ColumnKind kind_ = ColumnKind::Numeric;
    std::vector<double> values_;
    std::vector<std::int32_t> codes_;
    std::vector<std::string> categories_;
    std::vector<std::uint8_t> missing_;
};

/// Immutable columnar dataset.
class Table {
public:
    Table() = default;
    Table(std::string name, std::vector<Column> columns);

    const std::string& name() const noexcept { return name_; }
    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return columns_.size(); }
    const std::vector<Column>& columns() const noexcept { return columns_; }

    bool has(std::string_view column) const;
    std::size_t index_of(std::string_view column) const;  // throws Schema
    const Column& column(std::string_view column) const;  // throws Schema
    const Column& column(std::size_t index) const { return columns_.at(index); }
    std::vector<std::string> column_names() const;

    Table take(std::span<const std::size_t> rows) const;
    Table select(std::span<const std::string> names) const;
    Table with_column(Column column) const;  // appends or replaces by name

private:
    std::string name_;
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

/// Role assignment for a modelling task.
struct TaskSpec {
    std::string target;
    std::vector<std::string> protected_attrs;
    std::vector<std::string> features;
    std::optional<std::string> positive_label;

    /// Checks role disjointness and that the target is categorical with at
    /// least two observed classes.
    void validate(const Table& table) const;
};

struct ColumnSchema {
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> categories;  // fixed category order, categorical only
};

using CsvSchema = std::map<std::string, ColumnSchema>;

Table load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Table parse_csv(std::string_view text, std::string name = "table", const CsvSchema& schema = {});
std::string to_csv(const Table& table);
void write_csv(const Table& table, const std::filesystem::path& path);
/// Schema that reproduces `table` column kinds and category tables on reload.
CsvSchema schema_of(const Table& table);

/// Replaces each named numeric column by its empirical CDF values
/// #{x_k <= x_i} / n.
Table rank_transform(const Table& table, std::span<const std::string> cols);

std::pair<Table, Table> train_test_split(const Table& table, double test_fraction,
                                         std::uint64_t seed);

/// Row indices of a seeded shuffled partition; test indices come first.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

/// Turns the named numeric columns into categorical ones labelled by each
/// value's shortest round-trip decimal form; other columns pass through.
Table as_categorical(const Table& table, std::span<const std::string> names);

/// `{name, n_rows, columns:[{name, kind, categories?, values, missing}]}`;
/// values holds numbers or labels, null where `missing` lists the row.
void to_json(nlohmann::json& j, const Table& table);
void from_json(const nlohmann::json& j, Table& table);

}  // namespace admissible
