#include "admissible/table.hpp"

#include "admissible/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace admissible {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::DuplicateHeader: return "duplicate_header";
    case ErrorKind::RaggedRow: return "ragged_row";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Separation: return "separation";
    case ErrorKind::Undefined: return "undefined";
    }
    return "unknown";
}

const char* to_string(ColumnKind kind) noexcept {
    return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

// ---------------------------------------------------------------------------
// Column

Column Column::numeric(std::string name, std::vector<double> values,
                       std::vector<std::uint8_t> missing) {
    Column c;
    c.name_ = std::move(name);
    c.kind_ = ColumnKind::Numeric;
    if (missing.empty()) missing.assign(values.size(), 0);
    c.values_ = std::move(values);
    c.missing_ = std::move(missing);
    for (std::size_t i = 0; i < c.values_.size() && i < c.missing_.size(); ++i)
        if (c.missing_[i]) c.values_[i] = 0.0;
    c.validate();
    return c;
}

Column Column::categorical(std::string name, std::vector<std::int32_t> codes,
                           std::vector<std::string> categories,
                           std::vector<std::uint8_t> missing) {
    Column c;
    c.name_ = std::move(name);
    c.kind_ = ColumnKind::Categorical;
    if (missing.empty()) missing.assign(codes.size(), 0);
    c.codes_ = std::move(codes);
    c.categories_ = std::move(categories);
    c.missing_ = std::move(missing);
    for (std::size_t i = 0; i < c.codes_.size() && i < c.missing_.size(); ++i)
        if (c.missing_[i]) c.codes_[i] = -1;
    c.validate();
    return c;
}

Column Column::from_labels(std::string name, std::span<const std::string> labels) {
    std::vector<std::string> categories;
    std::unordered_map<std::string, std::int32_t> index;
    std::vector<std::int32_t> codes(labels.size(), -1);
    std::vector<std::uint8_t> missing(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].empty()) {
            missing[i] = 1;
            continue;
        }
        auto [it, inserted] =
            index.try_emplace(labels[i], static_cast<std::int32_t>(categories.size()));
        if (inserted) categories.push_back(labels[i]);
        codes[i] = it->second;
    }
    return categorical(std::move(name), std::move(codes), std::move(categories),
                       std::move(missing));
}

void Column::validate() const {
    if (name_.empty()) throw Error(ErrorKind::Schema, "column name must be non-empty");
    if (kind_ == ColumnKind::Numeric) {
        if (values_.size() != missing_.size())
            throw Error(ErrorKind::Schema, "column '" + name_ + "': mask length mismatch");
        return;
    }
    if (codes_.size() != missing_.size())
        throw Error(ErrorKind::Schema, "column '" + name_ + "': mask length mismatch");
    std::set<std::string> seen;
    for (const auto& cat : categories_) {
        if (cat.empty())
            throw Error(ErrorKind::Schema, "column '" + name_ + "': empty category label");
        if (!seen.insert(cat).second)
            throw Error(ErrorKind::Schema,
                        "column '" + name_ + "': duplicate category '" + cat + "'");
    }
    const auto n_cat = static_cast<std::int32_t>(categories_.size());
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (missing_[i]) continue;
        if (codes_[i] < 0 || codes_[i] >= n_cat)
            throw Error(ErrorKind::Schema, "column '" + name_ + "': category code out of range");
    }
}

bool Column::has_missing() const noexcept {
    return std::any_of(missing_.begin(), missing_.end(), [](auto m) { return m != 0; });
}

const std::string& Column::label(std::size_t row) const {
    static const std::string empty;
    if (kind_ != ColumnKind::Categorical || missing_[row]) return empty;
    return categories_[static_cast<std::size_t>(codes_[row])];
}

std::optional<std::int32_t> Column::code_of(std::string_view label) const {
    for (std::size_t i = 0; i < categories_.size(); ++i)
        if (categories_[i] == label) return static_cast<std::int32_t>(i);
    return std::nullopt;
}

std::size_t Column::observed_levels() const {
    std::vector<std::uint8_t> seen(categories_.size(), 0);
    for (std::size_t i = 0; i < codes_.size(); ++i)
        if (!missing_[i]) seen[static_cast<std::size_t>(codes_[i])] = 1;
    return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
}

Column Column::take(std::span<const std::size_t> rows) const {
    Column c;
    c.name_ = name_;
    c.kind_ = kind_;
    c.categories_ = categories_;
    c.missing_.reserve(rows.size());
    for (auto r : rows) c.missing_.push_back(missing_.at(r));
    if (kind_ == ColumnKind::Numeric) {
        c.values_.reserve(rows.size());
        for (auto r : rows) c.values_.push_back(values_[r]);
    } else {
        c.codes_.reserve(rows.size());
        for (auto r : rows) c.codes_.push_back(codes_[r]);
    }
    return c;
}

Column Column::renamed(std::string name) const {
    Column c = *this;
    c.name_ = std::move(name);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Table

Table::Table(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
    n_rows_ = columns_.empty() ? 0 : columns_.front().size();
    std::set<std::string> names;
    for (const auto& c : columns_) {
        if (c.size() != n_rows_)
            throw Error(ErrorKind::Schema, "column '" + c.name() + "' has " +
                                               std::to_string(c.size()) + " rows, expected " +
                                               std::to_string(n_rows_));
        if (!names.insert(c.name()).second)
            throw Error(ErrorKind::DuplicateHeader, "duplicate column name '" + c.name() + "'");
    }
}

bool Table::has(std::string_view column) const {
    return std::any_of(columns_.begin(), columns_.end(),
                       [&](const Column& c) { return c.name() == column; });
}

std::size_t Table::index_of(std::string_view column) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name() == column) return i;
    throw Error(ErrorKind::Schema, "no column named '" + std::string(column) + "'");
}

const Column& Table::column(std::string_view column) const {
    return columns_[index_of(column)];
}

std::vector<std::string> Table::column_names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name());
    return out;
}

Table Table::take(std::span<const std::size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) cols.push_back(c.take(rows));
    Table t(name_, std::move(cols));
    t.n_rows_ = rows.size();
    return t;
}

Table Table::select(std::span<const std::string> names) const {
    std::vector<Column> cols;
    for (const auto& n : names) cols.push_back(column(n));
    Table t(name_, std::move(cols));
    if (names.empty()) t.n_rows_ = n_rows_;
    return t;
}

Table Table::with_column(Column column) const {
    auto cols = columns_;
    auto it = std::find_if(cols.begin(), cols.end(),
                           [&](const Column& c) { return c.name() == column.name(); });
    if (it != cols.end())
        *it = std::move(column);
    else
        cols.push_back(std::move(column));
    return Table(name_, std::move(cols));
}

// ---------------------------------------------------------------------------
// TaskSpec

void TaskSpec::validate(const Table& table) const {
    const auto& y = table.column(target);
    if (!y.is_categorical())
        throw Error(ErrorKind::Schema, "target '" + target + "' must be categorical");
    if (y.observed_levels() < 2)
        throw Error(ErrorKind::Degenerate,
                    "target '" + target + "' has fewer than two observed classes");
    std::set<std::string> feats;
    for (const auto& f : features) {
        table.column(f);
        if (f == target) throw Error(ErrorKind::Schema, "target '" + f + "' listed as a feature");
        if (!feats.insert(f).second)
            throw Error(ErrorKind::Schema, "feature '" + f + "' listed twice");
    }
    for (const auto& s : protected_attrs) {
        table.column(s);
        if (s == target)
            throw Error(ErrorKind::Schema, "target '" + s + "' listed as protected");
        if (feats.count(s))
            throw Error(ErrorKind::Schema, "column '" + s + "' is both protected and a feature");
    }
    if (positive_label && !y.code_of(*positive_label))
        throw Error(ErrorKind::Schema, "positive label '" + *positive_label +
                                           "' is not a level of '" + target + "'");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct CsvRecord {
    std::vector<std::string> cells;
    std::size_t line = 0;  // 1-based physical line where the record starts
};

std::vector<CsvRecord> parse_records(std::string_view text) {
    std::vector<CsvRecord> records;
    std::size_t line = 1;
    std::size_t i = 0;
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    while (i < text.size()) {
        CsvRecord rec;
        rec.line = line;
        std::string cell;
        bool end_of_record = false;
        while (!end_of_record) {
            cell.clear();
            if (i < text.size() && text[i] == '"') {
                ++i;
                for (;;) {
                    if (i >= text.size())
                        throw Error(ErrorKind::Parse,
                                    "unterminated quoted field starting on line " +
                                        std::to_string(rec.line));
                    char ch = text[i++];
                    if (ch == '"') {
                        if (i < text.size() && text[i] == '"') {
                            cell.push_back('"');
                            ++i;
                        } else {
                            break;
                        }
                    } else {
                        if (ch == '\n') ++line;
                        cell.push_back(ch);
                    }
                }
            }
            while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
                cell.push_back(text[i++]);
            rec.cells.push_back(cell);
            if (i >= text.size()) {
                end_of_record = true;
            } else if (text[i] == ',') {
                ++i;
            } else {
                if (text[i] == '\r') ++i;
                if (i < text.size() && text[i] == '\n') ++i;
                ++line;
                end_of_record = true;
            }
        }
        const bool blank = rec.cells.size() == 1 && rec.cells[0].empty();
        if (!blank) records.push_back(std::move(rec));
    }
    return records;
}

std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
    const bool needs = s.find_first_of(",\"\r\n") != std::string::npos ||
                       (!s.empty() && (s.front() == ' ' || s.back() == ' '));
    if (!needs) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

}  // namespace

Table parse_csv(std::string_view text, std::string name, const CsvSchema& schema) {
    auto records = parse_records(text);
    if (records.empty()) throw Error(ErrorKind::Parse, "CSV input has no header row");
    const auto header = records.front().cells;
    {
        std::set<std::string> seen;
        for (const auto& h : header) {
            if (h.empty()) throw Error(ErrorKind::Parse, "empty column name in CSV header");
            if (!seen.insert(h).second)
                throw Error(ErrorKind::DuplicateHeader, "duplicate header name '" + h + "'");
        }
    }
    for (const auto& [col, _] : schema)
        if (std::find(header.begin(), header.end(), col) == header.end())
            throw Error(ErrorKind::Schema, "schema names unknown column '" + col + "'");

    const std::size_t n_cols = header.size();
    const std::size_t n_rows = records.size() - 1;
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].cells.size() != n_cols)
            throw Error(ErrorKind::RaggedRow,
                        "ragged row on line " + std::to_string(records[r].line) + ": expected " +
                            std::to_string(n_cols) + " cells, found " +
                            std::to_string(records[r].cells.size()));

    std::vector<Column> columns;
    columns.reserve(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
        std::vector<std::string> cells(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) cells[r] = records[r + 1].cells[c];

        auto override_it = schema.find(header[c]);
        std::optional<ColumnKind> kind;
        if (override_it != schema.end()) kind = override_it->second.kind;

        std::vector<double> numbers(n_rows, 0.0);
        std::vector<std::uint8_t> missing(n_rows, 0);
        bool all_numeric = true;
        for (std::size_t r = 0; r < n_rows; ++r) {
            if (cells[r].empty()) {
                missing[r] = 1;
                continue;
            }
            auto v = parse_double(cells[r]);
            if (!v) {
                all_numeric = false;
                if (kind == ColumnKind::Numeric)
                    throw Error(ErrorKind::Parse, "column '" + header[c] + "', line " +
                                                      std::to_string(records[r + 1].line) +
                                                      ": '" + cells[r] + "' is not numeric");
                continue;
            }
            numbers[r] = *v;
        }
        if (!kind) kind = all_numeric ? ColumnKind::Numeric : ColumnKind::Categorical;

        if (*kind == ColumnKind::Numeric) {
            columns.push_back(Column::numeric(header[c], std::move(numbers), std::move(missing)));
            continue;
        }
        if (override_it != schema.end() && !override_it->second.categories.empty()) {
            const auto& cats = override_it->second.categories;
            std::vector<std::int32_t> codes(n_rows, -1);
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (missing[r]) continue;
                auto it = std::find(cats.begin(), cats.end(), cells[r]);
                if (it == cats.end())
                    throw Error(ErrorKind::Schema, "column '" + header[c] + "': label '" +
                                                       cells[r] + "' not in schema categories");
                codes[r] = static_cast<std::int32_t>(it - cats.begin());
            }
            columns.push_back(
                Column::categorical(header[c], std::move(codes), cats, std::move(missing)));
        } else {
            columns.push_back(Column::from_labels(header[c], cells));
        }
    }
    Table t(std::move(name), std::move(columns));
    return t;
}

Table load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error(ErrorKind::Io, "error reading '" + path.string() + "'");
    return parse_csv(buf.str(), path.stem().string(), schema);
}

std::string to_csv(const Table& table) {
    std::string out;
    const auto& cols = table.columns();
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (c) out.push_back(',');
        out += quote_if_needed(cols[c].name());
    }
    out.push_back('\n');
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out.push_back(',');
            const auto& col = cols[c];
            if (col.is_missing(r)) continue;
            if (col.is_numeric())
                out += format_double(col.value(r));
            else
                out += quote_if_needed(col.label(r));
        }
        out.push_back('\n');
    }
    return out;
}

void write_csv(const Table& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out << to_csv(table);
    if (!out) throw Error(ErrorKind::Io, "error writing '" + path.string() + "'");
}

CsvSchema schema_of(const Table& table) {
    CsvSchema schema;
    for (const auto& c : table.columns())
        schema[c.name()] = ColumnSchema{c.kind(), c.categories()};
    return schema;
}

// ---------------------------------------------------------------------------
// Transforms

Table rank_transform(const Table& table, std::span<const std::string> cols) {
    Table out = table;
    const std::size_t n = table.n_rows();
    for (const auto& name : cols) {
        const auto& col = table.column(name);
        if (!col.is_numeric())
            throw Error(ErrorKind::Schema, "rank_transform: column '" + name + "' is categorical");
        if (col.has_missing())
            throw Error(ErrorKind::Schema,
                        "rank_transform: column '" + name + "' contains missing values");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto& v = col.values();
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> u(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double cdf = static_cast<double>(j + 1) / static_cast<double>(n);
            for (std::size_t k = i; k <= j; ++k) u[order[k]] = cdf;
            i = j + 1;
        }
        out = out.with_column(Column::numeric(name, std::move(u)));
    }
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorKind::InvalidArgument, "test fraction must lie in (0, 1)");
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "need at least two rows to split");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(idx[i], idx[pick(rng)]);
    }
    const auto n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {std::move(test), std::move(train)};
}

std::pair<Table, Table> train_test_split(const Table& table, double test_fraction,
                                         std::uint64_t seed) {
    auto [test, train] = split_indices(table.n_rows(), test_fraction, seed);
    return {table.take(train), table.take(test)};
}

Table as_categorical(const Table& table, std::span<const std::string> names) {
    Table out = table;
    for (const auto& name : names) {
        const auto& col = table.column(name);
        if (col.is_categorical()) continue;
        std::vector<std::string> labels(col.size());
        for (std::size_t r = 0; r < col.size(); ++r)
            if (!col.is_missing(r)) labels[r] = format_double(col.value(r));
        out = out.with_column(Column::from_labels(name, labels));
    }
    return out;
}

void to_json(nlohmann::json& j, const Table& table) {
    using nlohmann::json;
    json cols = json::array();
    for (const auto& col : table.columns()) {
        json values = json::array(), missing = json::array();
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (col.is_missing(r)) {
                values.push_back(nullptr);
                missing.push_back(r);
            } else if (col.is_numeric()) {
                values.push_back(col.value(r));
            } else {
                values.push_back(col.label(r));
            }
        }
        json c{{"name", col.name()}, {"kind", to_string(col.kind())}, {"values", std::move(values)},
               {"missing", std::move(missing)}};
        if (col.is_categorical()) c["categories"] = col.categories();
        cols.push_back(std::move(c));
    }
    j = json{{"name", table.name()}, {"n_rows", table.n_rows()}, {"columns", std::move(cols)}};
}

void from_json(const nlohmann::json& j, Table& table) {
    std::vector<Column> columns;
    const auto n = j.at("n_rows").get<std::size_t>();
    for (const auto& c : j.at("columns")) {
        const auto name = c.at("name").get<std::string>();
        const auto kind = c.at("kind").get<std::string>();
        const auto& values = c.at("values");
        if (values.size() != n)
            throw Error(ErrorKind::Schema, "column '" + name + "' has " + std::to_string(values.size()) +
                                               " values for " + std::to_string(n) + " rows");
        std::vector<std::uint8_t> missing(n, 0);
        for (const auto& m : c.value("missing", nlohmann::json::array())) {
            const auto r = m.get<std::size_t>();
            if (r >= n) throw Error(ErrorKind::Schema, "column '" + name + "' marks row " + std::to_string(r) + " missing");
            missing[r] = 1;
        }
        for (std::size_t r = 0; r < n; ++r)
            if (values[r].is_null()) missing[r] = 1;
        if (kind == "numeric") {
            std::vector<double> v(n, 0.0);
            for (std::size_t r = 0; r < n; ++r)
                if (!missing[r]) v[r] = values[r].get<double>();
            columns.push_back(Column::numeric(name, std::move(v), std::move(missing)));
        } else if (kind == "categorical") {
            std::vector<std::string> cats = c.value("categories", std::vector<std::string>{});
            std::vector<std::int32_t> codes(n, -1);
            for (std::size_t r = 0; r < n; ++r) {
                if (missing[r]) continue;
                const auto label = values[r].get<std::string>();
                auto it = std::find(cats.begin(), cats.end(), label);
                if (it == cats.end()) {
                    if (c.contains("categories"))
                        throw Error(ErrorKind::Schema, "column '" + name + "': label '" + label + "' not in categories");
                    cats.push_back(label);
                    it = cats.end() - 1;
                }
                codes[r] = static_cast<std::int32_t>(it - cats.begin());
            }
            columns.push_back(Column::categorical(name, std::move(codes), std::move(cats), std::move(missing)));
        } else {
            throw Error(ErrorKind::Parse, "column '" + name + "' has unknown kind '" + kind + "'");
        }
    }
    table = Table(j.value("name", std::string("table")), std::move(columns));
}

}  // namespace admissible
