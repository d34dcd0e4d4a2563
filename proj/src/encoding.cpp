#include "admissible/encoding.hpp"

#include "admissible/error.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <unordered_map>

namespace admissible {

using nlohmann::json;

std::vector<FeatureSchema> feature_schema(const Table& table,
                                          std::span<const std::string> features) {
    std::vector<FeatureSchema> out;
    out.reserve(features.size());
    for (const auto& name : features) {
        if (!table.has(name))
            throw Error(ErrorKind::Schema, "feature '" + name + "' is not in the table");
        const auto& col = table.column(name);
        out.push_back({name, col.kind(), col.categories()});
    }
    return out;
}

std::vector<EncodedColumn> encode_features(const Table& table,
                                           std::span<const FeatureSchema> schema) {
    std::vector<EncodedColumn> out;
    out.reserve(schema.size());
    const std::size_t n = table.n_rows();
    for (const auto& f : schema) {
        if (!table.has(f.name))
            throw Error(ErrorKind::Schema, "input table lacks feature '" + f.name + "'");
        const auto& col = table.column(f.name);
        if (col.kind() != f.kind)
            throw Error(ErrorKind::Schema, "feature '" + f.name + "' was " + to_string(f.kind) +
                                               " at fit time but is " + to_string(col.kind()));
        EncodedColumn enc;
        enc.missing = col.missing_mask();
        if (f.kind == ColumnKind::Numeric) {
            enc.values = col.values();
        } else {
            enc.categorical = true;
            enc.n_levels = f.categories.size();
            std::vector<std::int32_t> remap(col.categories().size(), -1);
            std::unordered_map<std::string, std::int32_t> index;
            for (std::size_t i = 0; i < f.categories.size(); ++i)
                index.emplace(f.categories[i], static_cast<std::int32_t>(i));
            for (std::size_t i = 0; i < remap.size(); ++i) {
                auto it = index.find(col.categories()[i]);
                if (it != index.end()) remap[i] = it->second;
            }
            enc.codes.assign(n, -1);
            for (std::size_t r = 0; r < n; ++r) {
                if (enc.missing[r]) continue;
                const auto code = remap[static_cast<std::size_t>(col.code(r))];
                if (code < 0)
                    enc.missing[r] = 1;
                else
                    enc.codes[r] = code;
            }
        }
        out.push_back(std::move(enc));
    }
    return out;
}

EncodedTarget encode_target(const Table& table, const std::string& target) {
    const auto& col = table.column(target);
    if (!col.is_categorical())
        throw Error(ErrorKind::Schema, "target '" + target + "' must be categorical");
    if (col.has_missing())
        throw Error(ErrorKind::Schema, "target '" + target + "' has missing values");
    std::vector<int> remap(col.categories().size(), -1);
    for (std::size_t r = 0; r < table.n_rows(); ++r) remap[static_cast<std::size_t>(col.code(r))] = 0;
    EncodedTarget out;
    for (std::size_t c = 0; c < remap.size(); ++c) {
        if (remap[c] < 0) continue;
        remap[c] = static_cast<int>(out.classes.size());
        out.classes.push_back(col.categories()[c]);
    }
    if (out.classes.size() < 2)
        throw Error(ErrorKind::Degenerate,
                    "target '" + target + "' has fewer than two observed classes");
    out.y.resize(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r)
        out.y[r] = remap[static_cast<std::size_t>(col.code(r))];
    return out;
}

std::vector<int> encode_target_as(const Table& table, const std::string& target,
                                  std::span<const std::string> classes) {
    const auto& col = table.column(target);
    if (!col.is_categorical())
        throw Error(ErrorKind::Schema, "target '" + target + "' must be categorical");
    std::vector<int> remap(col.categories().size(), -1);
    for (std::size_t c = 0; c < remap.size(); ++c) {
        auto it = std::find(classes.begin(), classes.end(), col.categories()[c]);
        if (it != classes.end()) remap[c] = static_cast<int>(it - classes.begin());
    }
    std::vector<int> y(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (col.is_missing(r))
            throw Error(ErrorKind::Schema, "target '" + target + "' has missing values");
        y[r] = remap[static_cast<std::size_t>(col.code(r))];
        if (y[r] < 0)
            throw Error(ErrorKind::Schema, "target label '" + col.label(r) + "' is not a model class");
    }
    return y;
}

void to_json(json& j, const FeatureSchema& f) {
    j = json{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.kind == ColumnKind::Categorical) j["categories"] = f.categories;
}

void from_json(const json& j, FeatureSchema& f) {
    f.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "numeric")
        f.kind = ColumnKind::Numeric;
    else if (kind == "categorical")
        f.kind = ColumnKind::Categorical;
    else
        throw Error(ErrorKind::Parse, "unknown column kind '" + kind + "'");
    f.categories = j.value("categories", std::vector<std::string>{});
}

json split_to_json(const Split& s, std::span<const FeatureSchema> schema) {
    const auto& f = schema[static_cast<std::size_t>(s.feature)];
    json j{{"feature", f.name}, {"missing_left", s.missing_left}};
    if (f.kind == ColumnKind::Numeric) {
        j["threshold"] = s.threshold;
    } else {
        std::vector<std::string> left, right;
        for (std::size_t c = 0; c < s.level_side.size(); ++c) {
            if (s.level_side[c] == 1) left.push_back(f.categories[c]);
            if (s.level_side[c] == 0) right.push_back(f.categories[c]);
        }
        j["categories_left"] = left;
        j["categories_right"] = right;
    }
    return j;
}

Split split_from_json(const json& j, std::span<const FeatureSchema> schema) {
    Split s;
    const auto name = j.at("feature").get<std::string>();
    auto it = std::find_if(schema.begin(), schema.end(),
                           [&](const FeatureSchema& f) { return f.name == name; });
    if (it == schema.end()) throw Error(ErrorKind::Parse, "split on unknown feature '" + name + "'");
    s.feature = static_cast<int>(it - schema.begin());
    s.missing_left = j.at("missing_left").get<bool>();
    if (it->kind == ColumnKind::Numeric) {
        s.threshold = j.at("threshold").get<double>();
        return s;
    }
    s.level_side.assign(it->categories.size(), 2);
    auto mark = [&](const char* key, std::uint8_t side) {
        for (const auto& label : j.at(key)) {
            auto c = std::find(it->categories.begin(), it->categories.end(), label.get<std::string>());
            if (c == it->categories.end())
                throw Error(ErrorKind::Parse, "split names unknown level of '" + name + "'");
            s.level_side[static_cast<std::size_t>(c - it->categories.begin())] = side;
        }
    };
    mark("categories_left", 1);
    mark("categories_right", 0);
    return s;
}

}  // namespace admissible
