#pragma once

#include "admissible/table.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("admissible-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline admissible::Column labels(const std::string& name, const std::vector<std::string>& v) {
    return admissible::Column::from_labels(name, v);
}

}  // namespace testing
