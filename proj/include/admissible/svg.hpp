#pragma once

#include "admissible/infogram.hpp"

#include <string>

namespace admissible {

/// Static unit-square scatter of an infogram with the L-zone shaded.
std::string infogram_svg(const Infogram& ig);

}  // namespace admissible
