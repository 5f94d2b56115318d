#pragma once

#include <optional>
#include <span>

#include "tsgap/common.hpp"

namespace tsgap {

// Dynamic time warping with absolute-difference local cost and the standard
// {match, insert, delete} step set. band is a Sakoe-Chiba half-width; it must
// admit at least one path, i.e. band >= |len(a) - len(b)|.
double dtw_distance(std::span<const double> a, std::span<const double> b,
                    std::optional<std::size_t> band = std::nullopt);

}  // namespace tsgap
