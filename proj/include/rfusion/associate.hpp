#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace rfusion {

// Greedy nearest-timestamp association of two time-ordered stamp lists.
// Candidates within tolerance are taken by increasing |dt| (ties by index),
// each stamp used once. Pairs (i, j) come back ordered by i.
std::vector<std::pair<std::size_t, std::size_t>> associate_stamps(const std::vector<double>& a,
                                                                  const std::vector<double>& b, double tolerance);

}  // namespace rfusion
