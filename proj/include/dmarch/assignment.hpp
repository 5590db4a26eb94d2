#pragma once

#include <vector>

#include "dmarch/common.hpp"

namespace dmarch {

// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
// O(n^3)). Returns assignment[row] = column.
std::vector<Index> solve_assignment(const Mat& cost);

// Squared Euclidean cost between the columns of a and b.
Mat squared_distances(const Mat& a, const Mat& b);

}  // namespace dmarch
