#pragma once

#include <cstdint>
#include <vector>

#include "geofuse/geometry.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

/// Greedy dart-throwing Poisson-disk subset of `cloud`. Points are visited in
/// a seed-shuffled order; a point is kept when no previously kept point lies
/// strictly closer than `radius`. Returned indices refer to the input cloud
/// and are sorted ascending. The kept set is maximal: every rejected point is
/// within `radius` of some kept point.
std::vector<std::uint32_t> poisson_downsample(const PointCloud& cloud, double radius,
                                              std::uint64_t seed);

/// All points of `cloud` within `radius` (inclusive) of any anchor, unioned
/// with the anchors themselves. Sorted ascending, no duplicates.
std::vector<std::uint32_t> radius_context(const PointCloud& cloud,
                                          const std::vector<std::uint32_t>& anchors,
                                          double radius);

}  // namespace geofuse
