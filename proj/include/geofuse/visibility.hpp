#pragma once

#include <cstdint>
#include <vector>

#include "geofuse/geometry.hpp"

namespace geofuse {

struct VisibilityConfig {
    double theta_deg = 2.0;  // occlusion half-angle threshold
    int cell_size = 8;       // screen-space grid cell, performance only

    void validate() const;
};

struct VisibilityResult {
    std::vector<std::uint8_t> visible;  // one flag per input point
    double coverage = 0.0;              // fraction of pixels hit by a visible point

    std::size_t visible_count() const;
};

/// Occlusion test for a frustum cloud in the camera frame. A point p is
/// occluded when some strictly nearer point q lies within theta of p's ray
/// from the camera origin (compared as dot(dir_p, dir_q) >= cos(theta)).
/// theta = 0 degenerates to a per-pixel z-buffer: among points sharing an
/// integer pixel only the nearest survives, equal depths won by the lowest
/// index. The screen-space grid is an accelerator only; the output equals the
/// brute-force evaluation of the definition.
VisibilityResult visible_mask(const PointCloud& cloud_cam, const CameraRig& rig,
                              const VisibilityConfig& cfg);

struct CoverageRow {
    double theta_deg = 0.0;
    std::size_t visible_points = 0;
    double coverage = 0.0;
};

/// Evaluate coverage at each threshold. `thetas_deg` must be sorted
/// ascending; coverage is non-increasing along the sweep.
std::vector<CoverageRow> coverage_sweep(const PointCloud& cloud_cam, const CameraRig& rig,
                                        const std::vector<double>& thetas_deg,
                                        int cell_size = 8);

}  // namespace geofuse
