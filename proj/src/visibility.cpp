#include "geofuse/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "geofuse/errors.hpp"

namespace geofuse {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ScreenPoint {
    double u, v;      // continuous pixel coords
    double depth;     // camera z
    double nx, ny, nz;  // unit ray direction
    std::uint32_t index;
};

// Grid cell radius that guarantees every point within `theta` of p's ray
// lands inside the search window. The naive max(fx,fy)*tan(theta) bound
// ignores gnomonic stretching away from the principal point: a cone of
// half-angle theta at off-axis angle psi spans up to
// f * (tan(psi+theta) - tan(psi)) <= f * theta * sec^2(psi+theta) pixels.
double search_radius_px(const CameraRig& rig, double u, double v, double theta_rad) {
    double f = std::max(rig.fx, rig.fy);
    double tx = (u - rig.cx) / rig.fx;
    double ty = (v - rig.cy) / rig.fy;
    double psi = std::atan(std::sqrt(tx * tx + ty * ty));
    double edge = psi + theta_rad;
    if (edge >= kPi / 2.0 - 1e-6) return std::numeric_limits<double>::infinity();
    double sec = 1.0 / std::cos(edge);
    return f * theta_rad * sec * sec * 1.0000001 + 1e-9;
}

VisibilityResult zbuffer_mask(const std::vector<ScreenPoint>& pts, const CameraRig& rig,
                              std::size_t total) {
    VisibilityResult out;
    out.visible.assign(total, 0);
    // nearest depth per pixel; ties keep the lowest index (first writer wins
    // because pts is scanned in index order and the comparison is strict).
    std::vector<double> best(static_cast<std::size_t>(rig.width) * rig.height,
                             std::numeric_limits<double>::infinity());
    std::vector<std::uint32_t> who(best.size(), 0);
    for (const ScreenPoint& p : pts) {
        int col = static_cast<int>(std::floor(p.u));
        int row = static_cast<int>(std::floor(p.v));
        if (col < 0 || col >= rig.width || row < 0 || row >= rig.height) continue;
        std::size_t at = static_cast<std::size_t>(row) * rig.width + col;
        if (p.depth < best[at]) {
            best[at] = p.depth;
            who[at] = p.index;
        }
    }
    std::size_t covered = 0;
    for (std::size_t at = 0; at < best.size(); ++at) {
        if (std::isfinite(best[at])) {
            out.visible[who[at]] = 1;
            ++covered;
        }
    }
    out.coverage = best.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(best.size());
    return out;
}

double coverage_of(const std::vector<ScreenPoint>& pts, const std::vector<std::uint8_t>& visible,
                   const CameraRig& rig) {
    std::unordered_set<std::size_t> hit;
    for (const ScreenPoint& p : pts) {
        if (!visible[p.index]) continue;
        int col = static_cast<int>(std::floor(p.u));
        int row = static_cast<int>(std::floor(p.v));
        if (col < 0 || col >= rig.width || row < 0 || row >= rig.height) continue;
        hit.insert(static_cast<std::size_t>(row) * rig.width + col);
    }
    return static_cast<double>(hit.size()) /
           (static_cast<double>(rig.width) * static_cast<double>(rig.height));
}

}  // namespace

void VisibilityConfig::validate() const {
    if (!(theta_deg >= 0.0) || !std::isfinite(theta_deg))
        throw DataError("visibility: theta_deg must be finite and >= 0");
    if (cell_size < 1) throw DataError("visibility: cell_size must be >= 1");
}

std::size_t VisibilityResult::visible_count() const {
    std::size_t n = 0;
    for (std::uint8_t f : visible) n += f;
    return n;
}

VisibilityResult visible_mask(const PointCloud& cloud_cam, const CameraRig& rig,
                              const VisibilityConfig& cfg) {
    cfg.validate();
    rig.validate();
    std::size_t n = cloud_cam.size();
    if (n == 0) return VisibilityResult{{}, 0.0};

    std::vector<ScreenPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d& p = cloud_cam.positions[i];
        if (!(p.z() >= rig.near_clip)) {
            throw DataError("visibility: point " + std::to_string(i) +
                            " is behind the near plane; run frustum selection first");
        }
        double norm = p.norm();
        ScreenPoint sp;
        sp.u = rig.fx * p.x() / p.z() + rig.cx;
        sp.v = rig.fy * p.y() / p.z() + rig.cy;
        sp.depth = p.z();
        sp.nx = p.x() / norm;
        sp.ny = p.y() / norm;
        sp.nz = p.z() / norm;
        sp.index = static_cast<std::uint32_t>(i);
        pts.push_back(sp);
    }

    if (cfg.theta_deg == 0.0) return zbuffer_mask(pts, rig, n);

    double theta_rad = cfg.theta_deg * kPi / 180.0;
    double cos_theta = std::cos(theta_rad);

    // Screen-space bucket grid. Points can project outside the image (the
    // caller only guarantees z >= near_clip), so the grid spans the bounding
    // box of the projections, not the image.
    double min_u = pts[0].u, max_u = pts[0].u, min_v = pts[0].v, max_v = pts[0].v;
    for (const ScreenPoint& p : pts) {
        min_u = std::min(min_u, p.u);
        max_u = std::max(max_u, p.u);
        min_v = std::min(min_v, p.v);
        max_v = std::max(max_v, p.v);
    }
    double cell = static_cast<double>(cfg.cell_size);
    int gw = static_cast<int>(std::floor((max_u - min_u) / cell)) + 1;
    int gh = static_cast<int>(std::floor((max_v - min_v) / cell)) + 1;
    std::vector<std::vector<std::uint32_t>> grid(static_cast<std::size_t>(gw) * gh);
    auto cell_of = [&](double u, double v) {
        int cx = static_cast<int>(std::floor((u - min_u) / cell));
        int cy = static_cast<int>(std::floor((v - min_v) / cell));
        cx = std::clamp(cx, 0, gw - 1);
        cy = std::clamp(cy, 0, gh - 1);
        return std::pair<int, int>(cx, cy);
    };
    for (const ScreenPoint& p : pts) {
        auto [cx, cy] = cell_of(p.u, p.v);
        grid[static_cast<std::size_t>(cy) * gw + cx].push_back(p.index);
    }

    VisibilityResult out;
    out.visible.assign(n, 1);
    for (const ScreenPoint& p : pts) {
        double r = search_radius_px(rig, p.u, p.v, theta_rad);
        int cx0, cy0, cx1, cy1;
        if (std::isinf(r)) {
            cx0 = 0;
            cy0 = 0;
            cx1 = gw - 1;
            cy1 = gh - 1;
        } else {
            auto lo = cell_of(p.u - r, p.v - r);
            auto hi = cell_of(p.u + r, p.v + r);
            cx0 = lo.first;
            cy0 = lo.second;
            cx1 = hi.first;
            cy1 = hi.second;
        }
        bool occluded = false;
        for (int cy = cy0; cy <= cy1 && !occluded; ++cy) {
            for (int cx = cx0; cx <= cx1 && !occluded; ++cx) {
                for (std::uint32_t j : grid[static_cast<std::size_t>(cy) * gw + cx]) {
                    const ScreenPoint& q = pts[j];
                    if (!(q.depth < p.depth)) continue;
                    double dot = p.nx * q.nx + p.ny * q.ny + p.nz * q.nz;
                    if (dot >= cos_theta) {
                        occluded = true;
                        break;
                    }
                }
            }
        }
        if (occluded) out.visible[p.index] = 0;
    }
    out.coverage = coverage_of(pts, out.visible, rig);
    return out;
}

std::vector<CoverageRow> coverage_sweep(const PointCloud& cloud_cam, const CameraRig& rig,
                                        const std::vector<double>& thetas_deg, int cell_size) {
    for (std::size_t i = 1; i < thetas_deg.size(); ++i) {
        if (thetas_deg[i] < thetas_deg[i - 1])
            throw DataError("coverage_sweep: thetas must be sorted ascending");
    }
    std::vector<CoverageRow> rows;
    rows.reserve(thetas_deg.size());
    for (double t : thetas_deg) {
        VisibilityConfig cfg;
        cfg.theta_deg = t;
        cfg.cell_size = cell_size;
        VisibilityResult res = visible_mask(cloud_cam, rig, cfg);
        rows.push_back(CoverageRow{t, res.visible_count(), res.coverage});
    }
    return rows;
}

}  // namespace geofuse
