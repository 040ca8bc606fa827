#include "geofuse/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "geofuse/errors.hpp"

namespace geofuse {

namespace {

// Uniform hash grid with cell edge = radius, so any neighbour within radius
// sits in one of the 27 cells around a query point.
struct HashGrid {
    double cell;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells;

    explicit HashGrid(double c) : cell(c) {}

    static std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z) {
        std::uint64_t h = static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::uint64_t>(y) * 0xC2B2AE3D27D4EB4Full;
        h ^= static_cast<std::uint64_t>(z) * 0x165667B19E3779F9ull;
        return h;
    }

    std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / cell)); }

    void insert(const Eigen::Vector3d& p, std::uint32_t idx) {
        cells[key(coord(p.x()), coord(p.y()), coord(p.z()))].push_back(idx);
    }

    template <typename F>
    void for_neighbours(const Eigen::Vector3d& p, F&& f) const {
        std::int64_t cx = coord(p.x()), cy = coord(p.y()), cz = coord(p.z());
        for (std::int64_t dz = -1; dz <= 1; ++dz)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    auto it = cells.find(key(cx + dx, cy + dy, cz + dz));
                    if (it == cells.end()) continue;
                    for (std::uint32_t idx : it->second) f(idx);
                }
    }
};

}  // namespace

std::vector<std::uint32_t> poisson_downsample(const PointCloud& cloud, double radius,
                                              std::uint64_t seed) {
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw DataError("poisson_downsample: radius must be finite and > 0");
    std::size_t n = cloud.size();
    if (n == 0) return {};

    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(order);

    HashGrid grid(radius);
    double r2 = radius * radius;
    std::vector<std::uint32_t> kept;
    for (std::uint32_t idx : order) {
        const Eigen::Vector3d& p = cloud.positions[idx];
        bool blocked = false;
        grid.for_neighbours(p, [&](std::uint32_t j) {
            if (blocked) return;
            if ((cloud.positions[j] - p).squaredNorm() < r2) blocked = true;
        });
        if (!blocked) {
            grid.insert(p, idx);
            kept.push_back(idx);
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<std::uint32_t> radius_context(const PointCloud& cloud,
                                          const std::vector<std::uint32_t>& anchors,
                                          double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw DataError("radius_context: radius must be finite and > 0");
    std::size_t n = cloud.size();
    for (std::uint32_t a : anchors) {
        if (a >= n) throw DataError("radius_context: anchor index out of range");
    }
    if (n == 0) return {};

    HashGrid grid(radius);
    for (std::size_t i = 0; i < n; ++i) grid.insert(cloud.positions[i], static_cast<std::uint32_t>(i));

    std::vector<std::uint8_t> mark(n, 0);
    double r2 = radius * radius;
    for (std::uint32_t a : anchors) {
        mark[a] = 1;
        const Eigen::Vector3d& p = cloud.positions[a];
        grid.for_neighbours(p, [&](std::uint32_t j) {
            if ((cloud.positions[j] - p).squaredNorm() <= r2) mark[j] = 1;
        });
    }
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (mark[i]) out.push_back(static_cast<std::uint32_t>(i));
    return out;
}

}  // namespace geofuse
