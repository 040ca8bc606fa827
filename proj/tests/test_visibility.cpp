#include <doctest.h>

#include <cmath>
#include <vector>

#include "geofuse/rng.hpp"
#include "geofuse/visibility.hpp"

using namespace geofuse;

namespace {

constexpr double kPi = 3.14159265358979323846;

CameraRig test_rig(int size = 64) {
    CameraRig rig;
    rig.fx = rig.fy = size;
    rig.cx = rig.cy = size / 2.0;
    rig.width = rig.height = size;
    return rig;
}

// Direct evaluation of the definition, no acceleration structure. theta = 0
// keeps, per integer pixel, only the strictly nearest point (ties to the
// lowest index).
std::vector<std::uint8_t> brute_force_mask(const PointCloud& cloud, const CameraRig& rig,
                                           double theta_deg) {
    std::size_t n = cloud.size();
    std::vector<std::uint8_t> vis(n, 1);
    if (theta_deg == 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Vector3d& p = cloud.positions[i];
            int col = static_cast<int>(std::floor(rig.fx * p.x() / p.z() + rig.cx));
            int row = static_cast<int>(std::floor(rig.fy * p.y() / p.z() + rig.cy));
            if (col < 0 || col >= rig.width || row < 0 || row >= rig.height) {
                vis[i] = 0;
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const Eigen::Vector3d& q = cloud.positions[j];
                int qc = static_cast<int>(std::floor(rig.fx * q.x() / q.z() + rig.cx));
                int qr = static_cast<int>(std::floor(rig.fy * q.y() / q.z() + rig.cy));
                if (qc != col || qr != row) continue;
                if (q.z() < p.z() || (q.z() == p.z() && j < i)) {
                    vis[i] = 0;
                    break;
                }
            }
        }
        return vis;
    }
    double cos_theta = std::cos(theta_deg * kPi / 180.0);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector3d di = cloud.positions[i].normalized();
        for (std::size_t j = 0; j < n; ++j) {
            if (cloud.positions[j].z() >= cloud.positions[i].z()) continue;
            if (di.dot(cloud.positions[j].normalized()) >= cos_theta) {
                vis[i] = 0;
                break;
            }
        }
    }
    return vis;
}

PointCloud random_cone_cloud(Rng& rng, int n, const CameraRig& rig) {
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform(0.0, rig.width);
        double v = rng.uniform(0.0, rig.height);
        double z = rng.uniform(0.3, 4.0);
        cloud.positions.emplace_back((u - rig.cx) * z / rig.fx, (v - rig.cy) * z / rig.fy, z);
    }
    return cloud;
}

}  // namespace

TEST_CASE("visible_mask: one point is visible and covers one pixel") {
    CameraRig rig = test_rig();
    PointCloud cloud;
    cloud.positions = {{0, 0, 1}};
    VisibilityResult res = visible_mask(cloud, rig, VisibilityConfig{2.0, 8});
    CHECK(res.visible_count() == 1);
    CHECK(res.coverage == doctest::Approx(1.0 / (64.0 * 64.0)));
}

TEST_CASE("visible_mask: collinear points occlude at theta > 0") {
    CameraRig rig = test_rig();
    PointCloud cloud;
    cloud.positions = {{0, 0, 1}, {0, 0, 2}};
    VisibilityResult res = visible_mask(cloud, rig, VisibilityConfig{2.0, 8});
    CHECK(res.visible[0] == 1);
    CHECK(res.visible[1] == 0);
}

TEST_CASE("visible_mask: equal depths never occlude each other") {
    CameraRig rig = test_rig();
    PointCloud cloud;
    cloud.positions = {{0, 0, 1.5}, {0.001, 0, 1.5}, {0, 0.001, 1.5}};
    VisibilityResult res = visible_mask(cloud, rig, VisibilityConfig{2.0, 8});
    CHECK(res.visible_count() == 3);
}

TEST_CASE("visible_mask: theta=0 z-buffer keeps lowest index on exact ties") {
    CameraRig rig = test_rig();
    PointCloud cloud;
    cloud.positions = {{0.001, 0, 1.5}, {0, 0, 1.5}, {0, 0, 3.0}};  // same pixel
    VisibilityResult res = visible_mask(cloud, rig, VisibilityConfig{0.0, 8});
    CHECK(res.visible[0] == 1);  // ties with index 1, lower index wins
    CHECK(res.visible[1] == 0);
    CHECK(res.visible[2] == 0);
}

TEST_CASE("visible_mask matches the O(N^2) oracle on random clouds") {
    CameraRig rig = test_rig();
    Rng rng(2024);
    const double thetas[] = {0.0, 0.5, 1.0, 2.0, 4.0, 5.0};
    for (int trial = 0; trial < 6; ++trial) {
        PointCloud cloud = random_cone_cloud(rng, 200, rig);
        for (double t : thetas) {
            VisibilityResult res = visible_mask(cloud, rig, VisibilityConfig{t, 8});
            std::vector<std::uint8_t> oracle = brute_force_mask(cloud, rig, t);
            REQUIRE(res.visible.size() == oracle.size());
            for (std::size_t i = 0; i < oracle.size(); ++i) {
                INFO("trial ", trial, " theta ", t, " point ", i);
                CHECK(res.visible[i] == oracle[i]);
            }
        }
    }
}

TEST_CASE("visible_mask: result independent of grid cell size") {
    CameraRig rig = test_rig();
    Rng rng(99);
    PointCloud cloud = random_cone_cloud(rng, 300, rig);
    VisibilityResult a = visible_mask(cloud, rig, VisibilityConfig{2.0, 1});
    VisibilityResult b = visible_mask(cloud, rig, VisibilityConfig{2.0, 8});
    VisibilityResult c = visible_mask(cloud, rig, VisibilityConfig{2.0, 64});
    CHECK(a.visible == b.visible);
    CHECK(b.visible == c.visible);
}

TEST_CASE("visible_mask: growing theta only removes points") {
    CameraRig rig = test_rig();
    Rng rng(31);
    PointCloud cloud = random_cone_cloud(rng, 250, rig);
    VisibilityResult prev = visible_mask(cloud, rig, VisibilityConfig{0.5, 8});
    for (double t : {1.0, 2.0, 3.0, 5.0}) {
        VisibilityResult cur = visible_mask(cloud, rig, VisibilityConfig{t, 8});
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (cur.visible[i]) CHECK(prev.visible[i]);
        prev = cur;
    }
}

TEST_CASE("visible_mask: points behind the near plane are rejected") {
    CameraRig rig = test_rig();
    PointCloud cloud;
    cloud.positions = {{0, 0, 0.01}};
    CHECK_THROWS_AS(visible_mask(cloud, rig, VisibilityConfig{2.0, 8}), DataError);
}

TEST_CASE("coverage_sweep: non-increasing coverage, unsorted thetas rejected") {
    CameraRig rig = test_rig();
    Rng rng(55);
    PointCloud cloud = random_cone_cloud(rng, 400, rig);
    std::vector<double> thetas = {0.0, 0.5, 1.0, 2.0, 5.0};
    std::vector<CoverageRow> rows = coverage_sweep(cloud, rig, thetas);
    REQUIRE(rows.size() == thetas.size());
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].coverage <= rows[i - 1].coverage);

    CHECK_THROWS_AS(coverage_sweep(cloud, rig, {2.0, 1.0}), DataError);
}

TEST_CASE("coverage_sweep at theta=0 equals the z-buffer pixel fraction") {
    CameraRig rig = test_rig();
    Rng rng(70);
    PointCloud cloud = random_cone_cloud(rng, 500, rig);
    std::vector<std::uint8_t> oracle = brute_force_mask(cloud, rig, 0.0);
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(rig.width) * rig.height, 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!oracle[i]) continue;
        const Eigen::Vector3d& p = cloud.positions[i];
        int col = static_cast<int>(std::floor(rig.fx * p.x() / p.z() + rig.cx));
        int row = static_cast<int>(std::floor(rig.fy * p.y() / p.z() + rig.cy));
        hit[static_cast<std::size_t>(row) * rig.width + col] = 1;
    }
    std::size_t covered = 0;
    for (std::uint8_t f : hit) covered += f;
    std::vector<CoverageRow> rows = coverage_sweep(cloud, rig, {0.0});
    CHECK(rows[0].coverage ==
          doctest::Approx(static_cast<double>(covered) / (rig.width * rig.height)));
}

TEST_CASE("visibility config validation") {
    VisibilityConfig negative_theta{-1.0, 8};
    CHECK_THROWS_AS(negative_theta.validate(), DataError);
    VisibilityConfig zero_cell{2.0, 0};
    CHECK_THROWS_AS(zero_cell.validate(), DataError);
    VisibilityConfig zbuffer{0.0, 1};
    CHECK_NOTHROW(zbuffer.validate());
}
