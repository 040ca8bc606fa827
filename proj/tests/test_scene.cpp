#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "geofuse/scene.hpp"

using namespace geofuse;

namespace {

// Independent nearest-primitive oracle: every room face and box face tested
// as a bounded rectangle, spheres via the full quadratic formula.
struct OracleHit {
    double t = std::numeric_limits<double>::infinity();
    double second_t = std::numeric_limits<double>::infinity();
    int cls = -1;
};

OracleHit oracle_cast(const SceneGeometry& g, const Eigen::Vector3d& o,
                      const Eigen::Vector3d& d) {
    OracleHit best;
    auto offer = [&](double t, int cls) {
        if (t <= 1e-9) return;
        if (t < best.t) {
            best.second_t = best.t;
            best.t = t;
            best.cls = cls;
        } else if (t < best.second_t) {
            best.second_t = t;
        }
    };
    auto rect = [&](int axis, double plane, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                    int cls) {
        if (std::abs(d[axis]) < 1e-12) return;
        double t = (plane - o[axis]) / d[axis];
        Eigen::Vector3d p = o + t * d;
        int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        if (p[a1] >= lo[a1] - 1e-9 && p[a1] <= hi[a1] + 1e-9 && p[a2] >= lo[a2] - 1e-9 &&
            p[a2] <= hi[a2] + 1e-9)
            offer(t, cls);
    };
    Eigen::Vector3d room_lo(0, 0, 0), room_hi(g.lx, g.ly, g.lz);
    rect(0, 0.0, room_lo, room_hi, kClassWall);
    rect(0, g.lx, room_lo, room_hi, kClassWall);
    rect(1, 0.0, room_lo, room_hi, kClassWall);
    rect(1, g.ly, room_lo, room_hi, kClassWall);
    rect(2, 0.0, room_lo, room_hi, kClassFloor);
    rect(2, g.lz, room_lo, room_hi, kClassCeiling);
    for (const SceneBox& b : g.boxes)
        for (int axis = 0; axis < 3; ++axis) {
            rect(axis, b.lo[axis], b.lo, b.hi, kClassBox);
            rect(axis, b.hi[axis], b.lo, b.hi, kClassBox);
        }
    for (const SceneSphere& s : g.spheres) {
        Eigen::Vector3d oc = o - s.center;
        double a = d.squaredNorm();
        double b = 2.0 * d.dot(oc);
        double c = oc.squaredNorm() - s.radius * s.radius;
        double disc = b * b - 4.0 * a * c;
        if (disc < 0) continue;
        double sq = std::sqrt(disc);
        offer((-b - sq) / (2.0 * a), kClassSphere);
        offer((-b + sq) / (2.0 * a), kClassSphere);
    }
    return best;
}

bool samples_equal(const SceneSample& a, const SceneSample& b) {
    if (a.rgb.pixels != b.rgb.pixels || a.labels.pixels != b.labels.pixels) return false;
    if (a.cloud.positions.size() != b.cloud.positions.size()) return false;
    for (std::size_t i = 0; i < a.cloud.positions.size(); ++i)
        if (a.cloud.positions[i] != b.cloud.positions[i] || a.cloud.colors[i] != b.cloud.colors[i])
            return false;
    return a.rig.world_to_camera == b.rig.world_to_camera && a.rig.fx == b.rig.fx &&
           a.rig.fy == b.rig.fy && a.rig.cx == b.rig.cx && a.rig.cy == b.rig.cy;
}

}  // namespace

TEST_CASE("gen_scene is byte-identical for the same spec and seed") {
    SceneSpec spec;
    spec.image_size = 32;
    spec.points_per_scene = 300;
    spec.cameras_per_scene = 2;
    spec.seed = 9;
    std::vector<SceneSample> a = gen_scene(spec, 3);
    std::vector<SceneSample> b = gen_scene(spec, 3);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(samples_equal(a[i], b[i]));

    std::vector<SceneSample> c = gen_scene(spec, 4);  // different scene id differs
    CHECK_FALSE(samples_equal(a[0], c[0]));
}

TEST_CASE("rendered labels match a brute-force ray intersector") {
    SceneSpec spec;
    spec.image_size = 64;
    spec.seed = 11;
    for (int scene_id : {0, 1, 2}) {
        Rng rng(spec.seed ^ static_cast<std::uint64_t>(scene_id));
        SceneGeometry geom = gen_geometry(spec, rng);
        CameraRig rig = gen_camera(spec, geom, rng);

        ImageF rgb(1, 1, 3);
        ImageU8 labels(1, 1, 1);
        SceneSpec noiseless = spec;
        noiseless.noise_sigma = 0.0;
        Rng render_rng(1);
        render_view(noiseless, geom, rig, render_rng, rgb, labels);

        Eigen::Matrix3d cam_to_world = rig.rotation().transpose();
        Eigen::Vector3d eye = -cam_to_world * rig.translation();

        Rng pix(99);
        int checked = 0;
        for (int k = 0; k < 1000; ++k) {
            int col = static_cast<int>(pix.bounded(static_cast<std::uint64_t>(rig.width)));
            int row = static_cast<int>(pix.bounded(static_cast<std::uint64_t>(rig.height)));
            Eigen::Vector3d dir_cam((col + 0.5 - rig.cx) / rig.fx, (row + 0.5 - rig.cy) / rig.fy,
                                    1.0);
            Eigen::Vector3d dir = (cam_to_world * dir_cam).normalized();

            OracleHit oracle = oracle_cast(geom, eye, dir);
            REQUIRE(oracle.cls >= 0);
            if (oracle.second_t - oracle.t < 1e-9) continue;  // grazing-edge tie

            RayHit hit = raycast(geom, eye, dir);
            REQUIRE(hit.hit);
            CAPTURE(scene_id);
            CAPTURE(row);
            CAPTURE(col);
            CHECK(hit.t == doctest::Approx(oracle.t).epsilon(1e-9));
            CHECK(hit.cls == oracle.cls);
            CHECK((hit.point - (eye + hit.t * dir)).norm() < 1e-12);
            if (row >= spec.ignore_border && row < rig.height - spec.ignore_border &&
                col >= spec.ignore_border && col < rig.width - spec.ignore_border)
                CHECK(static_cast<int>(labels.at(row, col, 0)) == oracle.cls);
            ++checked;
        }
        CHECK(checked > 900);  // ties must stay rare
    }
}

TEST_CASE("surface points sit on their source primitive") {
    SceneSpec spec;
    spec.seed = 21;
    Rng rng(spec.seed);
    SceneGeometry geom = gen_geometry(spec, rng);
    std::vector<SurfacePoint> pts = sample_surface_points(geom, 2000, rng);
    REQUIRE(pts.size() == 2000);

    int n_floor = 0, n_ceiling = 0, n_box = 0, n_sphere = 0;
    for (const SurfacePoint& sp : pts) {
        if (sp.prim_kind == 0) {
            int face = sp.prim_index;
            int axis = face / 2;
            double plane = face % 2 == 1 ? Eigen::Vector3d(geom.lx, geom.ly, geom.lz)[axis] : 0.0;
            CHECK(std::abs(sp.p[axis] - plane) < 1e-9);
            int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
            Eigen::Vector3d hi(geom.lx, geom.ly, geom.lz);
            CHECK(sp.p[a1] >= -1e-9);
            CHECK(sp.p[a1] <= hi[a1] + 1e-9);
            CHECK(sp.p[a2] >= -1e-9);
            CHECK(sp.p[a2] <= hi[a2] + 1e-9);
            int want = face == 4 ? kClassFloor : (face == 5 ? kClassCeiling : kClassWall);
            CHECK(sp.cls == want);
            n_floor += sp.cls == kClassFloor;
            n_ceiling += sp.cls == kClassCeiling;
        } else if (sp.prim_kind == 1) {
            const SceneBox& b = geom.boxes.at(static_cast<std::size_t>(sp.prim_index));
            double min_face = std::numeric_limits<double>::infinity();
            for (int a = 0; a < 3; ++a) {
                CHECK(sp.p[a] >= b.lo[a] - 1e-9);
                CHECK(sp.p[a] <= b.hi[a] + 1e-9);
                min_face = std::min({min_face, std::abs(sp.p[a] - b.lo[a]),
                                     std::abs(sp.p[a] - b.hi[a])});
            }
            CHECK(min_face < 1e-9);
            CHECK(sp.cls == kClassBox);
            ++n_box;
        } else {
            const SceneSphere& s = geom.spheres.at(static_cast<std::size_t>(sp.prim_index));
            CHECK(std::abs((sp.p - s.center).norm() - s.radius) < 1e-9);
            CHECK((sp.n - (sp.p - s.center) / s.radius).norm() < 1e-9);
            CHECK(sp.cls == kClassSphere);
            ++n_sphere;
        }
    }
    // area weighting puts points on every surface kind
    CHECK(n_floor > 0);
    CHECK(n_ceiling > 0);
    CHECK(n_box > 0);
    CHECK(n_sphere > 0);
}

TEST_CASE("floor and ceiling are color-ambiguous but height-separable") {
    SceneSpec spec;
    CHECK(spec.palette[kClassFloor] == spec.palette[kClassCeiling]);
    CHECK(shade({0, 0, 1}) == shade({0, 0, -1}));

    Rng rng(4);
    SceneGeometry geom = gen_geometry(spec, rng);
    std::vector<SurfacePoint> pts = sample_surface_points(geom, 3000, rng);

    // noiseless color is a single constant shared by both classes...
    Eigen::Vector3f floor_color = spec.palette[kClassFloor] *
                                  static_cast<float>(shade({0, 0, 1}));
    int n = 0;
    for (const SurfacePoint& sp : pts) {
        if (sp.cls != kClassFloor && sp.cls != kClassCeiling) continue;
        Eigen::Vector3f c = spec.palette[static_cast<std::size_t>(sp.cls)] *
                            static_cast<float>(shade(sp.n));
        CHECK(c == floor_color);
        // ...while a height threshold separates them perfectly
        bool low = sp.p.z() < geom.lz / 2;
        CHECK((sp.cls == kClassFloor) == low);
        ++n;
    }
    CHECK(n > 100);
}

TEST_CASE("label images carry the ignore ring and valid class ids") {
    SceneSpec spec;
    spec.image_size = 32;
    spec.seed = 6;
    SceneSample s = gen_scene(spec, 0).at(0);
    REQUIRE(s.labels.width == 32);
    int interior_valid = 0;
    for (int row = 0; row < 32; ++row)
        for (int col = 0; col < 32; ++col) {
            int v = s.labels.at(row, col, 0);
            bool ring = row < spec.ignore_border || row >= 32 - spec.ignore_border ||
                        col < spec.ignore_border || col >= 32 - spec.ignore_border;
            if (ring) {
                CHECK(v == 255);
            } else {
                CHECK(v < kNumClasses);
                ++interior_valid;
            }
        }
    CHECK(interior_valid == 28 * 28);
    CHECK(s.cloud.size() == static_cast<std::size_t>(spec.points_per_scene));
    s.cloud.validate();
}

TEST_CASE("gen_scenes concatenates per-scene views with ids") {
    SceneSpec spec;
    spec.image_size = 16;
    spec.points_per_scene = 50;
    spec.cameras_per_scene = 2;
    std::vector<SceneSample> all = gen_scenes(spec, 10, 3);
    REQUIRE(all.size() == 6);
    CHECK(all[0].scene_id == 10);
    CHECK(all[0].view_id == 0);
    CHECK(all[1].scene_id == 10);
    CHECK(all[1].view_id == 1);
    CHECK(all[5].scene_id == 12);
    CHECK(all[5].view_id == 1);
}

TEST_CASE("SceneSpec::validate rejects infeasible specs") {
    SceneSpec ok;
    CHECK_NOTHROW(ok.validate());

    SceneSpec big_box = ok;
    big_box.box_size_max = 3.8;  // 3.8 + 2*margin > 4m room minimum
    CHECK_THROWS_AS(big_box.validate(), DataError);

    SceneSpec big_sphere = ok;
    big_sphere.sphere_r_max = 1.3;  // diameter plus clearance exceeds the 2.6m ceiling minimum
    CHECK_THROWS_AS(big_sphere.validate(), DataError);

    SceneSpec odd_image = ok;
    odd_image.image_size = 30;
    CHECK_THROWS_AS(odd_image.validate(), DataError);

    SceneSpec fat_ring = ok;
    fat_ring.image_size = 16;
    fat_ring.ignore_border = 8;
    CHECK_THROWS_AS(fat_ring.validate(), DataError);

    SceneSpec unambiguous = ok;
    unambiguous.palette[kClassCeiling] = {0.1f, 0.2f, 0.3f};
    CHECK_THROWS_AS(unambiguous.validate(), DataError);

    SceneSpec bad_noise = ok;
    bad_noise.noise_sigma = -0.1;
    CHECK_THROWS_AS(bad_noise.validate(), DataError);

    SceneSpec bad_fov = ok;
    bad_fov.fov_y_deg = 5.0;
    CHECK_THROWS_AS(bad_fov.validate(), DataError);
}
