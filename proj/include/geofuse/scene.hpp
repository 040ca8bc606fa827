#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "geofuse/geometry.hpp"
#include "geofuse/image.hpp"
#include "geofuse/rng.hpp"

// Synthetic desk-scale dataset: an axis-aligned room with boxes and spheres,
// surface-sampled point clouds, and ray-cast RGB/label views. Floor and
// ceiling deliberately share one albedo and receive identical two-sided
// shading, so color alone cannot separate them — geometry can.

namespace geofuse {

enum SceneClass : int {
    kClassFloor = 0,
    kClassWall = 1,
    kClassCeiling = 2,
    kClassBox = 3,
    kClassSphere = 4,
    kNumClasses = 5,
};

struct SceneSpec {
    double room_x_min = 4.95, room_x_max = 5.05;  // extent ranges (meters)
    double room_y_min = 4.95, room_y_max = 5.05;
    double room_z_min = 2.85, room_z_max = 2.95;
    int boxes_min = 3, boxes_max = 3;
    int spheres_min = 2, spheres_max = 2;
    double box_size_min = 0.45, box_size_max = 0.75;
    double sphere_r_min = 0.26, sphere_r_max = 0.38;
    int points_per_scene = 1600;
    int image_size = 64;  // square, multiple of 8
    int cameras_per_scene = 1;
    double noise_sigma = 0.02;
    int ignore_border = 2;
    double fov_y_deg = 90.0;
    std::uint64_t seed = 1;
    int num_train = 64, num_val = 16;
    // per-class albedo; the three plane classes share one on purpose
    std::array<Eigen::Vector3f, kNumClasses> palette = {
        Eigen::Vector3f(0.72f, 0.70f, 0.66f),  // floor
        Eigen::Vector3f(0.72f, 0.70f, 0.66f),  // wall (== floor)
        Eigen::Vector3f(0.72f, 0.70f, 0.66f),  // ceiling (== floor)
        Eigen::Vector3f(0.65f, 0.25f, 0.20f),  // box
        Eigen::Vector3f(0.20f, 0.35f, 0.60f),  // sphere
    };

    void validate() const;
};

struct SceneBox {
    Eigen::Vector3d lo, hi;
};

struct SceneSphere {
    Eigen::Vector3d center;
    double radius = 0.0;
};

struct SceneGeometry {
    double lx = 0, ly = 0, lz = 0;  // room extents, corner at origin
    std::vector<SceneBox> boxes;
    std::vector<SceneSphere> spheres;
};

// kind: 0 = room face, 1 = box, 2 = sphere
struct RayHit {
    bool hit = false;
    double t = 0.0;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    int cls = -1;
    int prim_kind = -1;
    int prim_index = -1;
};

struct SurfacePoint {
    Eigen::Vector3d p;
    Eigen::Vector3d n;
    int cls = -1;
    int prim_kind = -1;
    int prim_index = -1;
};

struct SceneSample {
    ImageF rgb;  // HWC in [0,1]
    ImageU8 labels;
    PointCloud cloud;  // world frame
    CameraRig rig;
    int scene_id = 0;
    int view_id = 0;

    SceneSample() : rgb(1, 1, 3), labels(1, 1, 1) {}
};

/// Nearest primitive along origin + t*dir, t > eps. Camera origins sit inside
/// the room, so the room boundary is an exit face.
RayHit raycast(const SceneGeometry& geom, const Eigen::Vector3d& origin,
               const Eigen::Vector3d& dir);

/// Two-sided Lambert against a fixed vertical light, plus ambient. Floor and
/// ceiling get the same value by symmetry.
double shade(const Eigen::Vector3d& normal);

SceneGeometry gen_geometry(const SceneSpec& spec, Rng& rng);

/// Area-weighted uniform samples over every surface (room faces included).
std::vector<SurfacePoint> sample_surface_points(const SceneGeometry& geom, int count, Rng& rng);

CameraRig gen_camera(const SceneSpec& spec, const SceneGeometry& geom, Rng& rng);

/// Ray-cast RGB and labels for one camera; seeded noise added to RGB, an
/// ignore ring written into the labels.
void render_view(const SceneSpec& spec, const SceneGeometry& geom, const CameraRig& rig, Rng& rng,
                 ImageF& rgb, ImageU8& labels);

/// All views of scene `scene_id`, deterministically derived from
/// spec.seed ^ scene_id.
std::vector<SceneSample> gen_scene(const SceneSpec& spec, int scene_id);

/// Scenes [first_id, first_id + count), concatenated views.
std::vector<SceneSample> gen_scenes(const SceneSpec& spec, int first_id, int count);

}  // namespace geofuse
