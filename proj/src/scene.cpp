#include "geofuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geofuse/errors.hpp"

namespace geofuse {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEps = 1e-9;
constexpr double kMargin = 0.15;  // object/camera clearance from walls

struct FaceHit {
    double t;
    int face;  // 0:-x 1:+x 2:-y 3:+y 4:z=0(floor) 5:z=lz(ceiling)
};

// Exit point of a ray starting inside the room.
FaceHit room_exit(const SceneGeometry& g, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    double best = std::numeric_limits<double>::infinity();
    int face = -1;
    const double lo[3] = {0, 0, 0};
    const double hi[3] = {g.lx, g.ly, g.lz};
    for (int a = 0; a < 3; ++a) {
        if (d[a] > kRayEps) {
            double t = (hi[a] - o[a]) / d[a];
            if (t > kRayEps && t < best) {
                best = t;
                face = a * 2 + 1;
            }
        } else if (d[a] < -kRayEps) {
            double t = (lo[a] - o[a]) / d[a];
            if (t > kRayEps && t < best) {
                best = t;
                face = a * 2;
            }
        }
    }
    return FaceHit{best, face};
}

bool box_hit(const SceneBox& b, const Eigen::Vector3d& o, const Eigen::Vector3d& d, double& t_out,
             int& axis_out, int& side_out) {
    double t0 = kRayEps, t1 = std::numeric_limits<double>::infinity();
    int axis = -1, side = 0;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < b.lo[a] || o[a] > b.hi[a]) return false;
            continue;
        }
        double inv = 1.0 / d[a];
        double ta = (b.lo[a] - o[a]) * inv;
        double tb = (b.hi[a] - o[a]) * inv;
        int near_side = 0;  // lo face
        if (ta > tb) {
            std::swap(ta, tb);
            near_side = 1;
        }
        if (ta > t0) {
            t0 = ta;
            axis = a;
            side = near_side;
        }
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    if (axis < 0) return false;  // origin inside the box; treat as no hit
    t_out = t0;
    axis_out = axis;
    side_out = side;
    return true;
}

bool sphere_hit(const SceneSphere& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                double& t_out) {
    Eigen::Vector3d oc = o - s.center;
    double b = oc.dot(d);
    double c = oc.squaredNorm() - s.radius * s.radius;
    double disc = b * b - c;  // dir is unit length
    if (disc < 0) return false;
    double sq = std::sqrt(disc);
    double t = -b - sq;
    if (t <= kRayEps) t = -b + sq;
    if (t <= kRayEps) return false;
    t_out = t;
    return true;
}

}  // namespace

void SceneSpec::validate() const {
    if (room_x_min > room_x_max || room_y_min > room_y_max || room_z_min > room_z_max)
        throw DataError("scene spec: extent ranges inverted");
    if (room_x_min < 3.0 || room_y_min < 3.0 || room_z_min < 2.0)
        throw DataError("scene spec: room too small");
    if (boxes_min < 0 || boxes_max < boxes_min || spheres_min < 0 || spheres_max < spheres_min)
        throw DataError("scene spec: object count ranges invalid");
    if (box_size_min <= 0 || box_size_max < box_size_min)
        throw DataError("scene spec: box size range invalid");
    if (box_size_max + 2 * kMargin > std::min(room_x_min, room_y_min) ||
        box_size_max + 2 * kMargin > room_z_min)
        throw DataError("scene spec: boxes do not fit the room");
    if (sphere_r_min <= 0 || sphere_r_max < sphere_r_min)
        throw DataError("scene spec: sphere radius range invalid");
    if (2 * (sphere_r_max + kMargin) > room_z_min ||
        2 * (sphere_r_max + kMargin) > std::min(room_x_min, room_y_min))
        throw DataError("scene spec: spheres do not fit the room");
    if (points_per_scene < 1) throw DataError("scene spec: need at least one point");
    if (image_size < 8 || image_size % 8 != 0)
        throw DataError("scene spec: image size must be a positive multiple of 8");
    if (cameras_per_scene < 1) throw DataError("scene spec: need at least one camera");
    if (noise_sigma < 0) throw DataError("scene spec: negative noise sigma");
    if (ignore_border < 0 || 2 * ignore_border >= image_size)
        throw DataError("scene spec: ignore border eats the whole image");
    if (fov_y_deg <= 10 || fov_y_deg >= 160) throw DataError("scene spec: fov out of range");
    if (num_train < 0 || num_val < 0) throw DataError("scene spec: negative scene counts");
    bool shared = false;
    for (int a = 0; a < kNumClasses && !shared; ++a)
        for (int b = a + 1; b < kNumClasses; ++b)
            if (palette[static_cast<std::size_t>(a)] == palette[static_cast<std::size_t>(b)]) {
                shared = true;
                break;
            }
    if (!shared)
        throw DataError("scene spec: palette must keep at least two classes color-ambiguous");
}

double shade(const Eigen::Vector3d& normal) {
    // light along the room diagonal: every axis-aligned face receives the
    // same irradiance, so plane identity never leaks through shading
    static const Eigen::Vector3d light = Eigen::Vector3d(1, 1, 1).normalized();
    return 0.35 + 0.65 * std::abs(normal.dot(light));
}

RayHit raycast(const SceneGeometry& geom, const Eigen::Vector3d& origin,
               const Eigen::Vector3d& dir) {
    RayHit best;
    FaceHit room = room_exit(geom, origin, dir);
    if (room.face >= 0 && std::isfinite(room.t)) {
        best.hit = true;
        best.t = room.t;
        best.prim_kind = 0;
        best.prim_index = room.face;
        switch (room.face) {
            case 0: best.normal = {1, 0, 0}; best.cls = kClassWall; break;
            case 1: best.normal = {-1, 0, 0}; best.cls = kClassWall; break;
            case 2: best.normal = {0, 1, 0}; best.cls = kClassWall; break;
            case 3: best.normal = {0, -1, 0}; best.cls = kClassWall; break;
            case 4: best.normal = {0, 0, 1}; best.cls = kClassFloor; break;
            default: best.normal = {0, 0, -1}; best.cls = kClassCeiling; break;
        }
    }
    for (std::size_t i = 0; i < geom.boxes.size(); ++i) {
        double t;
        int axis, side;
        if (box_hit(geom.boxes[i], origin, dir, t, axis, side) && (!best.hit || t < best.t)) {
            best.hit = true;
            best.t = t;
            best.cls = kClassBox;
            best.prim_kind = 1;
            best.prim_index = static_cast<int>(i);
            best.normal = Eigen::Vector3d::Zero();
            best.normal[axis] = side == 0 ? -1.0 : 1.0;
        }
    }
    for (std::size_t i = 0; i < geom.spheres.size(); ++i) {
        double t;
        if (sphere_hit(geom.spheres[i], origin, dir, t) && (!best.hit || t < best.t)) {
            best.hit = true;
            best.t = t;
            best.cls = kClassSphere;
            best.prim_kind = 2;
            best.prim_index = static_cast<int>(i);
            best.normal = (origin + t * dir - geom.spheres[i].center).normalized();
        }
    }
    if (best.hit) best.point = origin + best.t * dir;
    return best;
}

SceneGeometry gen_geometry(const SceneSpec& spec, Rng& rng) {
    SceneGeometry g;
    g.lx = rng.uniform(spec.room_x_min, spec.room_x_max);
    g.ly = rng.uniform(spec.room_y_min, spec.room_y_max);
    g.lz = rng.uniform(spec.room_z_min, spec.room_z_max);
    int n_boxes = static_cast<int>(rng.uniform_int(spec.boxes_min, spec.boxes_max));
    for (int i = 0; i < n_boxes; ++i) {
        double sx = rng.uniform(spec.box_size_min, spec.box_size_max);
        double sy = rng.uniform(spec.box_size_min, spec.box_size_max);
        double sz = rng.uniform(spec.box_size_min, spec.box_size_max);
        double cx = rng.uniform(kMargin + sx / 2, g.lx - kMargin - sx / 2);
        double cy = rng.uniform(kMargin + sy / 2, g.ly - kMargin - sy / 2);
        double cz = rng.uniform(kMargin + sz / 2, g.lz - kMargin - sz / 2);
        SceneBox b;
        b.lo = {cx - sx / 2, cy - sy / 2, cz - sz / 2};
        b.hi = {cx + sx / 2, cy + sy / 2, cz + sz / 2};
        g.boxes.push_back(b);
    }
    int n_spheres = static_cast<int>(rng.uniform_int(spec.spheres_min, spec.spheres_max));
    for (int i = 0; i < n_spheres; ++i) {
        SceneSphere s;
        s.radius = rng.uniform(spec.sphere_r_min, spec.sphere_r_max);
        s.center.x() = rng.uniform(kMargin + s.radius, g.lx - kMargin - s.radius);
        s.center.y() = rng.uniform(kMargin + s.radius, g.ly - kMargin - s.radius);
        s.center.z() = rng.uniform(kMargin + s.radius, g.lz - kMargin - s.radius);
        g.spheres.push_back(s);
    }
    return g;
}

std::vector<SurfacePoint> sample_surface_points(const SceneGeometry& geom, int count, Rng& rng) {
    // surface list: 6 room faces, 6 faces per box, each sphere
    struct Surface {
        int kind, index, face;
        double area;
    };
    std::vector<Surface> surfaces;
    auto add = [&](int kind, int index, int face, double area) {
        surfaces.push_back({kind, index, face, area});
    };
    add(0, 4, 4, geom.lx * geom.ly);  // floor
    add(0, 5, 5, geom.lx * geom.ly);  // ceiling
    add(0, 0, 0, geom.ly * geom.lz);  // x=0 wall
    add(0, 1, 1, geom.ly * geom.lz);
    add(0, 2, 2, geom.lx * geom.lz);
    add(0, 3, 3, geom.lx * geom.lz);
    for (std::size_t i = 0; i < geom.boxes.size(); ++i) {
        const SceneBox& b = geom.boxes[i];
        Eigen::Vector3d s = b.hi - b.lo;
        add(1, static_cast<int>(i), 0, s.y() * s.z());
        add(1, static_cast<int>(i), 1, s.y() * s.z());
        add(1, static_cast<int>(i), 2, s.x() * s.z());
        add(1, static_cast<int>(i), 3, s.x() * s.z());
        add(1, static_cast<int>(i), 4, s.x() * s.y());
        add(1, static_cast<int>(i), 5, s.x() * s.y());
    }
    for (std::size_t i = 0; i < geom.spheres.size(); ++i)
        add(2, static_cast<int>(i), 0, 4.0 * kPi * geom.spheres[i].radius * geom.spheres[i].radius);

    std::vector<double> cumulative(surfaces.size());
    double total = 0.0;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        total += surfaces[i].area;
        cumulative[i] = total;
    }

    std::vector<SurfacePoint> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double pick = rng.uniform() * total;
        std::size_t si =
            std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
        if (si >= surfaces.size()) si = surfaces.size() - 1;
        const Surface& sf = surfaces[si];
        double u = rng.uniform(), v = rng.uniform();
        SurfacePoint p;
        p.prim_kind = sf.kind;
        p.prim_index = sf.kind == 0 ? sf.face : sf.index;
        if (sf.kind == 2) {
            // area-uniform on the sphere: uniform z and azimuth
            const SceneSphere& s = geom.spheres[static_cast<std::size_t>(sf.index)];
            double z = 2.0 * u - 1.0;
            double phi = 2.0 * kPi * v;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            p.n = {r * std::cos(phi), r * std::sin(phi), z};
            p.p = s.center + s.radius * p.n;
            p.cls = kClassSphere;
        } else {
            Eigen::Vector3d lo = {0, 0, 0}, hi = {geom.lx, geom.ly, geom.lz};
            int face = sf.face;
            if (sf.kind == 1) {
                lo = geom.boxes[static_cast<std::size_t>(sf.index)].lo;
                hi = geom.boxes[static_cast<std::size_t>(sf.index)].hi;
            }
            int axis = face / 2;
            bool high = face % 2 == 1;
            int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
            p.p[axis] = high ? hi[axis] : lo[axis];
            p.p[a1] = lo[a1] + u * (hi[a1] - lo[a1]);
            p.p[a2] = lo[a2] + v * (hi[a2] - lo[a2]);
            p.n = Eigen::Vector3d::Zero();
            if (sf.kind == 0) {
                // room faces point inward
                p.n[axis] = high ? -1.0 : 1.0;
                p.cls = face == 4 ? kClassFloor : (face == 5 ? kClassCeiling : kClassWall);
            } else {
                p.n[axis] = high ? 1.0 : -1.0;
                p.cls = kClassBox;
            }
        }
        out.push_back(p);
    }
    return out;
}

CameraRig gen_camera(const SceneSpec& spec, const SceneGeometry& geom, Rng& rng) {
    Eigen::Vector3d eye;
    eye.x() = geom.lx / 2.0 + rng.uniform(-0.1, 0.1);
    eye.y() = geom.ly / 2.0 + rng.uniform(-0.1, 0.1);
    eye.z() = geom.lz / 2.0 + rng.uniform(-0.05, 0.05);
    double yaw = rng.uniform(0.0, 2.0 * kPi);
    double pitch = rng.uniform(-0.05, 0.05);  // near-level: every frame sees floor,
                                              // wall and ceiling together
    // quarter-turn rolls: no image direction is preferentially aligned with
    // gravity, while world-axis-aligned edges keep only four appearances
    double roll = kPi / 2.0 * static_cast<double>(rng.uniform_int(0, 3));

    Eigen::Vector3d forward(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch),
                            std::sin(pitch));
    Eigen::Vector3d up_world(0, 0, 1);
    Eigen::Vector3d right0 = forward.cross(up_world).normalized();
    Eigen::Vector3d down0 = forward.cross(right0);  // unit by orthogonality
    // spin the image plane about the view axis so no image direction is
    // preferentially aligned with gravity
    Eigen::Vector3d right = std::cos(roll) * right0 + std::sin(roll) * down0;
    Eigen::Vector3d down = -std::sin(roll) * right0 + std::cos(roll) * down0;

    CameraRig rig;
    rig.width = spec.image_size;
    rig.height = spec.image_size;
    double fov = spec.fov_y_deg * kPi / 180.0;
    rig.fy = (spec.image_size / 2.0) / std::tan(fov / 2.0);
    rig.fx = rig.fy;
    rig.cx = spec.image_size / 2.0;
    rig.cy = spec.image_size / 2.0;
    rig.near_clip = 0.05;
    Eigen::Matrix3d rot;
    rot.row(0) = right.transpose();
    rot.row(1) = down.transpose();
    rot.row(2) = forward.transpose();
    rig.world_to_camera = Eigen::Matrix4d::Identity();
    rig.world_to_camera.block<3, 3>(0, 0) = rot;
    rig.world_to_camera.block<3, 1>(0, 3) = -rot * eye;
    rig.validate();
    return rig;
}

void render_view(const SceneSpec& spec, const SceneGeometry& geom, const CameraRig& rig, Rng& rng,
                 ImageF& rgb, ImageU8& labels) {
    rgb = ImageF(rig.width, rig.height, 3);
    labels = ImageU8(rig.width, rig.height, 1);
    Eigen::Matrix3d rot = rig.rotation();
    Eigen::Matrix3d cam_to_world = rot.transpose();
    Eigen::Vector3d eye = -cam_to_world * rig.translation();
    for (int row = 0; row < rig.height; ++row) {
        for (int col = 0; col < rig.width; ++col) {
            Eigen::Vector3d dir_cam((col + 0.5 - rig.cx) / rig.fx, (row + 0.5 - rig.cy) / rig.fy,
                                    1.0);
            Eigen::Vector3d dir = (cam_to_world * dir_cam).normalized();
            RayHit hit = raycast(geom, eye, dir);
            if (!hit.hit) throw DataError("render: ray escaped the room (degenerate scene)");
            const Eigen::Vector3f& albedo = spec.palette[static_cast<std::size_t>(hit.cls)];
            double s = shade(hit.normal);
            for (int ch = 0; ch < 3; ++ch) {
                double v = albedo[ch] * s + spec.noise_sigma * rng.normal();
                rgb.at(row, col, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
            labels.at(row, col, 0) = static_cast<std::uint8_t>(hit.cls);
        }
    }
    for (int row = 0; row < rig.height; ++row)
        for (int col = 0; col < rig.width; ++col)
            if (row < spec.ignore_border || row >= rig.height - spec.ignore_border ||
                col < spec.ignore_border || col >= rig.width - spec.ignore_border)
                labels.at(row, col, 0) = 255;
}

std::vector<SceneSample> gen_scene(const SceneSpec& spec, int scene_id) {
    spec.validate();
    Rng rng(spec.seed ^ static_cast<std::uint64_t>(scene_id));
    SceneGeometry geom = gen_geometry(spec, rng);
    std::vector<SurfacePoint> pts = sample_surface_points(geom, spec.points_per_scene, rng);

    PointCloud cloud;
    cloud.positions.reserve(pts.size());
    cloud.colors.reserve(pts.size());
    for (const SurfacePoint& sp : pts) {
        cloud.positions.push_back(sp.p);
        const Eigen::Vector3f& albedo = spec.palette[static_cast<std::size_t>(sp.cls)];
        double s = shade(sp.n);
        Eigen::Vector3f c;
        for (int ch = 0; ch < 3; ++ch)
            c[ch] = static_cast<float>(
                std::clamp(albedo[ch] * s + spec.noise_sigma * rng.normal(), 0.0, 1.0));
        cloud.colors.push_back(c);
    }

    std::vector<SceneSample> views;
    for (int v = 0; v < spec.cameras_per_scene; ++v) {
        SceneSample sample;
        sample.scene_id = scene_id;
        sample.view_id = v;
        sample.cloud = cloud;
        sample.rig = gen_camera(spec, geom, rng);
        render_view(spec, geom, sample.rig, rng, sample.rgb, sample.labels);
        views.push_back(std::move(sample));
    }
    return views;
}

std::vector<SceneSample> gen_scenes(const SceneSpec& spec, int first_id, int count) {
    std::vector<SceneSample> out;
    for (int i = 0; i < count; ++i) {
        std::vector<SceneSample> views = gen_scene(spec, first_id + i);
        for (auto& v : views) out.push_back(std::move(v));
    }
    return out;
}

}  // namespace geofuse
