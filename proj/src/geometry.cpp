#include "geofuse/geometry.hpp"

#include <cmath>

#include "geofuse/errors.hpp"

namespace geofuse {

void PointCloud::validate() const {
    for (const auto& p : positions) {
        if (!p.allFinite()) throw DataError("point cloud contains a non-finite coordinate");
    }
    if (!colors.empty()) {
        if (colors.size() != positions.size())
            throw DataError("point cloud color count does not match position count");
        for (const auto& c : colors) {
            for (int k = 0; k < 3; ++k) {
                if (!(c[k] >= 0.0f && c[k] <= 1.0f))
                    throw DataError("point cloud color channel outside [0,1]");
            }
        }
    }
}

void CameraRig::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw DataError("camera focal lengths must be positive");
    if (width < 1 || height < 1) throw DataError("camera image size must be at least 1x1");
    if (!(near_clip > 0)) throw DataError("camera near_clip must be positive");
    if (!world_to_camera.allFinite()) throw DataError("world_to_camera has non-finite entries");

    const Eigen::RowVector4d bottom = world_to_camera.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
        throw DataError("world_to_camera bottom row must be (0,0,0,1)");

    const Eigen::Matrix3d r = rotation();
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9) throw DataError("world_to_camera rotation is not orthonormal");
    if (std::abs(r.determinant() - 1.0) > 1e-9)
        throw DataError("world_to_camera rotation must have determinant +1");
}

PointCloud to_camera_frame(const PointCloud& cloud, const CameraRig& rig) {
    const Eigen::Matrix3d r = rig.rotation();
    const Eigen::Vector3d t = rig.translation();
    PointCloud out;
    out.positions.reserve(cloud.positions.size());
    for (const auto& p : cloud.positions) out.positions.push_back(r * p + t);
    out.colors = cloud.colors;
    return out;
}

PixelProjection project(const CameraRig& rig, const Eigen::Vector3d& point_cam) {
    PixelProjection pp;
    const double z = point_cam.z();
    pp.depth = z;
    if (z > 0) {
        pp.u = rig.fx * point_cam.x() / z + rig.cx;
        pp.v = rig.fy * point_cam.y() / z + rig.cy;
    } else {
        pp.u = 0;
        pp.v = 0;
    }
    pp.col = static_cast<int>(std::floor(pp.u));
    pp.row = static_cast<int>(std::floor(pp.v));
    pp.in_bounds = z >= rig.near_clip && pp.col >= 0 && pp.col < rig.width && pp.row >= 0 &&
                   pp.row < rig.height;
    return pp;
}

std::vector<PixelProjection> project_all(const CameraRig& rig, const PointCloud& cloud_cam) {
    std::vector<PixelProjection> out;
    out.reserve(cloud_cam.size());
    for (const auto& p : cloud_cam.positions) out.push_back(project(rig, p));
    return out;
}

std::vector<std::uint32_t> frustum_select(const PointCloud& cloud_cam, const CameraRig& rig) {
    std::vector<std::uint32_t> indices;
    for (std::size_t i = 0; i < cloud_cam.positions.size(); ++i) {
        if (project(rig, cloud_cam.positions[i]).in_bounds)
            indices.push_back(static_cast<std::uint32_t>(i));
    }
    return indices;
}

PointCloud backproject_depth(const CameraRig& rig, const ImageD& depth, int stride) {
    if (depth.width != rig.width || depth.height != rig.height)
        throw DataError("depth map size does not match camera rig");
    if (depth.channels != 1) throw DataError("depth map must have a single channel");
    if (stride < 1) throw DataError("backprojection stride must be positive");

    PointCloud cloud;
    for (int row = 0; row < depth.height; row += stride) {
        for (int col = 0; col < depth.width; col += stride) {
            const double d = depth.at(row, col);
            if (!(d > 0)) continue;  // 0 or negative marks invalid
            const double x = (col + 0.5 - rig.cx) * d / rig.fx;
            const double y = (row + 0.5 - rig.cy) * d / rig.fy;
            cloud.positions.emplace_back(x, y, d);
        }
    }
    return cloud;
}

PointCloud gather(const PointCloud& cloud, const std::vector<std::uint32_t>& indices) {
    PointCloud out;
    out.positions.reserve(indices.size());
    if (cloud.has_colors()) out.colors.reserve(indices.size());
    for (std::uint32_t i : indices) {
        out.positions.push_back(cloud.positions[i]);
        if (cloud.has_colors()) out.colors.push_back(cloud.colors[i]);
    }
    return out;
}

}  // namespace geofuse
