#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "geofuse/image.hpp"

namespace geofuse {

/// Raw 3D scene input: positions in meters, optional per-point RGB in [0,1].
struct PointCloud {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3f> colors;  // empty or same length as positions

    bool has_colors() const { return !colors.empty(); }
    std::size_t size() const { return positions.size(); }

    /// Throws DataError when an invariant is violated (non-finite coordinate,
    /// color count mismatch, color channel outside [0,1]).
    void validate() const;
};

/// Pinhole camera: intrinsics in pixels plus a rigid world-to-camera
/// transform. Camera frame is x right, y down, z forward.
struct CameraRig {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;
    double near_clip = 0.05;
    Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();

    Eigen::Matrix3d rotation() const { return world_to_camera.block<3, 3>(0, 0); }
    Eigen::Vector3d translation() const { return world_to_camera.block<3, 1>(0, 3); }

    /// Throws DataError unless the rig is valid: fx,fy > 0, width,height >= 1,
    /// near_clip > 0, rotation orthonormal with det +1 (tol 1e-9) and bottom
    /// row (0,0,0,1).
    void validate() const;
};

/// Continuous image coordinates plus the integer pixel they fall in.
/// Pixel (0,0) covers [0,1)x[0,1); col = floor(u), row = floor(v).
struct PixelProjection {
    double u = 0, v = 0;
    int col = 0, row = 0;
    double depth = 0;  // camera-frame z, reported even when behind the camera
    bool in_bounds = false;
};

/// Apply the rig's world-to-camera transform to every point. Colors pass
/// through unchanged.
PointCloud to_camera_frame(const PointCloud& cloud, const CameraRig& rig);

/// Project a camera-frame point. in_bounds is false when the point is behind
/// the camera, closer than near_clip, or outside the image rectangle.
PixelProjection project(const CameraRig& rig, const Eigen::Vector3d& point_cam);

std::vector<PixelProjection> project_all(const CameraRig& rig, const PointCloud& cloud_cam);

/// Indices (ascending) of the camera-frame points whose projection lands
/// in bounds.
std::vector<std::uint32_t> frustum_select(const PointCloud& cloud_cam, const CameraRig& rig);

/// Lift a depth map (meters, 0 = invalid) back to a camera-frame cloud using
/// pixel centers. `stride` subsamples rows and columns. Throws DataError when
/// the map size does not match the rig.
PointCloud backproject_depth(const CameraRig& rig, const ImageD& depth, int stride = 1);

/// Subset of a cloud by index list.
PointCloud gather(const PointCloud& cloud, const std::vector<std::uint32_t>& indices);

}  // namespace geofuse
