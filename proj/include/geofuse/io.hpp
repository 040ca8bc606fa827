#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geofuse/errors.hpp"
#include "geofuse/geometry.hpp"
#include "geofuse/image.hpp"

namespace geofuse {

// ---- PLY point clouds ----
// Properties x,y,z as float32; optional red,green,blue as uint8 mapped to
// [0,1] by /255. ASCII and binary_little_endian both read; writing picks one
// via `binary`.

void save_ply(const std::string& path, const PointCloud& cloud, bool binary = true);
PointCloud load_ply(const std::string& path);

// ---- PNG images ----

void save_png_gray8(const std::string& path, const ImageU8& img);
ImageU8 load_png_gray8(const std::string& path);

void save_png_rgb8(const std::string& path, const ImageU8& img);
ImageU8 load_png_rgb8(const std::string& path);

/// Depth in 16-bit grayscale millimeters, 0 = invalid.
void save_png_gray16(const std::string& path, const ImageU16& img);
ImageU16 load_png_gray16(const std::string& path);

/// float [0,1] <-> 8-bit, rounding to nearest.
ImageU8 quantize_rgb(const ImageF& img);
ImageF dequantize_rgb(const ImageU8& img);

/// meters <-> millimeters; non-positive or non-finite depth maps to 0.
ImageU16 depth_to_mm(const ImageD& depth);
ImageD depth_from_mm(const ImageU16& mm);

// ---- camera JSON ----
// Keys fx, fy, cx, cy, width, height, near_clip, world_to_camera (16 numbers,
// row-major). Doubles print with shortest round-trip precision.

void save_camera_json(const std::string& path, const CameraRig& rig);
CameraRig load_camera_json(const std::string& path);

// ---- raw index lists (little-endian u32) ----

void save_indices_u32(const std::string& path, const std::vector<std::uint32_t>& indices);
std::vector<std::uint32_t> load_indices_u32(const std::string& path);

// ---- small text helpers ----

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace geofuse
