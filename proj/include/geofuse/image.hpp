#pragma once

#include <cstdint>
#include <vector>

#include "geofuse/errors.hpp"

namespace geofuse {

/// Interleaved row-major raster (HWC). Used at the I/O boundary; the network
/// side works on planar Tensor<T> [C,H,W] instead.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> pixels;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c) {
        if (w < 0 || h < 0 || c <= 0) throw DataError("invalid image dimensions");
        pixels.assign(static_cast<std::size_t>(w) * h * c, T(0));
    }

    T& at(int row, int col, int ch = 0) {
        return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    const T& at(int row, int col, int ch = 0) const {
        return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }

    std::size_t size() const { return pixels.size(); }
};

using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using ImageF = Image<float>;
using ImageD = Image<double>;

}  // namespace geofuse
