#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "geofuse/io.hpp"
#include "geofuse/rng.hpp"

using namespace geofuse;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& stem) : path(temp_path(stem)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

PointCloud random_cloud(int n, bool with_colors, std::uint64_t seed) {
    Rng rng(seed);
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
        cloud.positions.emplace_back(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                                     rng.uniform(0.01, 8.0));
        if (with_colors) {
            // exact u8 grid values so the byte roundtrip is lossless
            Eigen::Vector3f c;
            for (int ch = 0; ch < 3; ++ch)
                c[ch] = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
            cloud.colors.push_back(c);
        }
    }
    return cloud;
}

CameraRig sample_rig() {
    CameraRig rig;
    rig.fx = 123.456789012345;
    rig.fy = 98.7654321098765;
    rig.cx = 31.25;
    rig.cy = 33.875;
    rig.width = 64;
    rig.height = 68;
    rig.near_clip = 0.05;
    Eigen::Matrix3d rot =
        Eigen::AngleAxisd(0.83, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    rig.world_to_camera.block<3, 3>(0, 0) = rot;
    rig.world_to_camera.block<3, 1>(0, 3) = Eigen::Vector3d(0.1, -2.3, 4.56789);
    return rig;
}

}  // namespace

TEST_CASE("binary PLY roundtrip is float32-exact") {
    TempFile f("gf_cloud_bin.ply");
    PointCloud cloud = random_cloud(1000, true, 5);
    save_ply(f.path, cloud, true);
    PointCloud back = load_ply(f.path);

    REQUIRE(back.size() == 1000);
    REQUIRE(back.has_colors());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int a = 0; a < 3; ++a)
            CHECK(back.positions[i][a] ==
                  static_cast<double>(static_cast<float>(cloud.positions[i][a])));
        CHECK(back.colors[i] == cloud.colors[i]);
    }

    // loaded values are float-exact, so a second trip is the identity
    TempFile f2("gf_cloud_bin2.ply");
    save_ply(f2.path, back, true);
    PointCloud again = load_ply(f2.path);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(again.positions[i] == back.positions[i]);
        CHECK(again.colors[i] == back.colors[i]);
    }
}

TEST_CASE("ascii PLY roundtrip is float32-exact") {
    TempFile f("gf_cloud_ascii.ply");
    PointCloud cloud = random_cloud(100, false, 6);
    cloud.positions.push_back({1e-30, -1e30, 0.1});
    cloud.positions.push_back({0.0, -0.0, 3.0});
    save_ply(f.path, cloud, false);
    PointCloud back = load_ply(f.path);
    REQUIRE(back.size() == cloud.size());
    CHECK_FALSE(back.has_colors());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int a = 0; a < 3; ++a)
            CHECK(back.positions[i][a] ==
                  static_cast<double>(static_cast<float>(cloud.positions[i][a])));
}

TEST_CASE("empty cloud PLY roundtrip") {
    for (bool binary : {true, false}) {
        TempFile f("gf_cloud_empty.ply");
        save_ply(f.path, PointCloud{}, binary);
        PointCloud back = load_ply(f.path);
        CHECK(back.size() == 0);
        CHECK_FALSE(back.has_colors());
    }
}

TEST_CASE("malformed PLY raises ParseError, not a crash") {
    TempFile f("gf_cloud_bad.ply");
    PointCloud cloud = random_cloud(10, true, 7);
    save_ply(f.path, cloud, true);
    std::string bytes = read_text_file(f.path);

    write_text_file(f.path, bytes.substr(0, 20));  // mid-header cut
    CHECK_THROWS_AS(load_ply(f.path), ParseError);

    write_text_file(f.path, bytes.substr(0, bytes.size() - 3));  // payload cut
    CHECK_THROWS_AS(load_ply(f.path), ParseError);

    write_text_file(f.path, "plz\n" + bytes.substr(4));  // bad magic
    CHECK_THROWS_AS(load_ply(f.path), ParseError);

    CHECK_THROWS_AS(load_ply(temp_path("gf_does_not_exist.ply")), DataError);
}

TEST_CASE("PNG roundtrips are exact") {
    Rng rng(8);

    TempFile g8("gf_img.gray8.png");
    ImageU8 gray(33, 17, 1);
    for (auto& p : gray.pixels) p = static_cast<std::uint8_t>(rng.bounded(256));
    save_png_gray8(g8.path, gray);
    ImageU8 gray_back = load_png_gray8(g8.path);
    CHECK(gray_back.width == 33);
    CHECK(gray_back.height == 17);
    CHECK(gray_back.pixels == gray.pixels);

    TempFile rgb8("gf_img.rgb8.png");
    ImageU8 rgb(21, 14, 3);
    for (auto& p : rgb.pixels) p = static_cast<std::uint8_t>(rng.bounded(256));
    save_png_rgb8(rgb8.path, rgb);
    ImageU8 rgb_back = load_png_rgb8(rgb8.path);
    CHECK(rgb_back.channels == 3);
    CHECK(rgb_back.pixels == rgb.pixels);

    TempFile g16("gf_img.gray16.png");
    ImageU16 depth(19, 23, 1);
    for (auto& p : depth.pixels) p = static_cast<std::uint16_t>(rng.bounded(65536));
    depth.pixels[0] = 0;
    depth.pixels[1] = 65535;
    save_png_gray16(g16.path, depth);
    ImageU16 depth_back = load_png_gray16(g16.path);
    CHECK(depth_back.pixels == depth.pixels);
}

TEST_CASE("PNG channel and format mismatches are errors") {
    ImageU8 rgb(4, 4, 3);
    ImageU8 gray(4, 4, 1);
    TempFile f("gf_img_mismatch.png");

    CHECK_THROWS_AS(save_png_gray8(f.path, rgb), DataError);
    CHECK_THROWS_AS(save_png_rgb8(f.path, gray), DataError);

    save_png_rgb8(f.path, rgb);
    CHECK_THROWS_AS(load_png_gray8(f.path), ParseError);  // wrong layout
    save_png_gray8(f.path, gray);
    CHECK_THROWS_AS(load_png_rgb8(f.path), ParseError);

    write_text_file(f.path, "definitely not a png");
    CHECK_THROWS_AS(load_png_gray8(f.path), ParseError);
}

TEST_CASE("quantize_rgb rounds to nearest and clamps") {
    ImageF img(6, 1, 1);
    img.pixels = {0.0f, 1.0f, 0.5f, -0.2f, 1.7f, 0.25f};
    ImageU8 q = quantize_rgb(img);
    CHECK(q.pixels == std::vector<std::uint8_t>{0, 255, 128, 0, 255, 64});

    // u8 -> float -> u8 is the identity on all byte values
    ImageU8 all(256, 1, 1);
    for (int i = 0; i < 256; ++i) all.pixels[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(i);
    ImageF deq = dequantize_rgb(all);
    CHECK(deq.pixels[255] == 1.0f);
    CHECK(deq.pixels[0] == 0.0f);
    CHECK(quantize_rgb(deq).pixels == all.pixels);
}

TEST_CASE("depth millimeter conversion") {
    ImageD depth(7, 1, 1);
    depth.pixels = {1.2344, 0.0, -3.0, std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::infinity(), 70.0, 0.0005};
    ImageU16 mm = depth_to_mm(depth);
    // non-finite (inf included) maps to 0; oversized finite depth clamps
    CHECK(mm.pixels == std::vector<std::uint16_t>{1234, 0, 0, 0, 0, 65535, 1});

    ImageD back = depth_from_mm(mm);
    CHECK(back.pixels[0] == 1.234);
    CHECK(back.pixels[1] == 0.0);

    ImageD multi(2, 2, 2);
    CHECK_THROWS_AS(depth_to_mm(multi), DataError);
}

TEST_CASE("camera JSON roundtrip is exact") {
    TempFile f("gf_rig.json");
    CameraRig rig = sample_rig();
    save_camera_json(f.path, rig);
    CameraRig back = load_camera_json(f.path);
    CHECK(back.fx == rig.fx);
    CHECK(back.fy == rig.fy);
    CHECK(back.cx == rig.cx);
    CHECK(back.cy == rig.cy);
    CHECK(back.width == rig.width);
    CHECK(back.height == rig.height);
    CHECK(back.near_clip == rig.near_clip);
    CHECK(back.world_to_camera == rig.world_to_camera);
}

TEST_CASE("camera JSON rejects malformed input") {
    TempFile f("gf_rig_bad.json");

    write_text_file(f.path, "{ not json");
    CHECK_THROWS_AS(load_camera_json(f.path), ParseError);

    write_text_file(f.path, "[1,2,3]\n");
    CHECK_THROWS_AS(load_camera_json(f.path), ParseError);

    write_text_file(f.path, "{\"fx\": 100}\n");
    CHECK_THROWS_AS(load_camera_json(f.path), ParseError);

    // structurally fine but fails rig validation (fx <= 0)
    CameraRig rig = sample_rig();
    save_camera_json(f.path, rig);
    std::string text = read_text_file(f.path);
    std::size_t at = text.find("\"fx\":");
    REQUIRE(at != std::string::npos);
    text.replace(at, text.find(',', at) - at, "\"fx\": -1.0");
    write_text_file(f.path, text);
    CHECK_THROWS_AS(load_camera_json(f.path), DataError);
}

TEST_CASE("u32 index list roundtrip") {
    TempFile f("gf_indices.bin");
    std::vector<std::uint32_t> indices = {0, 1, 7, 4294967295u, 123456789u};
    save_indices_u32(f.path, indices);
    CHECK(load_indices_u32(f.path) == indices);

    save_indices_u32(f.path, {});
    CHECK(load_indices_u32(f.path).empty());

    write_text_file(f.path, "\x01\x02\x03\x04\x05\x06");  // 6 bytes: not a u32 array
    CHECK_THROWS_AS(load_indices_u32(f.path), ParseError);
}

TEST_CASE("text files roundtrip arbitrary bytes") {
    TempFile f("gf_text.bin");
    std::string payload("header\0raw\xff bytes\n", 18);
    write_text_file(f.path, payload);
    CHECK(read_text_file(f.path) == payload);
}
