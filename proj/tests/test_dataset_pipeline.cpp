#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/gradcheck.hpp"
#include "geofuse/io.hpp"
#include "geofuse/pipeline.hpp"
#include "geofuse/trainer.hpp"

using namespace geofuse;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& stem)
        : path(std::filesystem::temp_directory_path() / stem) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

SceneSpec tiny_spec() {
    SceneSpec spec;
    spec.image_size = 16;
    spec.points_per_scene = 120;
    spec.cameras_per_scene = 2;
    spec.num_train = 2;
    spec.num_val = 1;
    spec.seed = 31;
    return spec;
}

}  // namespace

TEST_CASE("dataset file names") {
    CHECK(scene_dir_name(0) == "scene_0000");
    CHECK(scene_dir_name(73) == "scene_0073");
    CHECK(view_file_name(0, "rgb.png") == "000.rgb.png");
    CHECK(view_file_name(12, "camera.json") == "012.camera.json");
}

TEST_CASE("write_dataset and load_split roundtrip") {
    TempDir root("gf_dataset");
    SceneSpec spec = tiny_spec();
    write_dataset(root.path.string(), spec);

    std::vector<SceneSample> train = load_split(root.path.string(), "train");
    std::vector<SceneSample> val = load_split(root.path.string(), "val");
    REQUIRE(train.size() == 4);  // 2 scenes x 2 views
    REQUIRE(val.size() == 2);
    CHECK(val[0].scene_id == 2);  // val ids continue after the train ids

    std::vector<SceneSample> direct = gen_scenes(spec, 0, 2);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const SceneSample& a = direct[i];
        const SceneSample& b = train[i];
        CHECK(a.scene_id == b.scene_id);
        CHECK(a.view_id == b.view_id);
        CHECK(a.labels.pixels == b.labels.pixels);  // labels are lossless
        // positions survive as float32, colors as u8 grid values
        REQUIRE(a.cloud.size() == b.cloud.size());
        for (std::size_t k = 0; k < a.cloud.size(); ++k)
            for (int ax = 0; ax < 3; ++ax)
                CHECK(b.cloud.positions[k][ax] ==
                      static_cast<double>(static_cast<float>(a.cloud.positions[k][ax])));
        // rgb survives 8-bit quantization
        ImageF want = dequantize_rgb(quantize_rgb(a.rgb));
        CHECK(b.rgb.pixels == want.pixels);
        CHECK(b.rig.fx == a.rig.fx);
        CHECK(b.rig.world_to_camera == a.rig.world_to_camera);
    }

    CHECK_THROWS_AS(load_split(root.path.string(), "test"), DataError);
}

TEST_CASE("loaded and generated views train identically after quantization") {
    // the quantization-aware contract: build_view on a loaded sample matches
    // build_view on the in-memory sample passed through the same quantizers
    TempDir root("gf_dataset_eq");
    SceneSpec spec = tiny_spec();
    spec.num_train = 1;
    spec.num_val = 1;
    spec.cameras_per_scene = 1;
    write_dataset(root.path.string(), spec);
    SceneSample loaded = load_split(root.path.string(), "train").at(0);

    SceneSample direct = gen_scene(spec, 0).at(0);
    direct.rgb = dequantize_rgb(quantize_rgb(direct.rgb));
    for (auto& p : direct.cloud.positions)
        p = {static_cast<double>(static_cast<float>(p.x())),
             static_cast<double>(static_cast<float>(p.y())),
             static_cast<double>(static_cast<float>(p.z()))};

    ViewFlags flags;
    ViewBatch<float> va = build_view<float>(direct.cloud, direct.rig, direct.rgb, direct.labels,
                                            flags);
    ViewBatch<float> vb = build_view<float>(loaded.cloud, loaded.rig, loaded.rgb, loaded.labels,
                                            flags);
    CHECK(va.enc_points.v == vb.enc_points.v);
    CHECK(va.scatter_visible == vb.scatter_visible);
    CHECK(va.rgb.v == vb.rgb.v);
}

TEST_CASE("build_view scope and coordinate flags") {
    SceneSample s = gen_scene(tiny_spec(), 0).at(0);
    ViewFlags vis_flags;
    ViewFlags fov_flags;
    fov_flags.scope = CloudScope::fov;

    ViewBatch<float> vis = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, vis_flags);
    ViewBatch<float> fov = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, fov_flags);

    CHECK(vis.enc_points.shape[0] > 0);
    CHECK(fov.enc_points.shape[0] >= vis.enc_points.shape[0]);
    // visible scope scatters every row; fov scope carries the mask
    for (std::uint8_t m : vis.scatter_visible) CHECK(m == 1);
    std::size_t fov_visible = 0;
    for (std::uint8_t m : fov.scatter_visible) fov_visible += m;
    CHECK(fov_visible == static_cast<std::size_t>(vis.enc_points.shape[0]));
    CHECK(fov.projections.size() == static_cast<std::size_t>(fov.enc_points.shape[0]));

    // world coordinates re-center at the full-cloud centroid
    ViewFlags world_flags;
    world_flags.coords = CoordSystem::world;
    ViewBatch<float> world = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, world_flags);
    CHECK(world.enc_points.shape[0] == vis.enc_points.shape[0]);
    CHECK(world.enc_points.v != vis.enc_points.v);

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : s.cloud.positions) centroid += p;
    centroid /= static_cast<double>(s.cloud.size());
    // find the world-frame match for encoder row 0 by checking it is some
    // cloud point minus the centroid
    Eigen::Vector3d row0(world.enc_points.at2(0, 0), world.enc_points.at2(0, 1),
                         world.enc_points.at2(0, 2));
    bool found = false;
    for (const auto& p : s.cloud.positions)
        if ((Eigen::Vector3d(p - centroid).cast<float>().cast<double>() - row0).norm() < 1e-6)
            found = true;
    CHECK(found);

    // size mismatches are rejected
    ImageF small_rgb(8, 8, 3);
    CHECK_THROWS_AS(build_view<float>(s.cloud, s.rig, small_rgb, s.labels, vis_flags), DataError);
    ImageU8 small_labels(8, 8, 1);
    CHECK_THROWS_AS(build_view<float>(s.cloud, s.rig, s.rgb, small_labels, vis_flags), DataError);
}

TEST_CASE("append_rgb carries point colors into the encoder input") {
    SceneSample s = gen_scene(tiny_spec(), 1).at(0);
    ViewFlags flags;
    flags.append_rgb = true;
    ViewBatch<float> view = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, flags);
    REQUIRE(view.enc_points.shape[1] == 6);
    // color channels live in [0,1]
    for (int i = 0; i < view.enc_points.shape[0]; ++i)
        for (int ch = 3; ch < 6; ++ch) {
            CHECK(view.enc_points.at2(i, ch) >= 0.0f);
            CHECK(view.enc_points.at2(i, ch) <= 1.0f);
        }
}

TEST_CASE("empty frustum falls back to the RGB path") {
    SceneSample s = gen_scene(tiny_spec(), 0).at(0);
    // move every point behind the camera
    Eigen::Matrix3d rot = s.rig.rotation();
    Eigen::Vector3d eye = -rot.transpose() * s.rig.translation();
    Eigen::Vector3d back_world = rot.row(2).transpose();  // camera +z in world
    PointCloud behind = s.cloud;
    for (auto& p : behind.positions) p = eye - (1.0 + (p - eye).norm()) * back_world;

    ViewFlags flags;
    ViewBatch<float> view = build_view<float>(behind, s.rig, s.rgb, s.labels, flags);
    CHECK(view.enc_points.shape[0] == 0);

    Model<float> model;
    model.cfg = tiny_model_config(MergeStage::early, MergeMode::local);
    model.cfg.seg.num_classes = kNumClasses;
    model.init(11);
    PipelineCache<float> cache;
    const Tensor<float>& logits = model_forward(model, view, true, cache);
    CHECK(logits.shape == std::vector<int>{kNumClasses, 16, 16});
    CHECK_FALSE(cache.used_points);
    for (std::size_t px = 0; px < cache.map.occupied.size(); ++px)
        CHECK(cache.map.occupied[px] == 0);

    model_loss(model, view, cache);
    model_backward(model, view, cache);  // must not touch the 3D branch
    for (auto& [name, p] : model.params)
        if (name.rfind("p3d/", 0) == 0)
            for (float g : p.grad.v) CHECK(g == 0.0f);

    std::map<std::string, Tensor<float>> vel;
    CHECK_NOTHROW(sgd_step(model.params, vel, 0.01, 0.9, 0.0001));
}

TEST_CASE("rgb_only models ignore the point cloud entirely") {
    SceneSample s = gen_scene(tiny_spec(), 0).at(0);
    ViewFlags flags;
    ViewBatch<float> view = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, flags);
    REQUIRE(view.enc_points.shape[0] > 0);

    Model<float> model;
    model.cfg = tiny_model_config(MergeStage::early, MergeMode::local);
    model.cfg.seg.num_classes = kNumClasses;
    model.cfg.rgb_only = true;
    model.init(13);

    PipelineCache<float> cache;
    Tensor<float> with_points = model_forward(model, view, false, cache);

    ViewBatch<float> stripped = view;
    stripped.enc_points = Tensor<float>({0, 3});
    stripped.scatter_visible.clear();
    stripped.projections.clear();
    Tensor<float> without_points = model_forward(model, stripped, false, cache);
    CHECK(with_points.v == without_points.v);
}

TEST_CASE("empty_feature_map is fully unoccupied") {
    SparseFeatureMap<float> map = empty_feature_map<float>(5, 7, 3);
    CHECK(map.values.shape == std::vector<int>{5, 3, 7});
    for (std::size_t px = 0; px < map.occupied.size(); ++px) {
        CHECK(map.occupied[px] == 0);
        CHECK(map.source_index[px] == SparseFeatureMap<float>::kNoSource);
        CHECK(map.source_depth[px] == 0.0f);
    }
    for (float v : map.values.v) CHECK(v == 0.0f);
}
