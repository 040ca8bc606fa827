#include "geofuse/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "geofuse/io.hpp"

namespace geofuse {

namespace fs = std::filesystem;

std::string scene_dir_name(int scene_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%04d", scene_id);
    return buf;
}

std::string view_file_name(int view_id, const std::string& suffix) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d.", view_id);
    return buf + suffix;
}

void write_scene(const std::string& dir, const std::vector<SceneSample>& views) {
    if (views.empty()) throw DataError("write_scene: no views");
    fs::create_directories(dir);
    save_ply(dir + "/cloud.ply", views.front().cloud, true);
    for (const SceneSample& v : views) {
        save_png_rgb8(dir + "/" + view_file_name(v.view_id, "rgb.png"), quantize_rgb(v.rgb));
        save_png_gray8(dir + "/" + view_file_name(v.view_id, "labels.png"), v.labels);
        save_camera_json(dir + "/" + view_file_name(v.view_id, "camera.json"), v.rig);
    }
}

void write_dataset(const std::string& root, const SceneSpec& spec) {
    spec.validate();
    for (int i = 0; i < spec.num_train; ++i)
        write_scene(root + "/train/" + scene_dir_name(i), gen_scene(spec, i));
    for (int i = 0; i < spec.num_val; ++i) {
        int id = spec.num_train + i;
        write_scene(root + "/val/" + scene_dir_name(id), gen_scene(spec, id));
    }
}

std::vector<SceneSample> load_split(const std::string& root, const std::string& split) {
    fs::path split_dir = fs::path(root) / split;
    if (!fs::is_directory(split_dir)) throw DataError("no such split directory: " + split_dir.string());

    std::vector<fs::path> scene_dirs;
    for (const auto& e : fs::directory_iterator(split_dir))
        if (e.is_directory() && e.path().filename().string().rfind("scene_", 0) == 0)
            scene_dirs.push_back(e.path());
    std::sort(scene_dirs.begin(), scene_dirs.end());
    if (scene_dirs.empty()) throw DataError("split has no scene directories: " + split_dir.string());

    std::vector<SceneSample> out;
    for (const fs::path& sd : scene_dirs) {
        PointCloud cloud = load_ply((sd / "cloud.ply").string());
        int scene_id = std::stoi(sd.filename().string().substr(6));

        std::vector<fs::path> cams;
        for (const auto& e : fs::directory_iterator(sd)) {
            std::string name = e.path().filename().string();
            if (name.size() == 15 && name.substr(3) == ".camera.json") cams.push_back(e.path());
        }
        std::sort(cams.begin(), cams.end());
        if (cams.empty()) throw DataError("scene has no views: " + sd.string());

        for (const fs::path& cam : cams) {
            std::string stem = cam.filename().string().substr(0, 3);
            SceneSample s;
            s.scene_id = scene_id;
            s.view_id = std::stoi(stem);
            s.cloud = cloud;
            s.rig = load_camera_json(cam.string());
            s.rgb = dequantize_rgb(load_png_rgb8((sd / (stem + ".rgb.png")).string()));
            s.labels = load_png_gray8((sd / (stem + ".labels.png")).string());
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace geofuse
