#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geofuse/config.hpp"
#include "geofuse/dataset.hpp"
#include "geofuse/gradcheck.hpp"
#include "geofuse/io.hpp"
#include "geofuse/pca.hpp"
#include "geofuse/sampling.hpp"
#include "geofuse/trainer.hpp"
#include "geofuse/visibility.hpp"

namespace fs = std::filesystem;
using namespace geofuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheck = 4;

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct ViewPaths {
    std::string split;
    fs::path scene_dir;
    int scene_id = 0;
    int view_id = 0;
    fs::path camera_json;
};

std::vector<ViewPaths> list_views(const std::string& data_root) {
    std::vector<ViewPaths> out;
    for (const char* split : {"train", "val"}) {
        fs::path split_dir = fs::path(data_root) / split;
        if (!fs::is_directory(split_dir)) continue;
        std::vector<fs::path> scenes;
        for (const auto& e : fs::directory_iterator(split_dir))
            if (e.is_directory() && e.path().filename().string().rfind("scene_", 0) == 0)
                scenes.push_back(e.path());
        std::sort(scenes.begin(), scenes.end());
        for (const fs::path& sd : scenes) {
            std::vector<fs::path> cams;
            for (const auto& e : fs::directory_iterator(sd)) {
                std::string name = e.path().filename().string();
                if (name.size() == 15 && name.substr(3) == ".camera.json")
                    cams.push_back(e.path());
            }
            std::sort(cams.begin(), cams.end());
            for (const fs::path& cam : cams) {
                ViewPaths v;
                v.split = split;
                v.scene_dir = sd;
                v.scene_id = std::stoi(sd.filename().string().substr(6));
                v.view_id = std::stoi(cam.filename().string().substr(0, 3));
                v.camera_json = cam;
                out.push_back(std::move(v));
            }
        }
    }
    if (out.empty()) throw DataError("no views found under " + data_root);
    return out;
}

/// Frustum subset in camera frame plus the original-cloud index of each row.
std::pair<PointCloud, std::vector<std::uint32_t>> frustum_subset(const PointCloud& cloud,
                                                                 const CameraRig& rig) {
    PointCloud cam = to_camera_frame(cloud, rig);
    std::vector<std::uint32_t> idx = frustum_select(cam, rig);
    return {gather(cam, idx), idx};
}

int cmd_gen(const std::string& spec_path, const std::string& out_dir) {
    SceneSpec spec;
    if (!spec_path.empty()) spec = load_scene_spec(spec_path);
    spec.validate();
    write_dataset(out_dir, spec);
    int total = (spec.num_train + spec.num_val) * spec.cameras_per_scene;
    std::cout << "wrote " << spec.num_train << " train + " << spec.num_val << " val scenes ("
              << total << " views) to " << out_dir << "\n";
    return kExitOk;
}

int cmd_preprocess(const std::string& data_root, double theta,
                   std::optional<double> poisson_radius, std::optional<double> context_radius,
                   std::uint64_t seed) {
    std::vector<ViewPaths> views = list_views(data_root);
    std::string tsv = "split\tscene\tview\ttheta_deg\tvisible_points\tcoverage_fraction\n";

    std::string last_cloud_path;
    PointCloud cloud;
    std::vector<std::uint32_t> kept;  // poisson survivors, original indices
    PointCloud work;

    for (const ViewPaths& v : views) {
        std::string cloud_path = (v.scene_dir / "cloud.ply").string();
        if (cloud_path != last_cloud_path) {
            cloud = load_ply(cloud_path);
            last_cloud_path = cloud_path;
            if (poisson_radius) {
                kept = poisson_downsample(cloud, *poisson_radius, seed);
                work = gather(cloud, kept);
            } else {
                kept.resize(cloud.size());
                for (std::uint32_t i = 0; i < cloud.size(); ++i) kept[i] = i;
                work = cloud;
            }
        }

        CameraRig rig = load_camera_json(v.camera_json.string());
        auto [fr_cam, fr_idx] = frustum_subset(work, rig);
        VisibilityConfig vcfg;
        vcfg.theta_deg = theta;
        VisibilityResult vis = visible_mask(fr_cam, rig, vcfg);

        std::vector<std::uint32_t> visible_work;  // indices into the working cloud
        for (std::uint32_t j = 0; j < fr_idx.size(); ++j)
            if (vis.visible[j]) visible_work.push_back(fr_idx[j]);

        std::vector<std::uint32_t> result_work =
            context_radius ? radius_context(work, visible_work, *context_radius) : visible_work;

        std::vector<std::uint32_t> result;  // back to original cloud indices
        result.reserve(result_work.size());
        for (std::uint32_t j : result_work) result.push_back(kept[j]);

        save_indices_u32((v.scene_dir / view_file_name(v.view_id, "visible.u32")).string(),
                         result);
        tsv += v.split + "\t" + std::to_string(v.scene_id) + "\t" + std::to_string(v.view_id) +
               "\t" + fmt_double(theta) + "\t" + std::to_string(vis.visible_count()) + "\t" +
               fmt_double(vis.coverage) + "\n";
    }
    write_text_file((fs::path(data_root) / "coverage.tsv").string(), tsv);
    std::cout << "preprocessed " << views.size() << " views\n";
    return kExitOk;
}

int cmd_stats(const std::string& data_root, const std::string& thetas_csv) {
    std::vector<double> thetas;
    std::stringstream ss(thetas_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        thetas.push_back(std::stod(tok));
    }
    if (thetas.empty()) throw DataError("stats: no thetas given");

    std::vector<ViewPaths> views = list_views(data_root);
    std::vector<std::size_t> visible(thetas.size(), 0);
    std::vector<double> coverage(thetas.size(), 0.0);

    for (const ViewPaths& v : views) {
        PointCloud cloud = load_ply((v.scene_dir / "cloud.ply").string());
        CameraRig rig = load_camera_json(v.camera_json.string());
        auto [fr_cam, fr_idx] = frustum_subset(cloud, rig);
        std::vector<CoverageRow> rows = coverage_sweep(fr_cam, rig, thetas);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            visible[i] += rows[i].visible_points;
            coverage[i] += rows[i].coverage;
        }
    }

    std::cout << "theta_deg\tvisible_points\tcoverage_fraction\n";
    for (std::size_t i = 0; i < thetas.size(); ++i)
        std::cout << fmt_double(thetas[i]) << "\t" << visible[i] << "\t"
                  << fmt_double(coverage[i] / static_cast<double>(views.size())) << "\n";
    return kExitOk;
}

int cmd_train(const std::string& data_root, const std::string& config_path,
              const std::string& out_ckpt, const std::string& log_path_opt) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);
    cfg.validate();

    std::vector<SceneSample> train_set = load_split(data_root, "train");
    std::vector<SceneSample> val_set = load_split(data_root, "val");

    Model<float> model = make_model(cfg);
    std::string log_path = log_path_opt.empty() ? out_ckpt + ".log.csv" : log_path_opt;
    TrainResult res = train(model, cfg, train_set, val_set, out_ckpt, log_path);
    std::cout << "best val miou " << fmt_double(res.best_val_miou) << " at epoch "
              << res.best_epoch << "; checkpoint " << out_ckpt << "; log " << log_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data_root, const std::string& split,
             const std::string& config_path) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);
    cfg.validate();

    Model<float> model = make_model(cfg);
    load_checkpoint(ckpt, model.params);

    std::vector<SceneSample> samples = load_split(data_root, split);
    auto [metrics, per_image] = evaluate(model, samples, view_flags(cfg));

    std::cout << "class\tiou\n";
    for (std::size_t k = 0; k < metrics.per_class_iou.size(); ++k) {
        std::cout << k << "\t";
        if (metrics.defined[k])
            std::cout << fmt_double(metrics.per_class_iou[k]);
        else
            std::cout << "undefined";
        std::cout << "\n";
    }
    std::cout << "miou\t" << fmt_double(metrics.miou) << "\n";
    return kExitOk;
}

int cmd_export_features(const std::string& ckpt, const std::string& view_path,
                        const std::string& out_png, const std::string& config_path) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);
    cfg.validate();
    if (cfg.rgb_only) throw DataError("export-features: rgb_only model has no feature map");

    fs::path cam_path(view_path);
    std::string name = cam_path.filename().string();
    if (name.size() != 15 || name.substr(3) != ".camera.json")
        throw DataError("export-features: --view must point at a NNN.camera.json file");
    fs::path scene_dir = cam_path.parent_path();
    std::string stem = name.substr(0, 3);

    Model<float> model = make_model(cfg);
    load_checkpoint(ckpt, model.params);

    SceneSample s;
    s.cloud = load_ply((scene_dir / "cloud.ply").string());
    s.rig = load_camera_json(cam_path.string());
    s.rgb = dequantize_rgb(load_png_rgb8((scene_dir / (stem + ".rgb.png")).string()));
    s.labels = load_png_gray8((scene_dir / (stem + ".labels.png")).string());

    ViewBatch<float> view = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, view_flags(cfg));
    PipelineCache<float> cache;
    model_forward(model, view, false, cache);
    if (!cache.used_points) throw DataError("export-features: view has no frustum points");

    ImageF pca = export_feature_pca(cache.map);
    save_png_rgb8(out_png, quantize_rgb(pca));
    std::cout << "wrote " << out_png << " (" << cache.map.occupied_count() << " occupied pixels)\n";
    return kExitOk;
}

int cmd_gradcheck(bool verbose) { return gradcheck_main(std::cout, verbose); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point-cloud / image fusion workbench"};
    app.require_subcommand(1);

    std::string spec_path, out_dir;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--spec", spec_path, "scene spec file (key = value)");
    gen->add_option("--out", out_dir, "output dataset directory")->required();

    std::string data_root;
    double theta = 2.0;
    double poisson_r = 0.0, context_r = 0.0;
    std::uint64_t pre_seed = 1;
    CLI::App* pre = app.add_subcommand("preprocess",
                                       "write per-view visible-index lists and a coverage table");
    pre->add_option("--data", data_root, "dataset directory")->required();
    pre->add_option("--theta", theta, "visibility half-angle (degrees)");
    CLI::Option* opt_pr = pre->add_option("--poisson-radius", poisson_r,
                                          "poisson-disk downsample radius (meters)");
    CLI::Option* opt_cr = pre->add_option("--context-radius", context_r,
                                          "context radius around visible points (meters)");
    pre->add_option("--seed", pre_seed, "sampling seed");

    std::string stats_data, thetas_csv = "0,1,2,3,4,5";
    CLI::App* stats = app.add_subcommand("stats", "coverage sweep over visibility thresholds");
    stats->add_option("--data", stats_data, "dataset directory")->required();
    stats->add_option("--thetas", thetas_csv, "comma-separated theta list (degrees)");

    std::string train_data, train_cfg, train_out, train_log;
    CLI::App* tr = app.add_subcommand("train", "train a model");
    tr->add_option("--data", train_data, "dataset directory")->required();
    tr->add_option("--config", train_cfg, "train config file (key = value)");
    tr->add_option("--out", train_out, "output checkpoint path")->required();
    tr->add_option("--log", train_log, "TrainLog CSV path (default: <out>.log.csv)");

    std::string eval_ckpt, eval_data, eval_split = "val", eval_cfg;
    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    ev->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    ev->add_option("--data", eval_data, "dataset directory")->required();
    ev->add_option("--split", eval_split, "dataset split (default val)");
    ev->add_option("--config", eval_cfg, "train config used to build the model");

    std::string exf_ckpt, exf_view, exf_out, exf_cfg;
    CLI::App* exf = app.add_subcommand("export-features",
                                       "PCA visualization of a view's scattered features");
    exf->add_option("--ckpt", exf_ckpt, "checkpoint path")->required();
    exf->add_option("--view", exf_view, "path to a NNN.camera.json view file")->required();
    exf->add_option("--out", exf_out, "output PNG path")->required();
    exf->add_option("--config", exf_cfg, "train config used to build the model");

    bool gc_verbose = false;
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the full pipeline");
    gc->add_flag("--verbose", gc_verbose, "per-tensor error table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(spec_path, out_dir);
        if (pre->parsed())
            return cmd_preprocess(data_root, theta,
                                  *opt_pr ? std::optional<double>(poisson_r) : std::nullopt,
                                  *opt_cr ? std::optional<double>(context_r) : std::nullopt,
                                  pre_seed);
        if (stats->parsed()) return cmd_stats(stats_data, thetas_csv);
        if (tr->parsed()) return cmd_train(train_data, train_cfg, train_out, train_log);
        if (ev->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_cfg);
        if (exf->parsed()) return cmd_export_features(exf_ckpt, exf_view, exf_out, exf_cfg);
        if (gc->parsed()) return cmd_gradcheck(gc_verbose);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
