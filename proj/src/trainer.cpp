#include "geofuse/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>

#include "geofuse/io.hpp"

namespace geofuse {

namespace {

void append_double(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

Metrics evaluate_views(Model<float>& model, const std::vector<ViewBatch<float>>& views,
                       int num_classes, int ignore_id) {
    ConfusionMatrix cm(num_classes);
    for (const auto& view : views) {
        ImageU8 pred = model_predict(model, view);
        cm.add_image(view.labels, pred, ignore_id);
    }
    return miou_from_confusion(cm);
}

}  // namespace

void TrainConfig::validate() const {
    if (lr0 <= 0) throw DataError("train config: lr0 must be positive");
    if (momentum < 0 || momentum >= 1) throw DataError("train config: momentum must be in [0,1)");
    if (weight_decay < 0) throw DataError("train config: negative weight decay");
    if (epochs < 1) throw DataError("train config: need at least one epoch");
    if (halve_every < 1) throw DataError("train config: halve_every must be >= 1");
    if (visibility_theta < 0) throw DataError("train config: negative visibility theta");
    if (num_classes < 2) throw DataError("train config: need at least two classes");
}

double lr_at(const TrainConfig& cfg, int epoch) {
    if (epoch < 0 || epoch >= cfg.epochs) throw DataError("lr_at: epoch outside [0, epochs)");
    return std::ldexp(cfg.lr0, -(epoch / cfg.halve_every));
}

std::string TrainLog::to_csv() const {
    std::string out = "epoch,lr,train_loss,val_miou,seconds\n";
    for (const TrainLogRow& r : rows) {
        out += std::to_string(r.epoch);
        out += ',';
        append_double(out, r.lr);
        out += ',';
        append_double(out, r.train_loss);
        out += ',';
        append_double(out, r.val_miou);
        out += ',';
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, r.seconds, std::chars_format::fixed, 3);
        out.append(buf, res.ptr);
        out += '\n';
    }
    return out;
}

ViewFlags view_flags(const TrainConfig& cfg) {
    ViewFlags flags;
    flags.coords = cfg.coordinate_system;
    flags.scope = cfg.cloud_scope;
    flags.theta_deg = cfg.visibility_theta;
    flags.append_rgb = cfg.append_rgb;
    return flags;
}

Model<float> make_model(const TrainConfig& cfg) {
    cfg.validate();
    Model<float> model;
    model.cfg.net.append_rgb = cfg.append_rgb;
    model.cfg.seg.num_classes = cfg.num_classes;
    model.cfg.merge_stage = cfg.merge_stage;
    model.cfg.merge_mode = cfg.merge_mode;
    model.cfg.rgb_only = cfg.rgb_only;
    model.init(cfg.seed);
    return model;
}

TrainResult train(Model<float>& model, const TrainConfig& cfg,
                  const std::vector<SceneSample>& train_set,
                  const std::vector<SceneSample>& val_set, const std::string& ckpt_path,
                  const std::string& log_path) {
    cfg.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    if (val_set.empty()) throw DataError("train: empty validation set");

    ViewFlags flags = view_flags(cfg);
    std::vector<ViewBatch<float>> train_views, val_views;
    train_views.reserve(train_set.size());
    val_views.reserve(val_set.size());
    for (const SceneSample& s : train_set)
        train_views.push_back(build_view<float>(s.cloud, s.rig, s.rgb, s.labels, flags));
    for (const SceneSample& s : val_set)
        val_views.push_back(build_view<float>(s.cloud, s.rig, s.rgb, s.labels, flags));

    VelocityMap velocities;
    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(train_views.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.best_val_miou = -1.0;
    PipelineCache<float> cache;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        double lr = lr_at(cfg, epoch);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t idx : order) {
            const ViewBatch<float>& view = train_views[idx];
            model_forward(model, view, true, cache);
            CeResult ce = model_loss(model, view, cache);
            loss_sum += ce.loss;
            model_backward(model, view, cache);
            sgd_step(model.params, velocities, lr, cfg.momentum, cfg.weight_decay);
        }

        Metrics val = evaluate_views(model, val_views, cfg.num_classes, model.cfg.ignore_id);
        auto t1 = std::chrono::steady_clock::now();

        TrainLogRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = loss_sum / static_cast<double>(train_views.size());
        row.val_miou = val.miou;
        row.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.log.rows.push_back(row);
        write_text_file(log_path, result.log.to_csv());

        if (val.miou > result.best_val_miou) {
            result.best_val_miou = val.miou;
            result.best_epoch = epoch;
            save_checkpoint(ckpt_path, model.params, &velocities);
        }
    }
    return result;
}

std::pair<Metrics, std::vector<double>> evaluate(Model<float>& model,
                                                 const std::vector<SceneSample>& samples,
                                                 const ViewFlags& flags) {
    if (samples.empty()) throw DataError("evaluate: empty sample set");
    int num_classes = model.cfg.seg.num_classes;
    ConfusionMatrix total(num_classes);
    std::vector<double> per_image;
    per_image.reserve(samples.size());
    for (const SceneSample& s : samples) {
        ViewBatch<float> view = build_view<float>(s.cloud, s.rig, s.rgb, s.labels, flags);
        ImageU8 pred = model_predict(model, view);
        ConfusionMatrix cm(num_classes);
        cm.add_image(view.labels, pred, model.cfg.ignore_id);
        per_image.push_back(miou_from_confusion(cm).miou);
        total += cm;
    }
    return {miou_from_confusion(total), std::move(per_image)};
}

}  // namespace geofuse
