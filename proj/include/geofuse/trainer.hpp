#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "geofuse/checkpoint.hpp"
#include "geofuse/metrics.hpp"
#include "geofuse/pipeline.hpp"
#include "geofuse/scene.hpp"

namespace geofuse {

struct TrainConfig {
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    int epochs = 40;
    int halve_every = 5;
    std::uint64_t seed = 1;
    CoordSystem coordinate_system = CoordSystem::camera;
    CloudScope cloud_scope = CloudScope::visible;
    MergeStage merge_stage = MergeStage::early;
    MergeMode merge_mode = MergeMode::padding;
    double visibility_theta = 2.0;
    int num_classes = kNumClasses;
    bool rgb_only = false;
    bool append_rgb = false;

    void validate() const;
};

/// Learning rate for `epoch`: lr0 halved every `halve_every` epochs. ldexp
/// keeps the division exact — 0.01 / 2^7 is bit-identical to 0.01 / 128.0.
double lr_at(const TrainConfig& cfg, int epoch);

/// One SGD-with-momentum step over every learnable parameter, in store
/// (lexicographic) order:
///   v <- momentum * v + (grad + weight_decay * param)
///   param <- param - lr * v
/// Velocities are created zero on first use; gradients are zeroed afterwards.
template <typename T>
void sgd_step(ParamStore<T>& params, std::map<std::string, Tensor<T>>& velocities, double lr,
              double momentum, double weight_decay) {
    const T lr_t = static_cast<T>(lr);
    const T mom = static_cast<T>(momentum);
    const T wd = static_cast<T>(weight_decay);
    for (auto& [name, p] : params) {
        if (!p.learnable) continue;
        auto [it, inserted] = velocities.try_emplace(name, Tensor<T>(p.value.shape));
        Tensor<T>& vel = it->second;
        if (!inserted && !vel.same_shape(p.value))
            throw DataError("sgd: velocity shape mismatch for " + name);
        for (std::size_t i = 0; i < p.value.v.size(); ++i) {
            const T g = p.grad.v[i] + wd * p.value.v[i];
            vel.v[i] = mom * vel.v[i] + g;
            p.value.v[i] -= lr_t * vel.v[i];
        }
        std::fill(p.grad.v.begin(), p.grad.v.end(), T(0));
    }
}

struct TrainLogRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_miou = 0.0;
    double seconds = 0.0;  // wall time for the epoch; everything else is deterministic
};

struct TrainLog {
    std::vector<TrainLogRow> rows;

    /// "epoch,lr,train_loss,val_miou,seconds" header plus one row per epoch.
    /// Doubles print shortest-roundtrip; seconds prints fixed to 3 places.
    std::string to_csv() const;
};

struct TrainResult {
    TrainLog log;
    double best_val_miou = 0.0;
    int best_epoch = -1;
};

ViewFlags view_flags(const TrainConfig& cfg);

/// Default architecture wired to the config's ablation switches.
Model<float> make_model(const TrainConfig& cfg);

/// Full run: preprocess every view once, per-epoch seeded shuffle, batch
/// size 1, eval-mode validation after each epoch. The best validation mIoU
/// (strictly greater) checkpoints params + velocities to ckpt_path; the log
/// is rewritten to log_path after every epoch.
TrainResult train(Model<float>& model, const TrainConfig& cfg,
                  const std::vector<SceneSample>& train_set,
                  const std::vector<SceneSample>& val_set, const std::string& ckpt_path,
                  const std::string& log_path);

/// Eval-mode metrics: aggregate over the summed confusion matrix, plus one
/// per-image mIoU (that image's own confusion) in sample order.
std::pair<Metrics, std::vector<double>> evaluate(Model<float>& model,
                                                 const std::vector<SceneSample>& samples,
                                                 const ViewFlags& flags);

}  // namespace geofuse
