#pragma once

#include <cstdint>
#include <vector>

#include "geofuse/errors.hpp"
#include "geofuse/image.hpp"

namespace geofuse {

struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::uint64_t> counts;  // row = ground truth, col = prediction

    explicit ConfusionMatrix(int c = 0)
        : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    void add(int gt, int pred) {
        if (gt < 0 || gt >= num_classes || pred < 0 || pred >= num_classes)
            throw DataError("confusion: class id out of range");
        ++counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }

    void add_image(const ImageU8& gt, const ImageU8& pred, int ignore_id) {
        if (gt.width != pred.width || gt.height != pred.height)
            throw DataError("confusion: image size mismatch");
        for (int y = 0; y < gt.height; ++y)
            for (int x = 0; x < gt.width; ++x) {
                int g = gt.at(y, x, 0);
                if (g == ignore_id) continue;
                add(g, pred.at(y, x, 0));
            }
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        if (o.num_classes != num_classes) throw DataError("confusion: class count mismatch");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
        return *this;
    }

    std::uint64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
};

struct Metrics {
    std::vector<double> per_class_iou;   // meaningful only where defined
    std::vector<std::uint8_t> defined;   // TP+FP+FN > 0
    double miou = 0.0;                   // mean over defined classes
};

/// IoU per class = TP / (TP + FP + FN); classes absent from both prediction
/// and ground truth are excluded from the mean.
inline Metrics miou_from_confusion(const ConfusionMatrix& cm) {
    int c = cm.num_classes;
    Metrics m;
    m.per_class_iou.assign(static_cast<std::size_t>(c), 0.0);
    m.defined.assign(static_cast<std::size_t>(c), 0);
    double sum = 0.0;
    int n_defined = 0;
    for (int k = 0; k < c; ++k) {
        std::uint64_t tp = cm.at(k, k), fp = 0, fn = 0;
        for (int j = 0; j < c; ++j) {
            if (j == k) continue;
            fp += cm.at(j, k);
            fn += cm.at(k, j);
        }
        std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        m.defined[static_cast<std::size_t>(k)] = 1;
        m.per_class_iou[static_cast<std::size_t>(k)] =
            static_cast<double>(tp) / static_cast<double>(denom);
        sum += m.per_class_iou[static_cast<std::size_t>(k)];
        ++n_defined;
    }
    m.miou = n_defined > 0 ? sum / n_defined : 0.0;
    return m;
}

}  // namespace geofuse
