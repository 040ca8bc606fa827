#include <doctest.h>

#include "geofuse/metrics.hpp"

using namespace geofuse;

TEST_CASE("miou: perfect prediction scores 1") {
    ConfusionMatrix cm(3);
    cm.add(0, 0);
    cm.add(1, 1);
    cm.add(1, 1);
    cm.add(2, 2);
    Metrics m = miou_from_confusion(cm);
    CHECK(m.miou == doctest::Approx(1.0));
    for (int c = 0; c < 3; ++c) {
        CHECK(m.defined[static_cast<std::size_t>(c)] == 1);
        CHECK(m.per_class_iou[static_cast<std::size_t>(c)] == doctest::Approx(1.0));
    }
}

TEST_CASE("miou: the [[1,1],[1,1]] confusion gives 1/3 per class") {
    ConfusionMatrix cm(2);
    cm.add(0, 0);
    cm.add(0, 1);
    cm.add(1, 0);
    cm.add(1, 1);
    Metrics m = miou_from_confusion(cm);
    CHECK(m.per_class_iou[0] == doctest::Approx(1.0 / 3.0));
    CHECK(m.per_class_iou[1] == doctest::Approx(1.0 / 3.0));
    CHECK(m.miou == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("miou: classes absent from prediction and truth are excluded") {
    ConfusionMatrix cm(4);
    cm.add(0, 0);
    cm.add(1, 0);  // class 2 and 3 never appear
    Metrics m = miou_from_confusion(cm);
    CHECK(m.defined[2] == 0);
    CHECK(m.defined[3] == 0);
    // class 0: TP=1, FP=1, FN=0 -> 1/2; class 1: TP=0, FN=1 -> 0
    CHECK(m.miou == doctest::Approx(0.25));
}

TEST_CASE("miou: all-empty confusion does not divide by zero") {
    ConfusionMatrix cm(3);
    Metrics m = miou_from_confusion(cm);
    CHECK(m.miou == 0.0);
}

TEST_CASE("confusion: add_image honors the ignore id") {
    ImageU8 gt(2, 2, 1), pred(2, 2, 1);
    gt.at(0, 0, 0) = 0;
    gt.at(0, 1, 0) = 1;
    gt.at(1, 0, 0) = 255;  // ignored
    gt.at(1, 1, 0) = 1;
    pred.at(0, 0, 0) = 0;
    pred.at(0, 1, 0) = 0;
    pred.at(1, 0, 0) = 1;
    pred.at(1, 1, 0) = 1;
    ConfusionMatrix cm(2);
    cm.add_image(gt, pred, 255);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(1, 0) == 1);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.at(0, 1) == 0);

    CHECK_THROWS_AS(cm.add(5, 0), DataError);
    ImageU8 wrong(3, 2, 1);
    CHECK_THROWS_AS(cm.add_image(gt, wrong, 255), DataError);
}

TEST_CASE("miou: aggregate confusion differs from the mean of per-image scores") {
    // image A: one pixel, correct class 0. image B: 99 class-0 errors, 1 hit.
    ConfusionMatrix a(2), b(2);
    a.add(0, 0);
    for (int i = 0; i < 99; ++i) b.add(0, 1);
    b.add(0, 0);

    Metrics ma = miou_from_confusion(a);
    Metrics mb = miou_from_confusion(b);
    double mean_of_images = (ma.miou + mb.miou) / 2.0;

    ConfusionMatrix total(2);
    total += a;
    total += b;
    Metrics agg = miou_from_confusion(total);

    // aggregate: class0 2/101, class1 0/99 -> miou = (2/101)/2; per-image
    // mean: (1.0 + (1/100 + 0)/2)/2. The two must not coincide.
    CHECK(agg.miou == doctest::Approx((2.0 / 101.0) / 2.0));
    CHECK(mean_of_images == doctest::Approx((1.0 + 0.005) / 2.0));
    CHECK(std::abs(agg.miou - mean_of_images) > 0.1);

    ConfusionMatrix mismatch(3);
    CHECK_THROWS_AS(total += mismatch, DataError);
}
