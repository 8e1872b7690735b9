#include <gtest/gtest.h>

#include <random>

#include "fcce/error.hpp"
#include "fcce/metrics.hpp"
#include "oracles.hpp"

using namespace fcce;
using namespace fcce::metrics;

namespace {

std::vector<int> random_map(std::mt19937_64& gen, std::size_t n, int c) {
    std::uniform_int_distribution<int> d(0, c - 1);
    std::vector<int> m(n);
    for (auto& v : m) v = d(gen);
    return m;
}

}  // namespace

TEST(Accuracy, HandCounted) {
    const std::vector<int> a{0, 1, 1, 0};
    EXPECT_EQ(accuracy(a, a), 1.0);
    EXPECT_EQ(accuracy(a, std::vector<int>{1, 0, 0, 1}), 0.0);
    std::vector<int> truth(16, 0), pred(16, 0);
    for (int k = 0; k < 16; ++k) truth[k] = pred[k] = k % 3;
    for (int k : {0, 5, 10, 15}) pred[k] = (pred[k] + 1) % 3;
    EXPECT_EQ(accuracy(pred, truth), 0.75);
}

TEST(Accuracy, SizeMismatchRejected) {
    EXPECT_THROW(accuracy(std::vector<int>{0, 1}, std::vector<int>{0}), InvalidInput);
}

TEST(Dice, HandCountedBinary) {
    const std::vector<int> pred{1, 1, 0, 0};
    const std::vector<int> truth{1, 0, 1, 0};
    EXPECT_EQ(dice_per_class(pred, truth, 2)[1], 0.5);
    EXPECT_DOUBLE_EQ(iou_per_class(pred, truth, 2)[1], 1.0 / 3.0);
    EXPECT_EQ(dice(pred, pred, 2), 1.0);
    EXPECT_EQ(iou(pred, pred, 2), 1.0);
}

TEST(Dice, VacuousClassScoresOne) {
    const std::vector<int> m{0, 0, 1, 1};
    EXPECT_EQ(dice_per_class(m, m, 3)[2], 1.0);
    EXPECT_EQ(iou_per_class(m, m, 3)[2], 1.0);
    EXPECT_EQ(dice(m, m, 3), 1.0);
}

TEST(Dice, ClassMeanReduction) {
    const std::vector<int> pred{1, 1, 0, 0};
    const std::vector<int> truth{1, 0, 1, 0};
    // class 0: pred {2,3}, truth {1,3} -> 0.5; class 1 -> 0.5
    EXPECT_DOUBLE_EQ(dice(pred, truth, 2), 0.5);
}

TEST(Dice, OutOfRangeLabelRejected) {
    EXPECT_THROW(dice(std::vector<int>{0, 3}, std::vector<int>{0, 1}, 2), InvalidInput);
}

TEST(Identities, IouEqualsDiceOverTwoMinusDice) {
    std::mt19937_64 gen(1);
    for (int t = 0; t < 100; ++t) {
        const int c = 2 + t % 4;
        const auto pred = random_map(gen, 64, c);
        const auto truth = random_map(gen, 64, c);
        const auto d = dice_per_class(pred, truth, c);
        const auto j = iou_per_class(pred, truth, c);
        for (int k = 0; k < c; ++k) {
            EXPECT_NEAR(j[k], d[k] / (2.0 - d[k]), 1e-9);
            EXPECT_GE(d[k] + 1e-15, j[k]);
            const auto o = oracle::overlap(pred, truth, k);
            if (o.pred + o.truth > 0) {
                EXPECT_NEAR(d[k], 2.0 * o.both / static_cast<double>(o.pred + o.truth), 1e-15);
                EXPECT_NEAR(j[k], o.both / static_cast<double>(o.pred + o.truth - o.both), 1e-15);
            }
        }
    }
}

TEST(Identities, InvariantUnderClassPermutation) {
    std::mt19937_64 gen(2);
    const std::vector<int> perm{2, 0, 3, 1};
    for (int t = 0; t < 20; ++t) {
        auto pred = random_map(gen, 50, 4);
        auto truth = random_map(gen, 50, 4);
        const auto before = score(pred, truth, 4);
        for (auto& v : pred) v = perm[v];
        for (auto& v : truth) v = perm[v];
        const auto after = score(pred, truth, 4);
        EXPECT_DOUBLE_EQ(before.ac, after.ac);
        EXPECT_NEAR(before.dc, after.dc, 1e-15);
        EXPECT_NEAR(before.iou, after.iou, 1e-15);
    }
}

TEST(Csv, HeaderAndRow) {
    EXPECT_EQ(csv_header(2), "epoch,loss,AC,DC,IoU,AC_val,DC_val,IoU_val,DC_0,DC_1,IoU_0,IoU_1");
    MetricsRecord r;
    r.epoch = 3;
    r.loss = 0.5;
    r.train = score(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
    r.val = score(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 1, 0}, 2);
    EXPECT_EQ(csv_row(r),
              "3,0.50000000,1.00000000,1.00000000,1.00000000,0.50000000,0.50000000,0.33333333,"
              "0.50000000,0.50000000,0.33333333,0.33333333");
}
