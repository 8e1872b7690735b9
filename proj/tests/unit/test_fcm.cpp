#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fcce/error.hpp"
#include "oracles.hpp"
#include "fcce/fcm.hpp"

using namespace fcce;
using fcm::Centroids;
using fcm::MembershipMatrix;

namespace {

MembershipMatrix matrix(std::size_t c, std::size_t n, std::vector<double> values) {
    MembershipMatrix u(c, n);
    u.values() = std::move(values);
    return u;
}

std::vector<double> random_pixels(std::mt19937_64& gen, std::size_t n) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> px(n);
    for (auto& p : px) p = dist(gen);
    return px;
}

}  // namespace

TEST(FcmMemberships, ZeroDistanceIsCrisp) {
    const std::vector<double> px{0.0, 1.0};
    const auto u = fcm::update_memberships(px, {0.0, 1.0}, 2.0);
    EXPECT_EQ(u.values(), (std::vector<double>{1, 0, 0, 1}));
}

TEST(FcmMemberships, EquidistantSplitsEvenly) {
    const std::vector<double> px{0.5};
    const auto u = fcm::update_memberships(px, {0.0, 1.0}, 2.0);
    EXPECT_DOUBLE_EQ(u(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(u(1, 0), 0.5);
}

TEST(FcmMemberships, QuarterPointGivesNineTenths) {
    const std::vector<double> px{0.25};
    const auto u = fcm::update_memberships(px, {0.0, 1.0}, 2.0);
    EXPECT_NEAR(u(0, 0), 0.9, 1e-9);
    EXPECT_NEAR(u(1, 0), 0.1, 1e-9);
}

TEST(FcmMemberships, CoincidentCentroidsShareMass) {
    const std::vector<double> px{0.3};
    const auto u = fcm::update_memberships(px, {0.3, 0.3, 0.9}, 2.0);
    EXPECT_DOUBLE_EQ(u(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(u(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(u(2, 0), 0.0);
}

TEST(FcmMemberships, NonFiniteInputRejected) {
    const std::vector<double> px{0.1, NAN};
    EXPECT_THROW(fcm::update_memberships(px, {0.0, 1.0}, 2.0), InvalidInput);
}

TEST(FcmMemberships, ColumnStochasticAndInRange) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto px = random_pixels(gen, 40);
        const auto v = random_pixels(gen, 2 + trial % 4);
        const double m = 1.2 + 0.1 * (trial % 20);
        const auto u = fcm::update_memberships(px, v, m);
        for (std::size_t j = 0; j < px.size(); ++j) {
            double total = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                ASSERT_GE(u(i, j), 0.0);
                ASSERT_LE(u(i, j), 1.0);
                total += u(i, j);
            }
            ASSERT_NEAR(total, 1.0, 1e-9);
        }
    }
}

TEST(FcmMemberships, MatchesTextbookFormula) {
    // u_ij = 1 / sum_k (d_ij / d_kj)^(2/(m-1)), evaluated directly.
    std::mt19937_64 gen(4);
    const auto px = random_pixels(gen, 30);
    const Centroids v{0.15, 0.5, 0.8};
    const double m = 2.5;
    const auto u = fcm::update_memberships(px, v, m);
    for (std::size_t j = 0; j < px.size(); ++j) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            double denom = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) {
                denom += std::pow(std::abs(px[j] - v[i]) / std::abs(px[j] - v[k]), 2.0 / (m - 1.0));
            }
            EXPECT_NEAR(u(i, j), 1.0 / denom, 1e-12);
        }
    }
}

TEST(FcmMemberships, PermutationEquivariant) {
    std::mt19937_64 gen(5);
    auto px = random_pixels(gen, 25);
    const Centroids v{0.2, 0.7};
    const auto u = fcm::update_memberships(px, v, 2.0);
    std::vector<std::size_t> perm(px.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<double> permuted(px.size());
    for (std::size_t j = 0; j < px.size(); ++j) permuted[j] = px[perm[j]];
    const auto up = fcm::update_memberships(permuted, v, 2.0);
    for (std::size_t j = 0; j < px.size(); ++j) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            EXPECT_EQ(up(i, j), u(i, perm[j]));
        }
    }
}

TEST(FcmCentroids, CrispMembershipsGiveClusterMeans) {
    const std::vector<double> px{0.1, 0.2, 0.6, 0.8, 1.0};
    const auto u = matrix(2, 5, {1, 1, 0, 0, 0, 0, 0, 1, 1, 1});
    const auto v = fcm::update_centroids(px, u, 2.0);
    EXPECT_NEAR(v[0], 0.15, 1e-15);
    EXPECT_NEAR(v[1], 0.8, 1e-15);
}

TEST(FcmCentroids, HandEvaluatedWeightedMean) {
    const std::vector<double> px{0.0, 1.0};
    const auto v = fcm::update_centroids(px, matrix(2, 2, {1, 0.5, 0, 0.5}), 2.0);
    EXPECT_NEAR(v[0], 0.2, 1e-15);
    EXPECT_NEAR(v[1], 1.0, 1e-15);
}

TEST(FcmCentroids, UniformMembershipsGiveGlobalMean) {
    const std::vector<double> px{0.1, 0.4, 0.9, 0.3};
    const auto v = fcm::update_centroids(px, MembershipMatrix(3, 4, 1.0 / 3.0), 2.0);
    for (double c : v) EXPECT_NEAR(c, 0.425, 1e-12);
}

TEST(FcmCentroids, EmptyClusterIsDegenerate) {
    const std::vector<double> px{0.1, 0.4};
    EXPECT_THROW(fcm::update_centroids(px, matrix(2, 2, {1, 1, 0, 0}), 2.0), DegenerateCluster);
}

TEST(FcmObjective, CrispIsWithinClusterSumOfSquares) {
    const std::vector<double> px{0.1, 0.2, 0.6, 0.8, 1.0};
    const auto u = matrix(2, 5, {1, 1, 0, 0, 0, 0, 0, 1, 1, 1});
    const double expected = 0.05 * 0.05 * 2 + 0.2 * 0.2 + 0.0 + 0.2 * 0.2;
    EXPECT_NEAR(fcm::objective(px, u, {0.15, 0.8}, 2.0), expected, 1e-15);
}

TEST(FcmObjective, PerfectFitIsZero) {
    const std::vector<double> px{0.0, 1.0};
    EXPECT_EQ(fcm::objective(px, matrix(2, 2, {1, 0, 0, 1}), {0.0, 1.0}, 2.0), 0.0);
}

TEST(FcmObjective, HandEvaluated) {
    const std::vector<double> px{0.25};
    EXPECT_NEAR(fcm::objective(px, matrix(2, 1, {0.9, 0.1}), {0.0, 1.0}, 2.0), 0.05625, 1e-15);
}

TEST(FcmObjective, ShapeMismatchRejected) {
    const std::vector<double> px{0.25, 0.5};
    EXPECT_THROW(fcm::objective(px, matrix(2, 1, {0.9, 0.1}), {0.0, 1.0}, 2.0), InvalidInput);
}

TEST(FcmRun, SeparatedBlobsRecovered) {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    std::vector<double> px;
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < 50; ++k) {
        px.push_back(0.1 + jitter(gen));
        lo += px.back() / 50;
        px.push_back(0.9 + jitter(gen));
        hi += px.back() / 50;
    }
    fcm::FcmConfig cfg;
    cfg.num_clusters = 2;
    const auto r = fcm::run(px, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.centroids[0], lo, 0.02);
    EXPECT_NEAR(r.centroids[1], hi, 0.02);
}

TEST(FcmRun, ConstantImageSplitsEvenlyOrDegenerates) {
    const std::vector<double> px(16, 0.4);
    fcm::FcmConfig cfg;
    cfg.num_clusters = 2;
    try {
        const auto r = fcm::run(px, cfg);
        for (double u : r.memberships.values()) EXPECT_DOUBLE_EQ(u, 0.5);
    } catch (const DegenerateCluster&) {
        SUCCEED();
    }
}

TEST(FcmRun, Deterministic) {
    std::mt19937_64 gen(7);
    const auto px = random_pixels(gen, 200);
    fcm::FcmConfig cfg;
    cfg.seed = 11;
    EXPECT_EQ(fcm::run(px, cfg), fcm::run(px, cfg));
}

TEST(FcmRun, TooFewPixelsRejected) {
    const std::vector<double> px{0.1, 0.2};
    fcm::FcmConfig cfg;
    cfg.num_clusters = 2;
    EXPECT_THROW(fcm::run(px, cfg), InvalidInput);
}

TEST(FcmRun, CentroidsSortedAscending) {
    std::mt19937_64 gen(8);
    const auto px = random_pixels(gen, 300);
    const auto r = fcm::run(px, fcm::FcmConfig{});
    EXPECT_TRUE(std::is_sorted(r.centroids.begin(), r.centroids.end()));
}

TEST(FcmRun, ObjectiveMonotoneOnRandomInstances) {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto px = random_pixels(gen, 10 + trial * 7);
        fcm::FcmConfig cfg;
        cfg.num_clusters = 2 + trial % 3;
        cfg.fuzzifier = 1.5 + 0.25 * (trial % 5);
        const auto r = fcm::run(px, cfg);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
            ASSERT_LE(r.objective_trace[k], r.objective_trace[k - 1] + 1e-9) << "trial " << trial;
        }
    }
}

TEST(FcmConfig, Validation) {
    fcm::FcmConfig cfg;
    cfg.fuzzifier = 1.0;
    EXPECT_THROW(cfg.validate(), InvalidInput);
    cfg = {};
    cfg.num_clusters = 1;
    EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(FcmRun, GridOracleNeverBeatsConvergedObjective) {
    std::mt19937_64 gen(10);
    for (int trial = 0; trial < 5; ++trial) {
        const auto px = random_pixels(gen, 3 + trial);
        fcm::FcmConfig cfg;
        cfg.num_clusters = 2;
        cfg.tolerance = 1e-9;
        cfg.max_iterations = 1000;
        const auto r = fcm::run(px, cfg);
        const double grid = oracle::fcm_grid_minimum(px, cfg.fuzzifier, 200, 100);
        EXPECT_LE(r.objective, grid + 1e-12) << "trial " << trial;
    }
}
