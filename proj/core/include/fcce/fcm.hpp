#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fcce/matrix.hpp"

namespace fcce::fcm {

/// c x N membership degrees; column j holds pixel j's degrees across clusters.
using MembershipMatrix = ClassMatrix;
using Centroids = std::vector<double>;

struct FcmConfig {
    int num_clusters = 4;
    double fuzzifier = 2.0;
    int max_iterations = 100;
    double tolerance = 1e-5;
    std::uint64_t seed = 0;

    /// Throws InvalidInput when c < 2, m <= 1 or tolerance <= 0.
    void validate() const;
};

struct FcmResult {
    MembershipMatrix memberships;
    Centroids centroids;
    double objective = 0.0;
    int iterations_used = 0;
    bool converged = false;
    /// Objective after each (membership, centroid) update pair.
    std::vector<double> objective_trace;

    friend bool operator==(const FcmResult&, const FcmResult&) = default;
};

// Membership update. A pixel that coincides with k centroids gets 1/k on each of
// them and 0 elsewhere.
MembershipMatrix update_memberships(std::span<const double> pixels, const Centroids& centroids,
                                    double fuzzifier);

// Weighted-mean centroid update. Throws DegenerateCluster for an all-zero row.
Centroids update_centroids(std::span<const double> pixels, const MembershipMatrix& memberships,
                           double fuzzifier);

double objective(std::span<const double> pixels, const MembershipMatrix& memberships,
                 const Centroids& centroids, double fuzzifier);

/// Deterministic starting centroids: evenly spaced quantiles of the intensities.
/// Coinciding quantiles are replaced by other distinct intensities drawn with `seed`.
Centroids initial_centroids(std::span<const double> pixels, int num_clusters, std::uint64_t seed);

/// Alternates membership and centroid updates until the largest membership change
/// drops below the tolerance. Clusters in the result are ordered by ascending centroid.
FcmResult run(std::span<const double> pixels, const FcmConfig& config);

}  // namespace fcce::fcm
