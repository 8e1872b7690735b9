#include "fcce/fcm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace fcce::fcm {

namespace {

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvalidInput(std::string(what) + " contains a non-finite value");
        }
    }
}

}  // namespace

void FcmConfig::validate() const {
    if (num_clusters < 2) {
        throw InvalidInput("fcm: num_clusters must be at least 2");
    }
    if (!(fuzzifier > 1.0)) {
        throw InvalidInput("fcm: fuzzifier must exceed 1");
    }
    if (!(tolerance > 0.0)) {
        throw InvalidInput("fcm: tolerance must be positive");
    }
    if (max_iterations < 1) {
        throw InvalidInput("fcm: max_iterations must be at least 1");
    }
}

MembershipMatrix update_memberships(std::span<const double> pixels, const Centroids& centroids,
                                    double fuzzifier) {
    if (pixels.empty()) {
        throw InvalidInput("update_memberships: no pixels");
    }
    if (centroids.empty()) {
        throw InvalidInput("update_memberships: no centroids");
    }
    if (!(fuzzifier > 1.0)) {
        throw InvalidInput("update_memberships: fuzzifier must exceed 1");
    }
    require_finite(pixels, "update_memberships: pixels");
    require_finite(centroids, "update_memberships: centroids");

    const std::size_t c = centroids.size();
    const std::size_t n = pixels.size();
    const double exponent = 2.0 / (fuzzifier - 1.0);
    MembershipMatrix u(c, n);
    std::vector<double> dist(c);

    for (std::size_t j = 0; j < n; ++j) {
        std::size_t coincident = 0;
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c; ++i) {
            dist[i] = std::abs(pixels[j] - centroids[i]);
            if (dist[i] == 0.0) {
                ++coincident;
            }
            nearest = std::min(nearest, dist[i]);
        }
        if (coincident > 0) {
            const double share = 1.0 / static_cast<double>(coincident);
            for (std::size_t i = 0; i < c; ++i) {
                u(i, j) = dist[i] == 0.0 ? share : 0.0;
            }
            continue;
        }
        // (d_min / d_i)^(2/(m-1)) lies in (0, 1], so no overflow for tiny distances.
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            dist[i] = std::pow(nearest / dist[i], exponent);
            total += dist[i];
        }
        for (std::size_t i = 0; i < c; ++i) {
            u(i, j) = dist[i] / total;
        }
    }
    return u;
}

Centroids update_centroids(std::span<const double> pixels, const MembershipMatrix& memberships,
                           double fuzzifier) {
    if (memberships.pixels() != pixels.size()) {
        throw InvalidInput("update_centroids: membership columns do not match pixel count");
    }
    Centroids v(memberships.classes());
    for (std::size_t i = 0; i < memberships.classes(); ++i) {
        double weighted = 0.0;
        double mass = 0.0;
        const auto row = memberships.row(i);
        for (std::size_t j = 0; j < pixels.size(); ++j) {
            const double w = std::pow(row[j], fuzzifier);
            weighted += w * pixels[j];
            mass += w;
        }
        if (!(mass > 0.0)) {
            throw DegenerateCluster("update_centroids: cluster " + std::to_string(i) +
                                    " has no membership mass");
        }
        v[i] = weighted / mass;
    }
    return v;
}

double objective(std::span<const double> pixels, const MembershipMatrix& memberships,
                 const Centroids& centroids, double fuzzifier) {
    if (memberships.pixels() != pixels.size() || memberships.classes() != centroids.size()) {
        throw InvalidInput("objective: shape mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < centroids.size(); ++i) {
        const auto row = memberships.row(i);
        for (std::size_t j = 0; j < pixels.size(); ++j) {
            const double d = pixels[j] - centroids[i];
            total += std::pow(row[j], fuzzifier) * d * d;
        }
    }
    return total;
}

Centroids initial_centroids(std::span<const double> pixels, int num_clusters, std::uint64_t seed) {
    std::vector<double> sorted(pixels.begin(), pixels.end());
    std::sort(sorted.begin(), sorted.end());
    const auto c = static_cast<std::size_t>(num_clusters);
    const std::size_t n = sorted.size();

    Centroids v(c);
    for (std::size_t i = 0; i < c; ++i) {
        const auto pos = static_cast<std::size_t>((static_cast<double>(i) + 0.5) / static_cast<double>(c) *
                                                  static_cast<double>(n));
        v[i] = sorted[std::min(pos, n - 1)];
    }

    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 1; i < c; ++i) {
        if (std::find(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(i), v[i]) ==
            v.begin() + static_cast<std::ptrdiff_t>(i)) {
            continue;
        }
        std::vector<double> unused;
        for (double d : distinct) {
            if (std::find(v.begin(), v.end(), d) == v.end()) {
                unused.push_back(d);
            }
        }
        if (unused.empty()) {
            break;
        }
        std::uniform_int_distribution<std::size_t> pick(0, unused.size() - 1);
        v[i] = unused[pick(rng)];
    }
    std::sort(v.begin(), v.end());
    return v;
}

FcmResult run(std::span<const double> pixels, const FcmConfig& config) {
    config.validate();
    if (pixels.size() <= static_cast<std::size_t>(config.num_clusters)) {
        throw InvalidInput("fcm::run: need more pixels than clusters");
    }
    require_finite(pixels, "fcm::run: pixels");

    FcmResult result;
    result.centroids = initial_centroids(pixels, config.num_clusters, config.seed);
    MembershipMatrix previous;
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        MembershipMatrix u = update_memberships(pixels, result.centroids, config.fuzzifier);
        double change = std::numeric_limits<double>::infinity();
        if (!previous.empty()) {
            change = 0.0;
            for (std::size_t k = 0; k < u.values().size(); ++k) {
                change = std::max(change, std::abs(u.values()[k] - previous.values()[k]));
            }
        }
        result.centroids = update_centroids(pixels, u, config.fuzzifier);
        result.objective = objective(pixels, u, result.centroids, config.fuzzifier);
        result.objective_trace.push_back(result.objective);
        result.iterations_used = iter;
        previous = std::move(u);
        if (change < config.tolerance) {
            result.converged = true;
            break;
        }
    }

    const std::size_t c = result.centroids.size();
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return result.centroids[a] < result.centroids[b]; });
    MembershipMatrix sorted(c, previous.pixels());
    Centroids sorted_v(c);
    for (std::size_t k = 0; k < c; ++k) {
        sorted_v[k] = result.centroids[order[k]];
        const auto src = previous.row(order[k]);
        std::copy(src.begin(), src.end(), sorted.row(k).begin());
    }
    result.memberships = std::move(sorted);
    result.centroids = std::move(sorted_v);
    return result;
}

}  // namespace fcce::fcm
