#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace oracle {

// Minimum of the FCM objective (c = 2) over a joint grid: centroids on a `v_steps`
// lattice of [0, 1] (v0 <= v1) and memberships in steps of 1/u_steps. For fixed
// centroids the objective separates per pixel, so the membership grid is searched
// pixel by pixel, which keeps the search exhaustive.
inline double fcm_grid_minimum(std::span<const double> px, double m, int v_steps = 400, int u_steps = 100) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= v_steps; ++a) {
        const double v0 = static_cast<double>(a) / v_steps;
        for (int b = a; b <= v_steps; ++b) {
            const double v1 = static_cast<double>(b) / v_steps;
            double total = 0.0;
            for (double x : px) {
                const double d0 = (x - v0) * (x - v0);
                const double d1 = (x - v1) * (x - v1);
                double pixel_best = std::numeric_limits<double>::infinity();
                for (int k = 0; k <= u_steps; ++k) {
                    const double u = static_cast<double>(k) / u_steps;
                    pixel_best = std::min(pixel_best, std::pow(u, m) * d0 + std::pow(1.0 - u, m) * d1);
                }
                total += pixel_best;
                if (total >= best) break;
            }
            best = std::min(best, total);
        }
    }
    return best;
}

// Counting-based dice / IoU for one class.
struct Overlap {
    std::size_t pred = 0, truth = 0, both = 0;
};

inline Overlap overlap(std::span<const int> pred, std::span<const int> truth, int cls) {
    Overlap o;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        o.pred += pred[k] == cls;
        o.truth += truth[k] == cls;
        o.both += pred[k] == cls && truth[k] == cls;
    }
    return o;
}

// Direct 4-loop cross-correlation, zero padding, stride 1. in: [C,H,W], w: [O,C,K,K].
inline std::vector<double> conv_reference(const std::vector<double>& in, std::size_t c, std::size_t h, std::size_t wd,
                                          const std::vector<double>& w, const std::vector<double>& bias,
                                          std::size_t o, std::size_t k, bool same) {
    const long pad = same ? static_cast<long>(k / 2) : 0;
    const std::size_t oh = same ? h : h - k + 1;
    const std::size_t ow = same ? wd : wd - k + 1;
    std::vector<double> out(o * oh * ow);
    for (std::size_t oc = 0; oc < o; ++oc)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = bias[oc];
                for (std::size_t ic = 0; ic < c; ++ic)
                    for (std::size_t dy = 0; dy < k; ++dy)
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            const long sy = static_cast<long>(y + dy) - pad;
                            const long sx = static_cast<long>(x + dx) - pad;
                            if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(wd)) continue;
                            acc += in[(ic * h + sy) * wd + sx] * w[((oc * c + ic) * k + dy) * k + dx];
                        }
                out[(oc * oh + y) * ow + x] = acc;
            }
    return out;
}

}  // namespace oracle
