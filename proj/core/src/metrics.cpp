#include "fcce/metrics.hpp"

#include <cstdio>
#include <numeric>

#include "fcce/error.hpp"

namespace fcce::metrics {

namespace {

void check(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw InvalidInput("metrics: label maps differ in size (" + std::to_string(predicted.size()) + " vs " +
                           std::to_string(truth.size()) + ")");
    }
    if (truth.empty()) {
        throw InvalidInput("metrics: empty label maps");
    }
}

struct Counts {
    std::vector<std::size_t> intersection, predicted, truth;
};

Counts count(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    check(predicted, truth);
    const auto c = static_cast<std::size_t>(num_classes);
    Counts counts{std::vector<std::size_t>(c), std::vector<std::size_t>(c), std::vector<std::size_t>(c)};
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const int p = predicted[k];
        const int t = truth[k];
        if (p < 0 || p >= num_classes || t < 0 || t >= num_classes) {
            throw InvalidInput("metrics: label out of range at pixel " + std::to_string(k));
        }
        ++counts.predicted[static_cast<std::size_t>(p)];
        ++counts.truth[static_cast<std::size_t>(t)];
        if (p == t) {
            ++counts.intersection[static_cast<std::size_t>(p)];
        }
    }
    return counts;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    check(predicted, truth);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        hits += predicted[k] == truth[k] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<double> dice_per_class(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    const Counts c = count(predicted, truth, num_classes);
    std::vector<double> out(c.truth.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t denom = c.predicted[k] + c.truth[k];
        out[k] = denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.intersection[k]) / static_cast<double>(denom);
    }
    return out;
}

std::vector<double> iou_per_class(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    const Counts c = count(predicted, truth, num_classes);
    std::vector<double> out(c.truth.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t uni = c.predicted[k] + c.truth[k] - c.intersection[k];
        out[k] = uni == 0 ? 1.0 : static_cast<double>(c.intersection[k]) / static_cast<double>(uni);
    }
    return out;
}

double dice(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    return mean(dice_per_class(predicted, truth, num_classes));
}

double iou(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    return mean(iou_per_class(predicted, truth, num_classes));
}

Scores score(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    Scores s;
    s.ac = accuracy(predicted, truth);
    s.dc_per_class = dice_per_class(predicted, truth, num_classes);
    s.iou_per_class = iou_per_class(predicted, truth, num_classes);
    s.dc = mean(s.dc_per_class);
    s.iou = mean(s.iou_per_class);
    return s;
}

std::string csv_header(int num_classes) {
    std::string out = "epoch,loss,AC,DC,IoU,AC_val,DC_val,IoU_val";
    for (int k = 0; k < num_classes; ++k) {
        out += ",DC_" + std::to_string(k);
    }
    for (int k = 0; k < num_classes; ++k) {
        out += ",IoU_" + std::to_string(k);
    }
    return out;
}

std::string csv_row(const MetricsRecord& r) {
    char buf[64];
    std::string out = std::to_string(r.epoch);
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.8f", v);
        out += buf;
    };
    put(r.loss);
    put(r.train.ac);
    put(r.train.dc);
    put(r.train.iou);
    put(r.val.ac);
    put(r.val.dc);
    put(r.val.iou);
    for (double v : r.val.dc_per_class) put(v);
    for (double v : r.val.iou_per_class) put(v);
    return out;
}

}  // namespace fcce::metrics
