#pragma once

#include <span>
#include <string>
#include <vector>

namespace fcce::metrics {

double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Per-class 2|P∩T|/(|P|+|T|); a class absent from both maps scores 1.
std::vector<double> dice_per_class(std::span<const int> predicted, std::span<const int> truth, int num_classes);
/// Per-class |P∩T|/|P∪T|; a class absent from both maps scores 1.
std::vector<double> iou_per_class(std::span<const int> predicted, std::span<const int> truth, int num_classes);

/// Unweighted means over all classes, background included.
double dice(std::span<const int> predicted, std::span<const int> truth, int num_classes);
double iou(std::span<const int> predicted, std::span<const int> truth, int num_classes);

struct Scores {
    double ac = 0.0;
    double dc = 0.0;
    double iou = 0.0;
    std::vector<double> dc_per_class;
    std::vector<double> iou_per_class;
};

Scores score(std::span<const int> predicted, std::span<const int> truth, int num_classes);

struct MetricsRecord {
    int epoch = 0;
    double loss = 0.0;
    Scores train;
    Scores val;
};

/// `epoch,loss,AC,DC,IoU,AC_val,DC_val,IoU_val` then `DC_k`/`IoU_k` per class (validation).
std::string csv_header(int num_classes);
std::string csv_row(const MetricsRecord& record);

}  // namespace fcce::metrics
