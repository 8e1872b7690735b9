#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcce/metrics.hpp"
#include "fcce/run_config.hpp"

namespace fcce::harness {

struct AblationRun {
    std::uint64_t seed = 0;
    std::string arm;  // "cce" or "fcce"
    double lambda = 0.0;
    metrics::MetricsRecord best;
    metrics::MetricsRecord last;
    int epochs_run = 0;
};

struct AblationSummary {
    double chosen_lambda = 0.0;
    int fcce_wins = 0;  // seeds where FCCE best val DC >= CCE best val DC
    int seeds = 0;
    double mean_val_dc_cce = 0.0;
    double mean_val_dc_fcce = 0.0;
    double mean_val_dc_difference = 0.0;  // FCCE - CCE
};

struct AblationResult {
    std::vector<AblationRun> runs;
    AblationSummary summary;
};

/// For every seed trains one CCE run and one FCCE run per lambda from identical
/// initialisation and data order. The FCCE lambda with the highest mean best-epoch
/// validation DC across seeds is compared against CCE seed by seed.
/// With an output directory, per-run metrics go to runs/seed<S>_<arm>/ and the merged
/// table to ablation.csv (also written with partial results if a run fails).
AblationResult ablation(const RunConfig& base, const data::DatasetSplit& split, const std::vector<std::uint64_t>& seeds,
                        const std::vector<double>& lambdas);

std::string ablation_csv(const AblationResult& result);
std::string ablation_summary_text(const AblationResult& result);

}  // namespace fcce::harness
