#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "fcce/data.hpp"
#include "fcce/metrics.hpp"
#include "fcce/models.hpp"
#include "fcce/run_config.hpp"

namespace fcce::harness {

struct TrainResult {
    std::vector<metrics::MetricsRecord> history;
    /// Record of the epoch whose weights were checkpointed (best validation DC).
    metrics::MetricsRecord best;
    int epochs_run = 0;
    bool stopped_early = false;
    /// Objective value of every optimisation step, in order.
    std::vector<double> step_losses;
    /// Model holding the best-epoch weights.
    std::unique_ptr<models::SegmentationModel> model;
};

/// Builds the data split described by cfg: loads data_dir when set (memberships from
/// mem_*.bin), otherwise generates phantoms and runs FCM when the loss needs it.
data::DatasetSplit load_or_generate(const RunConfig& cfg);

/// Seeded shuffle, forward, loss, backward and Adam step per batch; metrics every
/// epoch; early stopping on validation DC. When cfg.out_dir is set, writes
/// metrics.csv and best.ckpt there.
TrainResult train(const RunConfig& cfg, const data::DatasetSplit& split);

struct EvalResult {
    metrics::Scores scores;
    std::vector<std::vector<int>> predictions;
};

/// Eval-mode forward (no dropout, running batchnorm statistics) over `images`.
EvalResult evaluate(models::SegmentationModel& model, const std::vector<data::LabeledImage>& images,
                    int batch_size = 2);

/// Loads a checkpoint written by train and evaluates it. When out_dir is non-empty the
/// predicted label maps are written there as pred_%04d.pgm.
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::vector<data::LabeledImage>& images,
                               const std::filesystem::path& out_dir = {});

std::unique_ptr<models::SegmentationModel> load_model(const std::filesystem::path& checkpoint);

/// Stacks the intensities of images[first, first+count) into a [B,1,H,W] tensor.
nn::Tensor<float> make_batch(const std::vector<data::LabeledImage>& images, const std::vector<std::size_t>& order,
                             std::size_t first, std::size_t count);

}  // namespace fcce::harness
