#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcce/data.hpp"
#include "fcce/fcm.hpp"
#include "fcce/loss.hpp"
#include "fcce/models.hpp"

namespace fcce::harness {

/// Loss applied to each deep-supervision head of a nested model.
enum class HeadLoss { Selected, Hybrid };

struct RunConfig {
    models::ModelKind model = models::ModelKind::UNet;
    int depth = 3;
    int base_channels = 8;
    /// Negative selects the per-model default (0 for U-Net, 0.1 for U-Net++).
    double dropout = -1.0;
    bool deep_supervision = false;
    HeadLoss head_loss = HeadLoss::Selected;

    loss::LossConfig loss;

    int epochs = 30;
    int batch_size = 2;
    double learning_rate = 1e-4;
    int early_stopping_patience = 10;
    std::uint64_t seed = 1;

    std::filesystem::path data_dir;
    std::filesystem::path out_dir;

    // In-memory phantom dataset, used when data_dir is empty.
    data::PhantomConfig phantom;
    double split_fraction = 0.8;
    fcm::FcmConfig fcm;

    void validate() const;
    models::UNetSpec unet_spec() const;
    /// Every key accepted by apply_setting, in documentation order.
    static const std::vector<std::string>& keys();
};

/// Sets one `key = value` entry; throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Reads a line-oriented `key = value` file; `#` starts a comment.
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);

/// Renders every field back to `key = value` lines.
std::string to_config_text(const RunConfig& cfg);

}  // namespace fcce::harness
