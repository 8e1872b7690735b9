// Command-line front end: gen-data, fcm, gradcheck, train, eval, ablate.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fcce/ablation.hpp"
#include "fcce/data.hpp"
#include "fcce/error.hpp"
#include "fcce/fcm.hpp"
#include "fcce/gradcheck.hpp"
#include "fcce/pgm.hpp"
#include "fcce/run_config.hpp"
#include "fcce/tensor_file.hpp"
#include "fcce/training.hpp"

namespace fs = std::filesystem;
using namespace fcce;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// Every RunConfig key doubles as a --key flag; values are applied after --config.
struct ConfigOptions {
    std::string config_file;
    std::map<std::string, std::string> values;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "key = value configuration file");
        for (const auto& key : harness::RunConfig::keys()) {
            std::string names = "--" + key;
            if (key == "out_dir") names = "--out,--out_dir";
            if (key == "data_dir") names = "--data,--data_dir";
            cmd->add_option(names, values[key]);
        }
    }

    harness::RunConfig build() const {
        harness::RunConfig cfg;
        if (!config_file.empty()) {
            harness::load_config_file(config_file, cfg);
        }
        for (const auto& key : harness::RunConfig::keys()) {
            const auto& v = values.at(key);
            if (!v.empty()) {
                harness::apply_setting(cfg, key, v);
            }
        }
        cfg.validate();
        return cfg;
    }
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream in(item);
        T v{};
        if (!(in >> v) || !(in >> std::ws).eof()) {
            throw ConfigError(std::string("invalid ") + what + " entry '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError(std::string("empty ") + what + " list");
    }
    return out;
}

void print_scores(const char* label, const metrics::Scores& s) {
    std::printf("%s AC=%.6f DC=%.6f IoU=%.6f\n", label, s.ac, s.dc, s.iou);
}

int cmd_gen_data(const harness::RunConfig& cfg, bool no_fcm) {
    if (cfg.out_dir.empty()) {
        throw ConfigError("gen-data needs --out");
    }
    auto images = data::generate_phantoms(cfg.phantom);
    if (!no_fcm) {
        fcm::FcmConfig fcm_cfg = cfg.fcm;
        fcm_cfg.num_clusters = cfg.phantom.num_classes;
        data::cache_memberships(images, fcm_cfg);
    }
    data::save_dataset(cfg.out_dir, images);
    std::printf("wrote %zu phantoms to %s\n", images.size(), cfg.out_dir.string().c_str());
    return kExitOk;
}

int cmd_fcm(const harness::RunConfig& cfg, const std::string& input) {
    const io::GrayImage image = io::load_pgm(input);
    const fcm::FcmResult result = fcm::run(image.values, cfg.fcm);
    std::printf("iter,objective\n");
    for (std::size_t i = 0; i < result.objective_trace.size(); ++i) {
        std::printf("%zu,%.12g\n", i + 1, result.objective_trace[i]);
    }
    std::fprintf(stderr, "converged=%d iterations=%d centroids=", result.converged ? 1 : 0, result.iterations_used);
    for (double v : result.centroids) {
        std::fprintf(stderr, " %.6f", v);
    }
    std::fprintf(stderr, "\n");
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        const std::size_t shape[] = {static_cast<std::size_t>(cfg.fcm.num_clusters), image.height, image.width};
        io::save_tensor(cfg.out_dir / "memberships.bin", shape, result.memberships.values());
        const std::size_t cshape[] = {result.centroids.size()};
        io::save_tensor(cfg.out_dir / "centroids.bin", cshape, result.centroids);
    }
    return kExitOk;
}

int cmd_gradcheck(const std::vector<std::string>& modes, int instances, std::uint64_t seed) {
    const auto rows = harness::gradcheck(modes.empty() ? harness::gradcheck_modes() : modes, instances, seed);
    bool ok = true;
    std::printf("mode,max_rel_err\n");
    for (const auto& row : rows) {
        std::printf("%s,%.3e\n", row.mode.c_str(), row.max_rel_err);
        ok = ok && row.max_rel_err < harness::kGradcheckThreshold;
    }
    return ok ? kExitOk : kExitNumeric;
}

int cmd_train(const harness::RunConfig& cfg) {
    const auto split = harness::load_or_generate(cfg);
    const auto result = harness::train(cfg, split);
    std::printf("epochs_run=%d stopped_early=%d best_epoch=%d\n", result.epochs_run, result.stopped_early ? 1 : 0,
                result.best.epoch);
    print_scores("train", result.best.train);
    print_scores("val", result.best.val);
    return kExitOk;
}

int cmd_eval(const harness::RunConfig& cfg, std::string checkpoint, bool all) {
    if (checkpoint.empty()) {
        if (cfg.out_dir.empty()) {
            throw ConfigError("eval needs --checkpoint or --out containing best.ckpt");
        }
        checkpoint = (cfg.out_dir / "best.ckpt").string();
    }
    auto split = harness::load_or_generate(cfg);
    std::vector<data::LabeledImage> images = std::move(split.val);
    if (all) {
        images.insert(images.begin(), split.train.begin(), split.train.end());
    }
    if (images.empty()) {
        throw ConfigError("eval: no images selected");
    }
    const auto result = harness::evaluate_checkpoint(checkpoint, images, cfg.out_dir);
    print_scores("eval", result.scores);
    return kExitOk;
}

int cmd_ablate(const harness::RunConfig& cfg, const std::string& seeds, const std::string& lambdas) {
    const auto split = harness::load_or_generate(cfg);
    const auto result = harness::ablation(cfg, split, parse_list<std::uint64_t>(seeds, "seed"),
                                          parse_list<double>(lambdas, "lambda"));
    std::fputs(harness::ablation_csv(result).c_str(), stdout);
    std::fputs(harness::ablation_summary_text(result).c_str(), stdout);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fuzzy categorical cross-entropy segmentation toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate a phantom dataset (PGM images, labels, FCM memberships)");
    ConfigOptions gen_opts;
    gen_opts.attach(gen);
    bool no_fcm = false;
    gen->add_flag("--no-fcm", no_fcm, "Skip caching FCM memberships");

    auto* fcm_cmd = app.add_subcommand("fcm", "Run fuzzy c-means on one PGM image");
    ConfigOptions fcm_opts;
    fcm_opts.attach(fcm_cmd);
    std::string fcm_input;
    fcm_cmd->add_option("--input", fcm_input, "Input PGM")->required();

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    std::vector<std::string> grad_modes;
    int grad_instances = 100;
    std::uint64_t grad_seed = 1;
    grad->add_option("--mode", grad_modes, "Restrict to these modes (repeatable)");
    grad->add_option("--instances", grad_instances, "Random instances per mode");
    grad->add_option("--seed", grad_seed);

    auto* train_cmd = app.add_subcommand("train", "Train a model; writes metrics.csv and best.ckpt");
    ConfigOptions train_opts;
    train_opts.attach(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint; writes pred_%04d.pgm");
    ConfigOptions eval_opts;
    eval_opts.attach(eval_cmd);
    std::string checkpoint;
    bool eval_all = false;
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/best.ckpt)");
    eval_cmd->add_flag("--all", eval_all, "Evaluate train and validation images");

    auto* ablate_cmd = app.add_subcommand("ablate", "CCE vs FCCE ablation; writes ablation.csv");
    ConfigOptions ablate_opts;
    ablate_opts.attach(ablate_cmd);
    std::string seeds = "1,2,3,4,5";
    std::string lambdas = "0.1,0.5";
    ablate_cmd->add_option("--seeds", seeds, "Comma-separated training seeds");
    ablate_cmd->add_option("--lambdas", lambdas, "Comma-separated FCCE lambdas");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*gen) return cmd_gen_data(gen_opts.build(), no_fcm);
        if (*fcm_cmd) return cmd_fcm(fcm_opts.build(), fcm_input);
        if (*grad) return cmd_gradcheck(grad_modes, grad_instances, grad_seed);
        if (*train_cmd) return cmd_train(train_opts.build());
        if (*eval_cmd) return cmd_eval(eval_opts.build(), checkpoint, eval_all);
        if (*ablate_cmd) return cmd_ablate(ablate_opts.build(), seeds, lambdas);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const DegenerateCluster& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitConfig;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitConfig;
}
