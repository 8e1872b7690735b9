#include "fcce/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>

#include "fcce/parallel.hpp"
#include "fcce/training.hpp"

namespace fcce::harness {

namespace {

std::string arm_label(const AblationRun& run) {
    if (run.arm == "cce") {
        return "cce";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fcce_l%g", run.lambda);
    return buf;
}

AblationSummary summarize(const std::vector<AblationRun>& runs, const std::vector<std::uint64_t>& seeds,
                          const std::vector<double>& lambdas) {
    AblationSummary s;
    std::map<std::uint64_t, double> cce;
    std::map<double, std::map<std::uint64_t, double>> fcce;
    for (const auto& r : runs) {
        (r.arm == "cce" ? cce[r.seed] : fcce[r.lambda][r.seed]) = r.best.val.dc;
    }
    double best_mean = -1.0;
    for (double lambda : lambdas) {
        const auto& per_seed = fcce[lambda];
        if (per_seed.size() != seeds.size()) {
            continue;
        }
        double mean = 0.0;
        for (const auto& [seed, dc] : per_seed) {
            mean += dc / static_cast<double>(per_seed.size());
        }
        if (mean > best_mean) {
            best_mean = mean;
            s.chosen_lambda = lambda;
        }
    }
    if (best_mean < 0.0 || cce.size() != seeds.size()) {
        return s;
    }
    s.seeds = static_cast<int>(seeds.size());
    for (std::uint64_t seed : seeds) {
        const double a = cce[seed];
        const double b = fcce[s.chosen_lambda][seed];
        s.fcce_wins += b >= a ? 1 : 0;
        s.mean_val_dc_cce += a / static_cast<double>(seeds.size());
        s.mean_val_dc_fcce += b / static_cast<double>(seeds.size());
    }
    s.mean_val_dc_difference = s.mean_val_dc_fcce - s.mean_val_dc_cce;
    return s;
}

}  // namespace

AblationResult ablation(const RunConfig& base, const data::DatasetSplit& split, const std::vector<std::uint64_t>& seeds,
                        const std::vector<double>& lambdas) {
    if (seeds.size() < 3) {
        throw ConfigError("ablation needs at least 3 seeds");
    }
    if (lambdas.empty()) {
        throw ConfigError("ablation needs at least one FCCE lambda");
    }
    struct Job {
        std::uint64_t seed;
        bool fcce;
        double lambda;
    };
    std::vector<Job> jobs;
    for (std::uint64_t seed : seeds) {
        jobs.push_back({seed, false, 0.0});
        for (double lambda : lambdas) {
            jobs.push_back({seed, true, lambda});
        }
    }

    std::vector<std::optional<AblationRun>> slots(jobs.size());
    std::mutex error_mutex;
    std::string first_error;
    parallel_for(jobs.size(), [&](std::size_t i) {
        const Job& job = jobs[i];
        RunConfig cfg = base;
        cfg.seed = job.seed;
        cfg.loss.kind = job.fcce ? loss::LossKind::Fcce : loss::LossKind::Cce;
        cfg.loss.lambda = job.fcce ? job.lambda : 0.0;
        AblationRun run;
        run.seed = job.seed;
        run.arm = job.fcce ? "fcce" : "cce";
        run.lambda = cfg.loss.lambda;
        if (!base.out_dir.empty()) {
            cfg.out_dir = base.out_dir / "runs" / ("seed" + std::to_string(job.seed) + "_" + arm_label(run));
        }
        try {
            TrainResult tr = train(cfg, split);
            run.best = tr.best;
            run.last = tr.history.back();
            run.epochs_run = tr.epochs_run;
            slots[i] = run;
        } catch (const std::exception& e) {
            std::lock_guard lock(error_mutex);
            if (first_error.empty()) {
                first_error = "seed " + std::to_string(job.seed) + " " + arm_label(run) + ": " + e.what();
            }
        }
    });

    AblationResult result;
    for (auto& slot : slots) {
        if (slot) {
            result.runs.push_back(*slot);
        }
    }
    result.summary = summarize(result.runs, seeds, lambdas);
    if (!base.out_dir.empty()) {
        std::filesystem::create_directories(base.out_dir);
        std::ofstream(base.out_dir / "ablation.csv", std::ios::binary) << ablation_csv(result);
        std::ofstream(base.out_dir / "ablation_summary.txt", std::ios::binary) << ablation_summary_text(result);
    }
    if (!first_error.empty()) {
        throw NumericError("ablation aborted (" + std::to_string(result.runs.size()) + " of " +
                           std::to_string(jobs.size()) + " runs completed): " + first_error);
    }
    return result;
}

std::string ablation_csv(const AblationResult& result) {
    std::string out = "seed,loss,lambda,best_epoch,epochs_run,AC,DC,IoU,AC_val,DC_val,IoU_val,DC_val_final\n";
    char buf[256];
    for (const auto& r : result.runs) {
        std::snprintf(buf, sizeof buf, "%llu,%s,%g,%d,%d,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f\n",
                      static_cast<unsigned long long>(r.seed), r.arm.c_str(), r.lambda, r.best.epoch, r.epochs_run,
                      r.best.train.ac, r.best.train.dc, r.best.train.iou, r.best.val.ac, r.best.val.dc, r.best.val.iou,
                      r.last.val.dc);
        out += buf;
    }
    return out;
}

std::string ablation_summary_text(const AblationResult& result) {
    const AblationSummary& s = result.summary;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "chosen_lambda=%g\nfcce_wins=%d/%d\nmean_DC_val_cce=%.6f\nmean_DC_val_fcce=%.6f\n"
                  "mean_DC_val_difference=%.6f\n",
                  s.chosen_lambda, s.fcce_wins, s.seeds, s.mean_val_dc_cce, s.mean_val_dc_fcce,
                  s.mean_val_dc_difference);
    return buf;
}

}  // namespace fcce::harness
