// Acceptance suite. Prints one PASS/FAIL line per criterion; `--criterion N` runs one.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fcce/ablation.hpp"
#include "fcce/fcm.hpp"
#include "fcce/gradcheck.hpp"
#include "fcce/metrics.hpp"
#include "fcce/models.hpp"
#include "fcce/training.hpp"
#include "oracles.hpp"

using namespace fcce;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "fcce_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1. FCM closed forms, monotone descent, brute-force grid oracle; under 10 s.
Outcome fcm_correctness() {
    Outcome out;
    const auto start = Clock::now();

    const std::vector<double> quarter{0.25};
    const auto u = fcm::update_memberships(quarter, {0.0, 1.0}, 2.0);
    out.require(std::abs(u(0, 0) - 0.9) <= 1e-9 && std::abs(u(1, 0) - 0.1) <= 1e-9, "0.9/0.1 membership");
    const std::vector<double> ends{0.0, 1.0};
    const auto crisp = fcm::update_memberships(ends, {0.0, 1.0}, 2.0);
    out.require(crisp.values() == std::vector<double>{1, 0, 0, 1}, "zero-distance memberships");
    const std::vector<double> half{0.5};
    const auto even = fcm::update_memberships(half, {0.0, 1.0}, 2.0);
    out.require(even(0, 0) == 0.5 && even(1, 0) == 0.5, "equidistant memberships");
    fcm::MembershipMatrix w(2, 2);
    w.values() = {1.0, 0.5, 0.0, 0.5};
    const auto v = fcm::update_centroids(ends, w, 2.0);
    out.require(std::abs(v[0] - 0.2) <= 1e-15 && std::abs(v[1] - 1.0) <= 1e-15, "centroid 0.2/1.0");
    fcm::MembershipMatrix q(2, 1);
    q.values() = {0.9, 0.1};
    out.require(std::abs(fcm::objective(quarter, q, {0.0, 1.0}, 2.0) - 0.05625) <= 1e-15, "objective 0.05625");
    out.require(fcm::objective(ends, crisp, {0.0, 1.0}, 2.0) == 0.0, "perfect-fit objective");

    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int monotone_violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> px(20 + 10 * (trial % 7));
        for (auto& p : px) p = unit(gen);
        fcm::FcmConfig cfg;
        cfg.num_clusters = 2 + trial % 4;
        cfg.fuzzifier = 1.5 + 0.5 * (trial % 3);
        cfg.seed = static_cast<std::uint64_t>(trial);
        const auto r = fcm::run(px, cfg);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
            monotone_violations += r.objective_trace[k] > r.objective_trace[k - 1] + 1e-9;
        }
    }
    out.require(monotone_violations == 0, std::to_string(monotone_violations) + " objective increases");

    // Grid: centroids on a 1/200 lattice, memberships on a 1/100 lattice. Any feasible grid
    // point bounds the true minimum from above, so a converged run may only lose to it by
    // the convergence slack.
    double worst_gap = 0.0;
    for (int trial = 0; trial < 12; ++trial) {
        std::vector<double> px(3 + trial % 6);
        for (auto& p : px) p = unit(gen);
        fcm::FcmConfig cfg;
        cfg.num_clusters = 2;
        cfg.tolerance = 1e-10;
        cfg.max_iterations = 5000;
        const auto r = fcm::run(px, cfg);
        const double grid = oracle::fcm_grid_minimum(px, cfg.fuzzifier, 200, 100);
        worst_gap = std::max(worst_gap, r.objective - grid);
    }
    out.require(worst_gap <= 1e-9, "grid oracle beats converged objective by " + fmt("%.3e", worst_gap));

    const double elapsed = seconds_since(start);
    out.require(elapsed < 10.0, "runtime " + fmt("%.1f s", elapsed));
    out.detail = out.detail.empty() ? "grid gap " + fmt("%.2e", worst_gap) + ", " + fmt("%.2f s", elapsed) : out.detail;
    return out;
}

// 2. Finite-difference gradient suite, 100 instances per mode, float64; under 2 min.
Outcome gradient_suite() {
    Outcome out;
    const auto start = Clock::now();
    const auto rows = harness::gradcheck(harness::gradcheck_modes(), 100, 1);
    double worst = 0.0;
    std::string worst_mode;
    for (const auto& row : rows) {
        if (row.max_rel_err > worst) {
            worst = row.max_rel_err;
            worst_mode = row.mode;
        }
        out.require(row.max_rel_err < 1e-4, row.mode + " max rel err " + fmt("%.3e", row.max_rel_err));
    }
    const double elapsed = seconds_since(start);
    out.require(elapsed < 120.0, "runtime " + fmt("%.1f s", elapsed));
    if (out.pass) {
        out.detail = std::to_string(rows.size()) + " modes, worst " + worst_mode + " " + fmt("%.2e", worst) + ", " +
                     fmt("%.1f s", elapsed);
    }
    return out;
}

harness::RunConfig ablation_base() {
    harness::RunConfig cfg;
    cfg.model = models::ModelKind::UNet;
    cfg.depth = 3;
    cfg.phantom.count = 64;
    cfg.phantom.size = 32;
    cfg.phantom.boundary_blur_sigma = 1.5;
    cfg.phantom.noise_sigma = 0.05;
    cfg.loss.membership_source = loss::MembershipSource::Prediction;
    return cfg;
}

// 3. FCCE with lambda = 0 reproduces CCE bitwise over 5 epochs.
Outcome reduction_identity() {
    Outcome out;
    harness::RunConfig cce = ablation_base();
    cce.epochs = 5;
    cce.loss.kind = loss::LossKind::Cce;
    cce.out_dir = scratch("reduction_cce");
    harness::RunConfig fcce = cce;
    fcce.loss.kind = loss::LossKind::Fcce;
    fcce.loss.lambda = 0.0;
    fcce.out_dir = scratch("reduction_fcce");
    const auto split = harness::load_or_generate(cce);
    const auto a = harness::train(cce, split);
    const auto b = harness::train(fcce, split);
    out.require(a.step_losses == b.step_losses, "step losses differ");
    out.require(slurp(cce.out_dir / "metrics.csv") == slurp(fcce.out_dir / "metrics.csv"), "metrics.csv differs");
    out.require(slurp(cce.out_dir / "best.ckpt") == slurp(fcce.out_dir / "best.ckpt"), "checkpoint differs");
    if (out.pass) out.detail = std::to_string(a.step_losses.size()) + " optimisation steps identical";
    return out;
}

// 4. Nested lattice: L(L+1)/2 nodes, in-degree j+1 for j > 0.
Outcome nested_structure() {
    Outcome out;
    for (int depth : {2, 3, 4}) {
        models::UNetSpec spec;
        spec.depth = depth;
        spec.base_channels = 4;
        models::UNetPlusPlus model(spec, true, 1);
        out.require(model.nodes().size() == static_cast<std::size_t>(depth * (depth + 1) / 2),
                    "L=" + std::to_string(depth) + " node count " + std::to_string(model.nodes().size()));
        for (const auto& info : model.nodes()) {
            const std::string tag = std::to_string(info.id.i) + "_" + std::to_string(info.id.j);
            if (info.id.j > 0) {
                out.require(info.inputs.size() == static_cast<std::size_t>(info.id.j + 1),
                            "L=" + std::to_string(depth) + " node " + tag + " in-degree");
                int same = 0, up = 0;
                for (const auto& e : info.inputs) {
                    same += e.kind == models::EdgeKind::Same && e.from.i == info.id.i;
                    up += e.kind == models::EdgeKind::Up && e.from.i == info.id.i + 1 && e.from.j == info.id.j - 1;
                }
                out.require(same == info.id.j && up == 1, "node " + tag + " edge kinds");
            }
            // The block's first convolution must consume exactly the declared inputs.
            const auto* w = model.params().find("x" + tag + ".conv1.weight");
            out.require(w && w->tensor.dim(1) == info.in_channels, "node " + tag + " conv input channels");
        }
    }
    if (out.pass) out.detail = "L in {2,3,4}: 3, 6, 10 nodes";
    return out;
}

// 5. Tiny U-Net overfits one batch of two phantoms with CCE in 200 epochs.
Outcome overfit_sanity() {
    Outcome out;
    const auto start = Clock::now();
    harness::RunConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 8;
    cfg.loss.kind = loss::LossKind::Cce;
    cfg.epochs = 200;
    cfg.early_stopping_patience = 200;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e-3;
    cfg.phantom.count = 2;
    cfg.phantom.boundary_blur_sigma = 1.5;
    cfg.phantom.noise_sigma = 0.05;
    cfg.split_fraction = 1.0;
    const auto split = harness::load_or_generate(cfg);
    const auto result = harness::train(cfg, split);
    const double dc = result.history.back().train.dc;
    out.require(dc >= 0.99, "final train DC " + fmt("%.4f", dc));

    // Window-10 moving average of the step loss never increases.
    const auto& losses = result.step_losses;
    int rises = 0;
    double prev = INFINITY;
    for (std::size_t k = 10; k <= losses.size(); ++k) {
        double avg = 0.0;
        for (std::size_t i = k - 10; i < k; ++i) avg += losses[i] / 10.0;
        rises += avg > prev + 1e-12;
        prev = avg;
    }
    out.require(rises == 0, std::to_string(rises) + " increases of the smoothed loss");
    const double elapsed = seconds_since(start);
    out.require(elapsed < 300.0, "runtime " + fmt("%.1f s", elapsed));
    if (out.pass) out.detail = "train DC " + fmt("%.4f", dc) + ", " + fmt("%.1f s", elapsed);
    return out;
}

// 6. CCE vs FCCE ablation over five seeds.
Outcome directional_ablation() {
    Outcome out;
    const auto start = Clock::now();
    harness::RunConfig cfg = ablation_base();
    cfg.out_dir = scratch("ablation");
    const auto split = harness::load_or_generate(cfg);
    const auto result = harness::ablation(cfg, split, {1, 2, 3, 4, 5}, {0.1, 0.5});
    std::fputs(harness::ablation_csv(result).c_str(), stdout);
    std::fputs(harness::ablation_summary_text(result).c_str(), stdout);
    const auto& s = result.summary;
    out.require(s.fcce_wins >= 3, "FCCE val DC >= CCE on " + std::to_string(s.fcce_wins) + "/5 seeds");
    out.require(s.mean_val_dc_difference >= -0.005, "mean val DC difference " + fmt("%.4f", s.mean_val_dc_difference));
    const double elapsed = seconds_since(start);
    out.require(elapsed < 1800.0, "runtime " + fmt("%.0f s", elapsed));
    const std::string summary = "lambda " + fmt("%g", s.chosen_lambda) + ", wins " + std::to_string(s.fcce_wins) +
                                "/5, mean diff " + fmt("%+.4f", s.mean_val_dc_difference) + ", " +
                                fmt("%.0f s", elapsed);
    out.detail = out.pass ? summary : out.detail + " (" + summary + ")";
    return out;
}

// 7. iou = dice / (2 - dice) on random pairs; hand-counted examples.
Outcome metric_identities() {
    Outcome out;
    std::mt19937_64 gen(7);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int c = 2 + t % 4;
        std::uniform_int_distribution<int> d(0, c - 1);
        std::vector<int> a(256), b(256);
        for (auto& x : a) x = d(gen);
        for (auto& x : b) x = d(gen);
        const auto dice = metrics::dice_per_class(a, b, c);
        const auto iou = metrics::iou_per_class(a, b, c);
        for (int k = 0; k < c; ++k) worst = std::max(worst, std::abs(iou[k] - dice[k] / (2.0 - dice[k])));
    }
    out.require(worst <= 1e-9, "identity error " + fmt("%.3e", worst));

    const std::vector<int> same{0, 1, 2, 1};
    out.require(metrics::accuracy(same, same) == 1.0 && metrics::dice(same, same, 3) == 1.0 &&
                    metrics::iou(same, same, 3) == 1.0,
                "identical maps");
    out.require(metrics::accuracy(std::vector<int>{0, 1, 1, 0}, std::vector<int>{1, 0, 0, 1}) == 0.0,
                "complementary maps");
    std::vector<int> truth(16), pred(16);
    for (int k = 0; k < 16; ++k) truth[k] = pred[k] = k % 2;
    for (int k : {1, 6, 11, 12}) pred[k] = 1 - pred[k];
    out.require(metrics::accuracy(pred, truth) == 0.75, "4x4 accuracy 0.75");
    const std::vector<int> p2{1, 1, 0, 0}, t2{1, 0, 1, 0};
    out.require(metrics::dice_per_class(p2, t2, 2)[1] == 0.5, "2x2 dice 0.5");
    out.require(metrics::iou_per_class(p2, t2, 2)[1] == 1.0 / 3.0, "2x2 IoU 1/3");
    if (out.pass) out.detail = "max identity error " + fmt("%.1e", worst);
    return out;
}

// 8. Two `train` invocations with one config give byte-identical artifacts.
Outcome determinism() {
    Outcome out;
    const auto root = scratch("determinism");
    std::ofstream(root / "run.cfg") << "model = unetpp\ndeep_supervision = 1\nepochs = 3\ncount = 16\n"
                                       "blur = 1.5\nnoise = 0.05\nloss = fcce\nmembership_source = blend\n";
    for (const char* name : {"a", "b"}) {
        const std::string cmd = std::string(FCCE_CLI_PATH) + " train --config " + (root / "run.cfg").string() +
                                " --out " + (root / name).string() + " > /dev/null";
        out.require(std::system(cmd.c_str()) == 0, std::string("train run ") + name + " failed");
    }
    for (const char* file : {"metrics.csv", "best.ckpt"}) {
        const std::string a = slurp(root / "a" / file);
        out.require(!a.empty() && a == slurp(root / "b" / file), std::string(file) + " differs");
    }
    if (out.pass) out.detail = "metrics.csv and best.ckpt byte-identical";
    return out;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "fcm correctness", fcm_correctness},
        {2, "gradient suite", gradient_suite},
        {3, "reduction identity", reduction_identity},
        {4, "nested lattice structure", nested_structure},
        {5, "overfit sanity", overfit_sanity},
        {6, "directional ablation", directional_ablation},
        {7, "metric identities", metric_identities},
        {8, "determinism", determinism},
    };
    int only = 0;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--criterion") only = std::atoi(argv[i + 1]);
    }
    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
