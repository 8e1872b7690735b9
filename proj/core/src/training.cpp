#include "fcce/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fcce/adam.hpp"
#include "fcce/checkpoint.hpp"
#include "fcce/ops.hpp"
#include "fcce/pgm.hpp"
#include "fcce/random.hpp"

namespace fcce::harness {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kDropoutStream = 12;
constexpr std::uint64_t kShuffleStream = 13;

std::vector<int> concat_labels(const std::vector<data::LabeledImage>& images) {
    std::vector<int> out;
    for (const auto& img : images) {
        out.insert(out.end(), img.labels.begin(), img.labels.end());
    }
    return out;
}

void check_dataset(const RunConfig& cfg, const data::DatasetSplit& split) {
    if (split.train.empty()) {
        throw ConfigError("training set is empty");
    }
    const int classes = cfg.phantom.num_classes;
    for (const auto* set : {&split.train, &split.val}) {
        for (const auto& img : *set) {
            for (int l : img.labels) {
                if (l < 0 || l >= classes) {
                    throw ConfigError("image " + std::to_string(img.index) + " has label " + std::to_string(l) +
                                      " outside [0, " + std::to_string(classes) + ")");
                }
            }
            if (cfg.loss.needs_fcm_memberships()) {
                if (!img.memberships) {
                    throw ConfigError("loss mode " + loss::to_string(cfg.loss.membership_source) +
                                      " needs cached FCM memberships, image " + std::to_string(img.index) +
                                      " has none");
                }
                if (img.memberships->classes() != static_cast<std::size_t>(classes) ||
                    img.memberships->pixels() != img.pixels()) {
                    throw ConfigError("cached memberships of image " + std::to_string(img.index) +
                                      " do not match " + std::to_string(classes) + " classes");
                }
            }
        }
    }
}

struct HeadGradient {
    double value = 0.0;
    std::vector<double> grad;
};

// Mean objective over the images of one head, with the matching logit gradient.
HeadGradient head_objective(const RunConfig& cfg, const nn::Tensor<float>& logits,
                            const std::vector<data::LabeledImage>& images, const std::vector<std::size_t>& order,
                            std::size_t first, bool hybrid, std::vector<int>* predictions) {
    const std::size_t batch = logits.dim(0);
    const int classes = static_cast<int>(logits.dim(1));
    HeadGradient out;
    out.grad.reserve(logits.numel());
    for (std::size_t b = 0; b < batch; ++b) {
        const data::LabeledImage& img = images[order[first + b]];
        const ClassMatrix p = loss::softmax(models::image_matrix(logits, b));
        const ClassMatrix y = loss::one_hot(img.labels, classes);
        const ClassMatrix* u = img.memberships ? &*img.memberships : nullptr;
        double value;
        ClassMatrix g;
        if (hybrid) {
            value = loss::deep_supervision_loss(y, p, cfg.loss.epsilon);
            g = loss::deep_supervision_grad_logits(y, p, cfg.loss.epsilon);
        } else {
            value = loss::evaluate(y, p, u, cfg.loss);
            g = loss::evaluate_grad_logits(y, p, u, cfg.loss);
        }
        out.value += value / static_cast<double>(batch);
        for (double v : g.values()) {
            out.grad.push_back(v / static_cast<double>(batch));
        }
        if (predictions) {
            const auto labels = loss::argmax(p);
            predictions->insert(predictions->end(), labels.begin(), labels.end());
        }
    }
    return out;
}

std::vector<float> snapshot(const nn::ParameterSet<float>& params) {
    std::vector<float> out;
    for (const auto& e : params.entries()) {
        out.insert(out.end(), e.tensor.data().begin(), e.tensor.data().end());
    }
    return out;
}

void load_snapshot(nn::ParameterSet<float>& params, const std::vector<float>& values) {
    std::size_t pos = 0;
    for (const auto& e : params.entries()) {
        nn::Tensor<float> t = e.tensor;
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), t.numel(), t.data().begin());
        pos += t.numel();
    }
}

}  // namespace

data::DatasetSplit load_or_generate(const RunConfig& cfg) {
    std::vector<data::LabeledImage> images;
    if (!cfg.data_dir.empty()) {
        images = data::load_dataset(cfg.data_dir);
        return data::split_dataset(std::move(images), cfg.split_fraction, cfg.phantom.seed);
    }
    images = data::generate_phantoms(cfg.phantom);
    if (!cfg.loss.needs_fcm_memberships()) {
        return data::split_dataset(std::move(images), cfg.split_fraction, cfg.phantom.seed);
    }
    fcm::FcmConfig fcm_cfg = cfg.fcm;
    fcm_cfg.num_clusters = cfg.phantom.num_classes;
    return data::prepare_dataset(std::move(images), fcm_cfg, cfg.split_fraction, cfg.phantom.seed);
}

nn::Tensor<float> make_batch(const std::vector<data::LabeledImage>& images, const std::vector<std::size_t>& order,
                             std::size_t first, std::size_t count) {
    const auto& ref = images[order[first]];
    const std::size_t plane = ref.pixels();
    auto batch = nn::Tensor<float>::zeros({count, 1, ref.height, ref.width});
    for (std::size_t b = 0; b < count; ++b) {
        const auto& img = images[order[first + b]];
        if (img.height != ref.height || img.width != ref.width) {
            throw ConfigError("images in a batch must share dimensions");
        }
        for (std::size_t k = 0; k < plane; ++k) {
            batch.data()[b * plane + k] = static_cast<float>(img.intensities[k]);
        }
    }
    return batch;
}

EvalResult evaluate(models::SegmentationModel& model, const std::vector<data::LabeledImage>& images, int batch_size) {
    EvalResult result;
    if (images.empty()) {
        return result;
    }
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    const auto step = static_cast<std::size_t>(std::max(batch_size, 1));
    std::vector<int> flat_pred;
    for (std::size_t first = 0; first < images.size(); first += step) {
        const std::size_t count = std::min(step, images.size() - first);
        const auto probs = models::forward_segment(model, make_batch(images, order, first, count));
        for (const auto& p : probs) {
            result.predictions.push_back(loss::argmax(p));
            flat_pred.insert(flat_pred.end(), result.predictions.back().begin(), result.predictions.back().end());
        }
    }
    result.scores = metrics::score(flat_pred, concat_labels(images), model.spec().num_classes);
    return result;
}

TrainResult train(const RunConfig& cfg, const data::DatasetSplit& split) {
    cfg.validate();
    check_dataset(cfg, split);
    const int classes = cfg.phantom.num_classes;

    TrainResult result;
    auto model = models::build(cfg.model, cfg.unet_spec(), cfg.deep_supervision, derive_seed(cfg.seed, kInitStream));
    model->set_dropout_seed(derive_seed(cfg.seed, kDropoutStream));
    nn::OptimizerState opt;
    opt.learning_rate = cfg.learning_rate;
    std::vector<nn::Tensor<float>> trainable = model->params().trainable();

    std::ofstream csv;
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        csv.open(cfg.out_dir / "metrics.csv", std::ios::binary);
        if (!csv) {
            throw ConfigError("cannot write " + (cfg.out_dir / "metrics.csv").string());
        }
        csv << metrics::csv_header(classes) << '\n';
    }

    const std::vector<int> train_truth_all = concat_labels(split.train);
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    std::vector<float> best_weights = snapshot(model->params());
    double best_score = -1.0;
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(split.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        Rng shuffle(derive_seed(derive_seed(cfg.seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle.below(i)]);
        }

        double loss_sum = 0.0;
        std::size_t steps = 0;
        std::vector<int> train_pred, train_truth;
        for (std::size_t first = 0; first < order.size(); first += batch_size) {
            const std::size_t count = std::min(batch_size, order.size() - first);
            const auto heads = model->forward(make_batch(split.train, order, first, count), models::Mode::Train);
            for (const auto& head : heads) {
                if (!std::all_of(head.data().begin(), head.data().end(), [](float v) { return std::isfinite(v); })) {
                    throw NumericError("non-finite logits at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(steps + 1));
                }
            }

            nn::Tensor<float> root;
            double step_loss = 0.0;
            for (std::size_t h = 0; h < heads.size(); ++h) {
                const bool last = h + 1 == heads.size();
                const bool hybrid = cfg.head_loss == HeadLoss::Hybrid && heads.size() > 1;
                HeadGradient hg =
                    head_objective(cfg, heads[h], split.train, order, first, hybrid, last ? &train_pred : nullptr);
                const double weight = 1.0 / static_cast<double>(heads.size());
                for (double& g : hg.grad) {
                    g *= weight;
                }
                step_loss += weight * hg.value;
                auto node = nn::external_loss(heads[h], weight * hg.value, hg.grad);
                root = root.defined() ? nn::add(root, node) : node;
            }
            if (!std::isfinite(step_loss)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(steps + 1));
            }
            for (std::size_t b = 0; b < count; ++b) {
                const auto& labels = split.train[order[first + b]].labels;
                train_truth.insert(train_truth.end(), labels.begin(), labels.end());
            }
            model->params().zero_grad();
            nn::backward(root);
            nn::adam_step(trainable, opt);
            result.step_losses.push_back(step_loss);
            loss_sum += step_loss;
            ++steps;
        }

        metrics::MetricsRecord record;
        record.epoch = epoch;
        record.loss = loss_sum / static_cast<double>(steps);
        record.train = metrics::score(train_pred, train_truth, classes);
        record.val = split.val.empty() ? record.train : evaluate(*model, split.val, cfg.batch_size).scores;
        result.history.push_back(record);
        result.epochs_run = epoch;
        if (csv.is_open()) {
            csv << metrics::csv_row(record) << '\n';
            csv.flush();
        }

        if (record.val.dc > best_score) {
            best_score = record.val.dc;
            result.best = record;
            best_weights = snapshot(model->params());
            since_best = 0;
        } else if (++since_best >= cfg.early_stopping_patience) {
            result.stopped_early = epoch < cfg.epochs;
            break;
        }
    }

    load_snapshot(model->params(), best_weights);
    if (!cfg.out_dir.empty()) {
        nn::save_checkpoint(cfg.out_dir / "best.ckpt", {model->meta()}, model->params());
    }
    result.model = std::move(model);
    return result;
}

std::unique_ptr<models::SegmentationModel> load_model(const std::filesystem::path& checkpoint) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
    if (ckpt.meta.empty()) {
        throw ConfigError("checkpoint " + checkpoint.string() + " has no model description");
    }
    auto model = models::build_from_meta(ckpt.meta.front());
    nn::restore(ckpt, model->params());
    return model;
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::vector<data::LabeledImage>& images,
                               const std::filesystem::path& out_dir) {
    auto model = load_model(checkpoint);
    for (const auto& img : images) {
        for (int l : img.labels) {
            if (l < 0 || l >= model->spec().num_classes) {
                throw ConfigError("image " + std::to_string(img.index) + " has labels outside the model's " +
                                  std::to_string(model->spec().num_classes) + " classes");
            }
        }
    }
    EvalResult result = evaluate(*model, images);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (std::size_t i = 0; i < images.size(); ++i) {
            io::save_labels_pgm(result.predictions[i], images[i].height, images[i].width,
                                out_dir / data::indexed_name("pred", images[i].index, "pgm"));
        }
    }
    return result;
}

}  // namespace fcce::harness
