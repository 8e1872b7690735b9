#include "fcce/loss.hpp"

#include <algorithm>
#include <cmath>

namespace fcce::loss {

namespace {

double clamped_log(double v, double epsilon) { return std::log(std::max(v, epsilon)); }

MembershipMatrix effective_memberships(const ProbabilityField& p, const MembershipMatrix* u_fcm,
                                       const LossConfig& cfg) {
    switch (cfg.membership_source) {
        case MembershipSource::Prediction:
            return p;
        case MembershipSource::FcmFixed:
        case MembershipSource::Blend: {
            if (u_fcm == nullptr) {
                throw InvalidInput("fcce: membership source " + to_string(cfg.membership_source) +
                                   " requires FCM memberships");
            }
            require_same_shape(p, *u_fcm, "fcce");
            if (cfg.membership_source == MembershipSource::FcmFixed) {
                return *u_fcm;
            }
            MembershipMatrix u(p.classes(), p.pixels());
            for (std::size_t k = 0; k < u.values().size(); ++k) {
                u.values()[k] = cfg.blend_beta * u_fcm->values()[k] + (1.0 - cfg.blend_beta) * p.values()[k];
            }
            return u;
        }
    }
    return p;
}

}  // namespace

void LossConfig::validate() const {
    if (!(lambda >= 0.0)) {
        throw InvalidInput("loss: lambda must be non-negative");
    }
    if (!(epsilon > 0.0 && epsilon <= 1e-6)) {
        throw InvalidInput("loss: epsilon must lie in (0, 1e-6]");
    }
    if (!(blend_beta >= 0.0 && blend_beta <= 1.0)) {
        throw InvalidInput("loss: blend_beta must lie in [0, 1]");
    }
}

std::string to_string(LossKind kind) { return kind == LossKind::Cce ? "cce" : "fcce"; }

std::string to_string(MembershipSource source) {
    switch (source) {
        case MembershipSource::FcmFixed: return "fcm";
        case MembershipSource::Prediction: return "prediction";
        case MembershipSource::Blend: return "blend";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& text) {
    if (text == "cce" || text == "CCE") return LossKind::Cce;
    if (text == "fcce" || text == "FCCE") return LossKind::Fcce;
    throw InvalidInput("unknown loss kind '" + text + "'");
}

MembershipSource parse_membership_source(const std::string& text) {
    if (text == "fcm" || text == "fcm_fixed" || text == "FCM_FIXED") return MembershipSource::FcmFixed;
    if (text == "prediction" || text == "PREDICTION") return MembershipSource::Prediction;
    if (text == "blend" || text == "BLEND") return MembershipSource::Blend;
    throw InvalidInput("unknown membership source '" + text + "'");
}

ProbabilityField softmax(const ClassMatrix& logits) {
    const std::size_t c = logits.classes();
    const std::size_t n = logits.pixels();
    ProbabilityField p(c, n);
    for (std::size_t j = 0; j < n; ++j) {
        double top = logits(0, j);
        for (std::size_t i = 1; i < c; ++i) {
            top = std::max(top, logits(i, j));
        }
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            p(i, j) = std::exp(logits(i, j) - top);
            total += p(i, j);
        }
        for (std::size_t i = 0; i < c; ++i) {
            p(i, j) /= total;
        }
    }
    return p;
}

ClassMatrix softmax_backward(const ProbabilityField& p, const ClassMatrix& grad_p) {
    require_same_shape(p, grad_p, "softmax_backward");
    ClassMatrix dz(p.classes(), p.pixels());
    for (std::size_t j = 0; j < p.pixels(); ++j) {
        double inner = 0.0;
        for (std::size_t i = 0; i < p.classes(); ++i) {
            inner += p(i, j) * grad_p(i, j);
        }
        for (std::size_t i = 0; i < p.classes(); ++i) {
            dz(i, j) = p(i, j) * (grad_p(i, j) - inner);
        }
    }
    return dz;
}

LabelField one_hot(std::span<const int> labels, int num_classes) {
    LabelField y(static_cast<std::size_t>(num_classes), labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j] < 0 || labels[j] >= num_classes) {
            throw InvalidInput("one_hot: label " + std::to_string(labels[j]) + " out of range");
        }
        y(static_cast<std::size_t>(labels[j]), j) = 1.0;
    }
    return y;
}

std::vector<int> argmax(const ClassMatrix& scores) {
    std::vector<int> out(scores.pixels());
    for (std::size_t j = 0; j < scores.pixels(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.classes(); ++i) {
            if (scores(i, j) > scores(best, j)) {
                best = i;
            }
        }
        out[j] = static_cast<int>(best);
    }
    return out;
}

double cce(const LabelField& y, const ProbabilityField& p, double epsilon) {
    require_same_shape(y, p, "cce");
    double total = 0.0;
    for (std::size_t j = 0; j < p.pixels(); ++j) {
        double pixel = 0.0;
        for (std::size_t i = 0; i < p.classes(); ++i) {
            if (y(i, j) != 0.0) {
                pixel -= y(i, j) * clamped_log(p(i, j), epsilon);
            }
        }
        total += pixel;
    }
    return total / static_cast<double>(p.pixels());
}

ClassMatrix cce_grad_logits(const LabelField& y, const ProbabilityField& p) {
    require_same_shape(y, p, "cce_grad_logits");
    const double scale = 1.0 / static_cast<double>(p.pixels());
    ClassMatrix g(p.classes(), p.pixels());
    for (std::size_t k = 0; k < g.values().size(); ++k) {
        g.values()[k] = (p.values()[k] - y.values()[k]) * scale;
    }
    return g;
}

double fuzzy_entropy(const ClassMatrix& u, double epsilon) {
    for (double v : u.values()) {
        if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) {
            throw InvalidInput("fuzzy_entropy: membership outside [0, 1]");
        }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < u.pixels(); ++j) {
        double pixel = 0.0;
        for (std::size_t i = 0; i < u.classes(); ++i) {
            const double v = u(i, j);
            if (v > 0.0) {
                pixel -= v * clamped_log(v, epsilon);
            }
        }
        total += pixel;
    }
    return total / static_cast<double>(u.pixels());
}

ClassMatrix fuzzy_entropy_grad(const ClassMatrix& u, double epsilon) {
    const double scale = 1.0 / static_cast<double>(u.pixels());
    ClassMatrix g(u.classes(), u.pixels());
    for (std::size_t k = 0; k < g.values().size(); ++k) {
        g.values()[k] = (-clamped_log(u.values()[k], epsilon) - 1.0) * scale;
    }
    return g;
}

double fcce(const LabelField& y, const ProbabilityField& p, const MembershipMatrix* u_fcm,
            const LossConfig& cfg) {
    cfg.validate();
    require_same_shape(y, p, "fcce");
    const MembershipMatrix u = effective_memberships(p, u_fcm, cfg);
    return cce(y, p, cfg.epsilon) + cfg.lambda * fuzzy_entropy(u, cfg.epsilon);
}

ClassMatrix fcce_grad_logits(const LabelField& y, const ProbabilityField& p, const MembershipMatrix* u_fcm,
                             const LossConfig& cfg) {
    cfg.validate();
    require_same_shape(y, p, "fcce_grad_logits");
    const MembershipMatrix u = effective_memberships(p, u_fcm, cfg);
    ClassMatrix g = cce_grad_logits(y, p);
    if (cfg.membership_source == MembershipSource::FcmFixed) {
        return g;
    }
    // d u_eff / d p is (1 - beta) for Blend and 1 for Prediction.
    const double weight =
        cfg.lambda * (cfg.membership_source == MembershipSource::Blend ? 1.0 - cfg.blend_beta : 1.0);
    ClassMatrix grad_p = fuzzy_entropy_grad(u, cfg.epsilon);
    for (double& v : grad_p.values()) {
        v *= weight;
    }
    const ClassMatrix chained = softmax_backward(p, grad_p);
    for (std::size_t k = 0; k < g.values().size(); ++k) {
        g.values()[k] += chained.values()[k];
    }
    return g;
}

double evaluate(const LabelField& y, const ProbabilityField& p, const MembershipMatrix* u_fcm,
                const LossConfig& cfg) {
    return cfg.kind == LossKind::Cce ? cce(y, p, cfg.epsilon) : fcce(y, p, u_fcm, cfg);
}

ClassMatrix evaluate_grad_logits(const LabelField& y, const ProbabilityField& p, const MembershipMatrix* u_fcm,
                                 const LossConfig& cfg) {
    return cfg.kind == LossKind::Cce ? cce_grad_logits(y, p) : fcce_grad_logits(y, p, u_fcm, cfg);
}

double deep_supervision_loss(const LabelField& y, const ProbabilityField& p, double epsilon) {
    require_same_shape(y, p, "deep_supervision_loss");
    double total = 0.0;
    for (std::size_t j = 0; j < p.pixels(); ++j) {
        for (std::size_t i = 0; i < p.classes(); ++i) {
            const double yv = y(i, j);
            if (yv == 0.0) {
                continue;
            }
            const double pv = p(i, j);
            total += yv * clamped_log(pv, epsilon) + 2.0 * yv * pv / (yv * yv + pv * pv);
        }
    }
    return -total / static_cast<double>(p.pixels());
}

ClassMatrix deep_supervision_grad_probs(const LabelField& y, const ProbabilityField& p, double epsilon) {
    require_same_shape(y, p, "deep_supervision_grad_probs");
    const double scale = -1.0 / static_cast<double>(p.pixels());
    ClassMatrix g(p.classes(), p.pixels());
    for (std::size_t k = 0; k < g.values().size(); ++k) {
        const double yv = y.values()[k];
        if (yv == 0.0) {
            continue;
        }
        const double pv = p.values()[k];
        const double log_term = pv > epsilon ? yv / pv : 0.0;
        const double denom = yv * yv + pv * pv;
        g.values()[k] = scale * (log_term + 2.0 * yv * (yv * yv - pv * pv) / (denom * denom));
    }
    return g;
}

ClassMatrix deep_supervision_grad_logits(const LabelField& y, const ProbabilityField& p, double epsilon) {
    return softmax_backward(p, deep_supervision_grad_probs(y, p, epsilon));
}

}  // namespace fcce::loss
