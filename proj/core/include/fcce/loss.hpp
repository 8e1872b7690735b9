#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcce/matrix.hpp"

namespace fcce::loss {

/// Predicted class probabilities, c x N.
using ProbabilityField = ClassMatrix;
/// One-hot ground truth, c x N.
using LabelField = ClassMatrix;
/// Fuzzy membership degrees, c x N.
using MembershipMatrix = ClassMatrix;

enum class LossKind { Cce, Fcce };

/// Which membership degrees feed the fuzzy-entropy term of FCCE.
///   FcmFixed   - cached FCM memberships; constant w.r.t. the network.
///   Prediction - the network's own softmax output.
///   Blend      - beta * FCM + (1 - beta) * prediction.
enum class MembershipSource { FcmFixed, Prediction, Blend };

inline constexpr double kDefaultEpsilon = 1e-12;

struct LossConfig {
    LossKind kind = LossKind::Fcce;
    MembershipSource membership_source = MembershipSource::Prediction;
    double blend_beta = 0.5;
    double lambda = 1.0;
    double epsilon = kDefaultEpsilon;

    void validate() const;
    bool needs_fcm_memberships() const noexcept {
        return kind == LossKind::Fcce && membership_source != MembershipSource::Prediction;
    }
};

std::string to_string(LossKind kind);
std::string to_string(MembershipSource source);
LossKind parse_loss_kind(const std::string& text);
MembershipSource parse_membership_source(const std::string& text);

// Column-wise softmax with the per-column max subtracted first.
ProbabilityField softmax(const ClassMatrix& logits);

// Pulls a gradient w.r.t. softmax outputs back to the logits.
ClassMatrix softmax_backward(const ProbabilityField& p, const ClassMatrix& grad_p);

LabelField one_hot(std::span<const int> labels, int num_classes);
std::vector<int> argmax(const ClassMatrix& scores);

/// Categorical cross-entropy, averaged over pixels.
double cce(const LabelField& y, const ProbabilityField& p, double epsilon = kDefaultEpsilon);
/// (p - y) / N.
ClassMatrix cce_grad_logits(const LabelField& y, const ProbabilityField& p);

/// -sum u log u averaged over pixels, with 0 log 0 = 0.
double fuzzy_entropy(const ClassMatrix& u, double epsilon = kDefaultEpsilon);
/// (-log u - 1) / N per entry; entries below epsilon are clamped.
ClassMatrix fuzzy_entropy_grad(const ClassMatrix& u, double epsilon = kDefaultEpsilon);

/// cce(y, p) + lambda * fuzzy_entropy(u_eff). `u_fcm` may be null for Prediction mode.
double fcce(const LabelField& y, const ProbabilityField& p, const MembershipMatrix* u_fcm,
            const LossConfig& cfg);
ClassMatrix fcce_grad_logits(const LabelField& y, const ProbabilityField& p,
                             const MembershipMatrix* u_fcm, const LossConfig& cfg);

/// Selected objective (CCE or FCCE) for one head.
double evaluate(const LabelField& y, const ProbabilityField& p, const MembershipMatrix* u_fcm,
                const LossConfig& cfg);
ClassMatrix evaluate_grad_logits(const LabelField& y, const ProbabilityField& p,
                                 const MembershipMatrix* u_fcm, const LossConfig& cfg);

// Hybrid cross-entropy/Dice loss used for nested-decoder deep supervision:
//   -(1/N) sum_c sum_n (y log p + 2 y p / (y^2 + p^2))
// The Dice-like term is taken with the literal sign, so it is maximised. Entries with
// y = 0 contribute nothing.
double deep_supervision_loss(const LabelField& y, const ProbabilityField& p,
                             double epsilon = kDefaultEpsilon);
ClassMatrix deep_supervision_grad_probs(const LabelField& y, const ProbabilityField& p,
                                        double epsilon = kDefaultEpsilon);
ClassMatrix deep_supervision_grad_logits(const LabelField& y, const ProbabilityField& p,
                                         double epsilon = kDefaultEpsilon);

}  // namespace fcce::loss
