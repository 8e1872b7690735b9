#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fcce/matrix.hpp"
#include "fcce/ops.hpp"
#include "fcce/params.hpp"

namespace fcce::models {

using nn::Tensor;

enum class ModelKind { UNet, UNetPlusPlus };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct UNetSpec {
    int depth = 3;
    int base_channels = 8;
    int in_channels = 1;
    int num_classes = 4;
    double dropout_rate = 0.0;

    void validate() const;
    /// Channel width of encoder row `level`: base * 2^level.
    std::size_t width(int level) const;
    /// Spatial dims must be divisible by 2^(depth-1).
    void check_input(std::size_t height, std::size_t width) const;
};

/// Node x^{i,j} of the nested decoder lattice; i is the encoder depth, j the skip column.
struct NestedNodeId {
    int i = 0;
    int j = 0;
    friend bool operator==(const NestedNodeId&, const NestedNodeId&) = default;
};

enum class EdgeKind { Same, Down, Up };

struct NestedEdge {
    NestedNodeId from;
    EdgeKind kind;
};

struct NestedNodeInfo {
    NestedNodeId id;
    std::vector<NestedEdge> inputs;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
};

enum class Mode { Train, Eval };

class SegmentationModel {
public:
    virtual ~SegmentationModel() = default;

    /// Logits [B,c,H,W] for every supervised head. The last entry is the prediction head.
    virtual std::vector<Tensor<float>> forward(const Tensor<float>& batch, Mode mode) = 0;
    virtual ModelKind kind() const = 0;
    virtual bool deep_supervision() const { return false; }

    const UNetSpec& spec() const noexcept { return spec_; }
    nn::ParameterSet<float>& params() noexcept { return params_; }
    const nn::ParameterSet<float>& params() const noexcept { return params_; }

    /// Seeds the dropout masks drawn by subsequent training-mode forwards.
    void set_dropout_seed(std::uint64_t seed) noexcept {
        dropout_seed_ = seed;
        dropout_calls_ = 0;
    }

    /// One-line description stored in checkpoints; see build_from_meta.
    std::string meta() const;

protected:
    explicit SegmentationModel(UNetSpec spec) : spec_(spec) {}

    struct ConvUnit {
        Tensor<float> weight;
        Tensor<float> bias;
        nn::BatchNormParams<float> bn;
    };
    // conv3x3 -> batchnorm -> relu, twice.
    struct Block {
        ConvUnit first;
        ConvUnit second;
    };
    struct UpConv {
        Tensor<float> weight;
        Tensor<float> bias;
    };
    struct Head {
        Tensor<float> weight;
        Tensor<float> bias;
    };

    Block make_block(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::uint64_t& rng_state);
    UpConv make_up(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::uint64_t& rng_state);
    Head make_head(const std::string& name, std::size_t in_ch, std::uint64_t& rng_state);

    Tensor<float> run_block(Block& block, const Tensor<float>& x, Mode mode);
    Tensor<float> run_head(const Head& head, const Tensor<float>& x) const;
    Tensor<float> run_up(const UpConv& up, const Tensor<float>& x) const;

    UNetSpec spec_;
    nn::ParameterSet<float> params_;

private:
    std::uint64_t dropout_seed_ = 0;
    std::uint64_t dropout_calls_ = 0;
};

class UNet final : public SegmentationModel {
public:
    UNet(UNetSpec spec, std::uint64_t init_seed);

    std::vector<Tensor<float>> forward(const Tensor<float>& batch, Mode mode) override;
    ModelKind kind() const override { return ModelKind::UNet; }

    /// Channels entering decoder level k after the skip concatenation.
    std::size_t skip_concat_channels(int level) const;

private:
    std::vector<Block> encoder_;
    std::vector<UpConv> ups_;
    std::vector<Block> decoder_;
    Head head_;
};

class UNetPlusPlus final : public SegmentationModel {
public:
    UNetPlusPlus(UNetSpec spec, bool deep_supervision, std::uint64_t init_seed);

    std::vector<Tensor<float>> forward(const Tensor<float>& batch, Mode mode) override;
    ModelKind kind() const override { return ModelKind::UNetPlusPlus; }
    bool deep_supervision() const override { return deep_supervision_; }

    /// Lattice nodes in evaluation order, with their incoming edges.
    const std::vector<NestedNodeInfo>& nodes() const noexcept { return nodes_; }
    const NestedNodeInfo& node(NestedNodeId id) const;
    /// Nodes x^{0,j} carrying a 1x1 output head.
    std::vector<NestedNodeId> head_nodes() const;

private:
    std::size_t index(NestedNodeId id) const;

    bool deep_supervision_;
    std::vector<NestedNodeInfo> nodes_;
    std::vector<Block> blocks_;
    std::vector<UpConv> ups_;  // indexed like nodes_; unused for j = 0
    std::vector<Head> heads_;
};

std::unique_ptr<SegmentationModel> build_unet(const UNetSpec& spec, std::uint64_t init_seed);
std::unique_ptr<SegmentationModel> build_unetpp(const UNetSpec& spec, bool deep_supervision,
                                                std::uint64_t init_seed);
std::unique_ptr<SegmentationModel> build(ModelKind kind, const UNetSpec& spec, bool deep_supervision,
                                         std::uint64_t init_seed);
/// Rebuilds an (uninitialised-weight) model from SegmentationModel::meta().
std::unique_ptr<SegmentationModel> build_from_meta(const std::string& meta);

/// Image `index` of a [B,c,H,W] tensor as a c x (H*W) matrix.
ClassMatrix image_matrix(const Tensor<float>& logits, std::size_t index);

/// Eval-mode forward followed by a per-pixel softmax; one c x N field per image.
std::vector<ClassMatrix> forward_segment(SegmentationModel& model, const Tensor<float>& batch);

}  // namespace fcce::models
