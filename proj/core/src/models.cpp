#include "fcce/models.hpp"

#include <cmath>
#include <sstream>

#include "fcce/loss.hpp"
#include "fcce/random.hpp"

namespace fcce::models {

using nn::Padding;

namespace {

Tensor<float> he_normal(nn::Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor<float> t = Tensor<float>::zeros(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (float& v : t.data()) {
        v = static_cast<float>(stddev * rng.normal());
    }
    return t;
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::UNet ? "unet" : "unetpp"; }

ModelKind parse_model_kind(const std::string& text) {
    if (text == "unet") return ModelKind::UNet;
    if (text == "unetpp" || text == "unet++") return ModelKind::UNetPlusPlus;
    throw ConfigError("unknown model '" + text + "' (expected unet or unetpp)");
}

void UNetSpec::validate() const {
    if (depth < 2) throw ConfigError("model depth must be at least 2");
    if (base_channels < 1) throw ConfigError("base_channels must be positive");
    if (in_channels < 1) throw ConfigError("in_channels must be positive");
    if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

std::size_t UNetSpec::width(int level) const {
    return static_cast<std::size_t>(base_channels) << static_cast<unsigned>(level);
}

void UNetSpec::check_input(std::size_t height, std::size_t w) const {
    const std::size_t factor = std::size_t{1} << static_cast<unsigned>(depth - 1);
    if (height % factor != 0 || w % factor != 0 || height == 0 || w == 0) {
        throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(w) +
                          " is not divisible by 2^(depth-1) = " + std::to_string(factor));
    }
}

std::string SegmentationModel::meta() const {
    std::ostringstream out;
    out << "model=" << to_string(kind()) << " depth=" << spec_.depth << " base=" << spec_.base_channels
        << " in=" << spec_.in_channels << " classes=" << spec_.num_classes << " dropout=" << spec_.dropout_rate
        << " deep_supervision=" << (deep_supervision() ? 1 : 0);
    return out.str();
}

SegmentationModel::Block SegmentationModel::make_block(const std::string& name, std::size_t in_ch,
                                                       std::size_t out_ch, std::uint64_t& rng_state) {
    Rng rng(splitmix64(rng_state));
    Block block;
    auto unit = [&](ConvUnit& u, const std::string& prefix, std::size_t cin) {
        u.weight = he_normal({out_ch, cin, 3, 3}, cin * 9, rng);
        u.bias = Tensor<float>::zeros({out_ch});
        u.bn = nn::BatchNormParams<float>::make(out_ch);
        params_.add(prefix + ".weight", u.weight, true);
        params_.add(prefix + ".bias", u.bias, true);
        params_.add(prefix + ".bn.gamma", u.bn.gamma, true);
        params_.add(prefix + ".bn.beta", u.bn.beta, true);
        params_.add(prefix + ".bn.running_mean", u.bn.running_mean, false);
        params_.add(prefix + ".bn.running_var", u.bn.running_var, false);
    };
    unit(block.first, name + ".conv1", in_ch);
    unit(block.second, name + ".conv2", out_ch);
    return block;
}

SegmentationModel::UpConv SegmentationModel::make_up(const std::string& name, std::size_t in_ch,
                                                     std::size_t out_ch, std::uint64_t& rng_state) {
    Rng rng(splitmix64(rng_state));
    UpConv up{he_normal({in_ch, out_ch, 2, 2}, in_ch * 4, rng), Tensor<float>::zeros({out_ch})};
    params_.add(name + ".weight", up.weight, true);
    params_.add(name + ".bias", up.bias, true);
    return up;
}

SegmentationModel::Head SegmentationModel::make_head(const std::string& name, std::size_t in_ch,
                                                     std::uint64_t& rng_state) {
    Rng rng(splitmix64(rng_state));
    const auto classes = static_cast<std::size_t>(spec_.num_classes);
    Head head{he_normal({classes, in_ch, 1, 1}, in_ch, rng), Tensor<float>::zeros({classes})};
    params_.add(name + ".weight", head.weight, true);
    params_.add(name + ".bias", head.bias, true);
    return head;
}

Tensor<float> SegmentationModel::run_block(Block& block, const Tensor<float>& x, Mode mode) {
    const bool training = mode == Mode::Train;
    Tensor<float> h = x;
    for (ConvUnit* u : {&block.first, &block.second}) {
        h = nn::conv2d(h, u->weight, u->bias, Padding::Same);
        h = nn::batchnorm(h, u->bn, training);
        h = nn::relu(h);
    }
    if (training && spec_.dropout_rate > 0.0) {
        h = nn::dropout(h, spec_.dropout_rate, true, derive_seed(dropout_seed_, dropout_calls_++));
    }
    return h;
}

Tensor<float> SegmentationModel::run_head(const Head& head, const Tensor<float>& x) const {
    return nn::conv2d(x, head.weight, head.bias, Padding::Same);
}

Tensor<float> SegmentationModel::run_up(const UpConv& up, const Tensor<float>& x) const {
    return nn::upsample_conv2(x, up.weight, up.bias);
}

// ---------------------------------------------------------------------------

UNet::UNet(UNetSpec spec, std::uint64_t init_seed) : SegmentationModel(spec) {
    spec_.validate();
    std::uint64_t state = init_seed;
    const int levels = spec_.depth;
    for (int k = 0; k < levels; ++k) {
        const std::size_t in_ch = k == 0 ? static_cast<std::size_t>(spec_.in_channels) : spec_.width(k - 1);
        encoder_.push_back(make_block("enc" + std::to_string(k), in_ch, spec_.width(k), state));
    }
    for (int k = levels - 2; k >= 0; --k) {
        ups_.push_back(make_up("up" + std::to_string(k), spec_.width(k + 1), spec_.width(k), state));
        decoder_.push_back(make_block("dec" + std::to_string(k), 2 * spec_.width(k), spec_.width(k), state));
    }
    head_ = make_head("head", spec_.width(0), state);
}

std::size_t UNet::skip_concat_channels(int level) const { return 2 * spec_.width(level); }

std::vector<Tensor<float>> UNet::forward(const Tensor<float>& batch, Mode mode) {
    if (batch.rank() != 4 || batch.dim(1) != static_cast<std::size_t>(spec_.in_channels)) {
        throw ShapeError("UNet: expected input [B," + std::to_string(spec_.in_channels) + ",H,W], got " +
                         nn::shape_string(batch.shape()));
    }
    spec_.check_input(batch.dim(2), batch.dim(3));
    std::vector<Tensor<float>> skips;
    Tensor<float> x = batch;
    for (int k = 0; k < spec_.depth; ++k) {
        x = run_block(encoder_[static_cast<std::size_t>(k)], x, mode);
        if (k < spec_.depth - 1) {
            skips.push_back(x);
            x = nn::maxpool2(x);
        }
    }
    for (std::size_t d = 0; d < decoder_.size(); ++d) {
        const std::size_t level = skips.size() - 1 - d;
        x = run_up(ups_[d], x);
        x = nn::concat_channels(skips[level], x);
        x = run_block(decoder_[d], x, mode);
    }
    return {run_head(head_, x)};
}

// ---------------------------------------------------------------------------

UNetPlusPlus::UNetPlusPlus(UNetSpec spec, bool deep_supervision, std::uint64_t init_seed)
    : SegmentationModel(spec), deep_supervision_(deep_supervision) {
    spec_.validate();
    std::uint64_t state = init_seed;
    const int levels = spec_.depth;
    // Column by column so every input node precedes its consumers.
    for (int j = 0; j < levels; ++j) {
        for (int i = 0; i + j <= levels - 1; ++i) {
            NestedNodeInfo info;
            info.id = {i, j};
            info.out_channels = spec_.width(i);
            if (j == 0) {
                if (i == 0) {
                    info.in_channels = static_cast<std::size_t>(spec_.in_channels);
                } else {
                    info.inputs.push_back({{i - 1, 0}, EdgeKind::Down});
                    info.in_channels = spec_.width(i - 1);
                }
            } else {
                for (int k = 0; k < j; ++k) {
                    info.inputs.push_back({{i, k}, EdgeKind::Same});
                }
                info.inputs.push_back({{i + 1, j - 1}, EdgeKind::Up});
                info.in_channels = static_cast<std::size_t>(j) * spec_.width(i) + spec_.width(i);
            }
            const std::string tag = std::to_string(i) + "_" + std::to_string(j);
            blocks_.push_back(make_block("x" + tag, info.in_channels, info.out_channels, state));
            if (j > 0) {
                ups_.push_back(make_up("up" + tag, spec_.width(i + 1), spec_.width(i), state));
            } else {
                ups_.emplace_back();
            }
            nodes_.push_back(std::move(info));
        }
    }
    for (const NestedNodeId& id : head_nodes()) {
        heads_.push_back(make_head("head" + std::to_string(id.j), spec_.width(0), state));
    }
}

std::vector<NestedNodeId> UNetPlusPlus::head_nodes() const {
    std::vector<NestedNodeId> out;
    if (deep_supervision_) {
        for (int j = 1; j < spec_.depth; ++j) {
            out.push_back({0, j});
        }
    } else {
        out.push_back({0, spec_.depth - 1});
    }
    return out;
}

std::size_t UNetPlusPlus::index(NestedNodeId id) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        if (nodes_[k].id == id) {
            return k;
        }
    }
    throw InvalidInput("UNet++: no node x^{" + std::to_string(id.i) + "," + std::to_string(id.j) + "}");
}

const NestedNodeInfo& UNetPlusPlus::node(NestedNodeId id) const { return nodes_[index(id)]; }

std::vector<Tensor<float>> UNetPlusPlus::forward(const Tensor<float>& batch, Mode mode) {
    if (batch.rank() != 4 || batch.dim(1) != static_cast<std::size_t>(spec_.in_channels)) {
        throw ShapeError("UNet++: expected input [B," + std::to_string(spec_.in_channels) + ",H,W], got " +
                         nn::shape_string(batch.shape()));
    }
    spec_.check_input(batch.dim(2), batch.dim(3));
    std::vector<Tensor<float>> outputs(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const NestedNodeInfo& info = nodes_[k];
        Tensor<float> in;
        if (info.inputs.empty()) {
            in = batch;
        } else if (info.id.j == 0) {
            in = nn::maxpool2(outputs[index(info.inputs.front().from)]);
        } else {
            std::vector<Tensor<float>> parts;
            for (const NestedEdge& edge : info.inputs) {
                const Tensor<float>& src = outputs[index(edge.from)];
                parts.push_back(edge.kind == EdgeKind::Up ? run_up(ups_[k], src) : src);
            }
            in = nn::concat_channels(parts);
        }
        outputs[k] = run_block(blocks_[k], in, mode);
    }
    std::vector<Tensor<float>> logits;
    const auto ids = head_nodes();
    for (std::size_t h = 0; h < ids.size(); ++h) {
        logits.push_back(run_head(heads_[h], outputs[index(ids[h])]));
    }
    return logits;
}

// ---------------------------------------------------------------------------

std::unique_ptr<SegmentationModel> build_unet(const UNetSpec& spec, std::uint64_t init_seed) {
    return std::make_unique<UNet>(spec, init_seed);
}

std::unique_ptr<SegmentationModel> build_unetpp(const UNetSpec& spec, bool deep_supervision,
                                                std::uint64_t init_seed) {
    return std::make_unique<UNetPlusPlus>(spec, deep_supervision, init_seed);
}

std::unique_ptr<SegmentationModel> build(ModelKind kind, const UNetSpec& spec, bool deep_supervision,
                                         std::uint64_t init_seed) {
    return kind == ModelKind::UNet ? build_unet(spec, init_seed) : build_unetpp(spec, deep_supervision, init_seed);
}

std::unique_ptr<SegmentationModel> build_from_meta(const std::string& meta) {
    std::istringstream in(meta);
    std::string token;
    std::string model;
    UNetSpec spec;
    bool deep = false;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("model meta: malformed token '" + token + "'");
        }
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        try {
            if (key == "model") model = value;
            else if (key == "depth") spec.depth = std::stoi(value);
            else if (key == "base") spec.base_channels = std::stoi(value);
            else if (key == "in") spec.in_channels = std::stoi(value);
            else if (key == "classes") spec.num_classes = std::stoi(value);
            else if (key == "dropout") spec.dropout_rate = std::stod(value);
            else if (key == "deep_supervision") deep = value == "1";
            else throw ConfigError("model meta: unknown key '" + key + "'");
        } catch (const std::logic_error&) {
            throw ConfigError("model meta: bad value for '" + key + "'");
        }
    }
    if (model.empty()) {
        throw ConfigError("model meta: missing model kind");
    }
    return build(parse_model_kind(model), spec, deep, 0);
}

ClassMatrix image_matrix(const Tensor<float>& logits, std::size_t index) {
    if (logits.rank() != 4 || index >= logits.dim(0)) {
        throw ShapeError("image_matrix: bad index or shape " + nn::shape_string(logits.shape()));
    }
    const std::size_t c = logits.dim(1);
    const std::size_t n = logits.dim(2) * logits.dim(3);
    ClassMatrix m(c, n);
    const float* src = logits.data().data() + index * c * n;
    for (std::size_t k = 0; k < c * n; ++k) {
        m.values()[k] = src[k];
    }
    return m;
}

std::vector<ClassMatrix> forward_segment(SegmentationModel& model, const Tensor<float>& batch) {
    const auto heads = model.forward(batch, Mode::Eval);
    const Tensor<float>& logits = heads.back();
    std::vector<ClassMatrix> out;
    for (std::size_t b = 0; b < logits.dim(0); ++b) {
        out.push_back(loss::softmax(image_matrix(logits, b)));
    }
    return out;
}

}  // namespace fcce::models
