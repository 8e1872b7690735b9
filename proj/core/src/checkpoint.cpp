#include "fcce/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fcce::nn {

namespace {

constexpr const char* kMagic = "FCCE-CHECKPOINT 1";

void put_float_le(std::string& out, float value) {
    const auto bits = std::bit_cast<std::uint32_t>(value);
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<char>((bits >> shift) & 0xFFu));
    }
}

float get_float_le(const unsigned char* in) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(in[b]) << (8 * b);
    }
    return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<std::string>& meta,
                     const ParameterSet<float>& params) {
    std::ostringstream header;
    header << kMagic << '\n';
    for (const auto& line : meta) {
        if (line.find('\n') != std::string::npos) {
            throw InvalidInput("save_checkpoint: meta line contains a newline");
        }
        header << "meta " << line << '\n';
    }
    std::string payload;
    for (const auto& entry : params.entries()) {
        header << "tensor " << entry.name << ' ' << payload.size() << ' ' << entry.tensor.rank();
        for (std::size_t d : entry.tensor.shape()) {
            header << ' ' << d;
        }
        header << '\n';
        for (float v : entry.tensor.data()) {
            put_float_le(payload, v);
        }
    }
    header << "payload " << payload.size() << '\n';

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("save_checkpoint: cannot open " + path.string());
    }
    const std::string text = header.str();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw InvalidInput("save_checkpoint: write failed for " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("load_checkpoint: cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Checkpoint ckpt;
    std::vector<std::size_t> offsets;
    std::size_t pos = 0;
    bool first = true;
    while (true) {
        const std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos) {
            throw ParseError("checkpoint: header ended without payload line", pos);
        }
        const std::string line = bytes.substr(pos, eol - pos);
        const std::size_t line_start = pos;
        pos = eol + 1;
        if (first) {
            if (line != kMagic) {
                throw ParseError("checkpoint: bad magic", line_start);
            }
            first = false;
            continue;
        }
        std::istringstream fields(line);
        std::string tag;
        fields >> tag;
        if (tag == "meta") {
            ckpt.meta.push_back(line.size() > 5 ? line.substr(5) : std::string());
        } else if (tag == "tensor") {
            CheckpointTensor t;
            std::size_t offset = 0, rank = 0;
            if (!(fields >> t.name >> offset >> rank)) {
                throw ParseError("checkpoint: malformed tensor line", line_start);
            }
            t.shape.resize(rank);
            for (auto& d : t.shape) {
                if (!(fields >> d)) {
                    throw ParseError("checkpoint: malformed tensor dims for " + t.name, line_start);
                }
            }
            offsets.push_back(offset);
            ckpt.tensors.push_back(std::move(t));
        } else if (tag == "payload") {
            std::size_t size = 0;
            if (!(fields >> size)) {
                throw ParseError("checkpoint: malformed payload line", line_start);
            }
            if (bytes.size() - pos != size) {
                throw ParseError("checkpoint: payload is " + std::to_string(bytes.size() - pos) +
                                     " bytes, header says " + std::to_string(size),
                                 pos);
            }
            break;
        } else {
            throw ParseError("checkpoint: unknown header line '" + line + "'", line_start);
        }
    }

    const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    const std::size_t payload_size = bytes.size() - pos;
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        auto& t = ckpt.tensors[i];
        const std::size_t count = shape_size(t.shape);
        if (offsets[i] + 4 * count > payload_size) {
            throw ParseError("checkpoint: tensor " + t.name + " extends past payload", pos + offsets[i]);
        }
        t.values.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            t.values[k] = get_float_le(payload + offsets[i] + 4 * k);
        }
    }
    return ckpt;
}

void restore(const Checkpoint& checkpoint, ParameterSet<float>& params) {
    for (const auto& entry : params.entries()) {
        const CheckpointTensor* match = nullptr;
        for (const auto& t : checkpoint.tensors) {
            if (t.name == entry.name) {
                match = &t;
                break;
            }
        }
        if (match == nullptr) {
            throw ConfigError("checkpoint is missing tensor '" + entry.name + "'");
        }
        if (match->shape != entry.tensor.shape()) {
            throw ConfigError("checkpoint tensor '" + entry.name + "' has shape " + shape_string(match->shape) +
                              ", model expects " + shape_string(entry.tensor.shape()));
        }
    }
    for (const auto& t : checkpoint.tensors) {
        if (params.find(t.name) == nullptr) {
            throw ConfigError("checkpoint has unexpected tensor '" + t.name + "'");
        }
    }
    for (const auto& entry : params.entries()) {
        for (const auto& t : checkpoint.tensors) {
            if (t.name == entry.name) {
                Tensor<float> target = entry.tensor;
                std::copy(t.values.begin(), t.values.end(), target.data().begin());
            }
        }
    }
}

}  // namespace fcce::nn
