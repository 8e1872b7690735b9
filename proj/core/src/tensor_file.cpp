#include "fcce/tensor_file.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "fcce/error.hpp"

namespace fcce::io {

void save_tensor(const std::filesystem::path& path, std::span<const std::size_t> shape,
                 std::span<const double> values) {
    const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    if (count != values.size()) {
        throw InvalidInput("save_tensor: value count does not match shape");
    }
    std::string out = "FCCE-TENSOR 1 f64 " + std::to_string(shape.size());
    for (std::size_t d : shape) {
        out += " " + std::to_string(d);
    }
    out += "\n";
    out.reserve(out.size() + 8 * values.size());
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int shift = 0; shift < 64; shift += 8) {
            out.push_back(static_cast<char>((bits >> shift) & 0xFFu));
        }
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw InvalidInput("save_tensor: cannot write " + path.string());
    }
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

StoredTensor load_tensor(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw InvalidInput("load_tensor: cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    const std::size_t eol = bytes.find('\n');
    if (eol == std::string::npos) {
        throw ParseError("tensor file: missing header line", 0);
    }
    std::istringstream header(bytes.substr(0, eol));
    std::string magic, version, dtype;
    std::size_t rank = 0;
    if (!(header >> magic >> version >> dtype >> rank) || magic != "FCCE-TENSOR" || version != "1") {
        throw ParseError("tensor file: bad header", 0);
    }
    if (dtype != "f64") {
        throw ParseError("tensor file: unsupported dtype " + dtype, 0);
    }
    StoredTensor t;
    t.shape.resize(rank);
    for (auto& d : t.shape) {
        if (!(header >> d)) {
            throw ParseError("tensor file: truncated shape", 0);
        }
    }
    const std::size_t count = std::accumulate(t.shape.begin(), t.shape.end(), std::size_t{1}, std::multiplies<>());
    const std::size_t start = eol + 1;
    if (bytes.size() - start != 8 * count) {
        throw ParseError("tensor file: payload has " + std::to_string(bytes.size() - start) + " bytes, expected " +
                             std::to_string(8 * count),
                         start);
    }
    t.values.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[start + 8 * k + b])) << (8 * b);
        }
        t.values[k] = std::bit_cast<double>(bits);
    }
    return t;
}

}  // namespace fcce::io
