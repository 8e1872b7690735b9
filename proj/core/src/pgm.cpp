#include "fcce/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace fcce::io {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<unsigned char>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("cannot write " + path.string());
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
}

class HeaderReader {
public:
    HeaderReader(std::span<const unsigned char> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    std::size_t token_start() const { return token_start_; }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    unsigned long number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        token_start_ = start;
        unsigned long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000ul) {
                throw ParseError(std::string("pgm: ") + what + " too large", start);
            }
            ++pos_;
        }
        if (pos_ == start) {
            throw ParseError(std::string("pgm: expected ") + what, start);
        }
        return value;
    }

    void single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw ParseError("pgm: expected whitespace before raster", pos_);
        }
        ++pos_;
    }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
    std::size_t token_start_ = 0;
};

}  // namespace

GrayImage parse_pgm(std::span<const unsigned char> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P') {
        throw ParseError("pgm: missing magic number", 0);
    }
    if (bytes[1] == '2') {
        throw UnsupportedFormat("pgm: ASCII (P2) files are not supported", 0);
    }
    if (bytes[1] != '5') {
        throw UnsupportedFormat(std::string("pgm: unsupported netpbm type P") + static_cast<char>(bytes[1]), 0);
    }
    HeaderReader reader(bytes, 2);
    GrayImage img;
    img.width = reader.number("width");
    img.height = reader.number("height");
    const unsigned long maxval = reader.number("maxval");
    const std::size_t maxval_at = reader.token_start();
    if (maxval == 0 || maxval > 65535) {
        throw ParseError("pgm: maxval must be in 1..65535", maxval_at);
    }
    if (img.width == 0 || img.height == 0) {
        throw ParseError("pgm: zero-sized image", maxval_at);
    }
    reader.single_whitespace();
    img.maxval = static_cast<unsigned>(maxval);

    const std::size_t offset = reader.pos();
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t count = img.width * img.height;
    if (bytes.size() - offset < count * sample_bytes) {
        throw ParseError("pgm: raster truncated (" + std::to_string(bytes.size() - offset) + " of " +
                             std::to_string(count * sample_bytes) + " bytes)",
                         bytes.size());
    }
    img.values.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        unsigned sample = bytes[offset + k * sample_bytes];
        if (sample_bytes == 2) {
            sample = (sample << 8) | bytes[offset + 2 * k + 1];
        }
        if (sample > maxval) {
            throw ParseError("pgm: sample exceeds maxval", offset + k * sample_bytes);
        }
        img.values[k] = static_cast<double>(sample) / static_cast<double>(maxval);
    }
    return img;
}

GrayImage load_pgm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_pgm(bytes);
}

void save_pgm(std::span<const double> values, std::size_t height, std::size_t width,
              const std::filesystem::path& path, unsigned maxval) {
    if (values.size() != height * width) {
        throw InvalidInput("save_pgm: value count does not match dimensions");
    }
    if (maxval == 0 || maxval > 65535) {
        throw InvalidInput("save_pgm: maxval must be in 1..65535");
    }
    const bool wide = maxval > 255;
    std::vector<unsigned char> body;
    body.reserve(values.size() * (wide ? 2 : 1));
    for (double v : values) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (wide) {
            body.push_back(static_cast<unsigned char>(q >> 8));
        }
        body.push_back(static_cast<unsigned char>(q & 0xFFu));
    }
    write_file(path, "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" + std::to_string(maxval) + "\n",
               body);
}

void save_labels_pgm(std::span<const int> labels, std::size_t height, std::size_t width,
                     const std::filesystem::path& path) {
    if (labels.size() != height * width) {
        throw InvalidInput("save_labels_pgm: label count does not match dimensions");
    }
    std::vector<unsigned char> body;
    body.reserve(labels.size());
    for (int l : labels) {
        if (l < 0 || l > 255) {
            throw InvalidInput("save_labels_pgm: label out of 8-bit range");
        }
        body.push_back(static_cast<unsigned char>(l));
    }
    write_file(path, "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n", body);
}

std::vector<int> load_labels_pgm(const std::filesystem::path& path, std::size_t* height, std::size_t* width) {
    const GrayImage img = load_pgm(path);
    std::vector<int> labels(img.values.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
        labels[k] = static_cast<int>(std::lround(img.values[k] * img.maxval));
    }
    if (height) *height = img.height;
    if (width) *width = img.width;
    return labels;
}

}  // namespace fcce::io
