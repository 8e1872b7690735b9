#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "fcce/error.hpp"

namespace fcce::io {

/// The file is a valid netpbm variant that this reader does not handle (e.g. ASCII P2).
class UnsupportedFormat : public ParseError {
public:
    using ParseError::ParseError;
};

struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    unsigned maxval = 255;
    /// Intensities mapped to [0, 1].
    std::vector<double> values;
};

/// Binary PGM (P5), maxval up to 65535 (16-bit samples are big-endian).
GrayImage load_pgm(const std::filesystem::path& path);
GrayImage parse_pgm(std::span<const unsigned char> bytes);

/// Writes intensities in [0, 1] (clamped) quantised to `maxval` levels.
void save_pgm(std::span<const double> values, std::size_t height, std::size_t width,
              const std::filesystem::path& path, unsigned maxval = 255);

/// Label maps are stored as raw class ids (maxval 255).
void save_labels_pgm(std::span<const int> labels, std::size_t height, std::size_t width,
                     const std::filesystem::path& path);
std::vector<int> load_labels_pgm(const std::filesystem::path& path, std::size_t* height = nullptr,
                                 std::size_t* width = nullptr);

}  // namespace fcce::io
