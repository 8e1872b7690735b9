#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace fcce::io {

// Portable tensor file: an ASCII header line
//   FCCE-TENSOR 1 f64 <rank> <dim0> ... <dimN-1>\n
// followed by the row-major little-endian IEEE-754 binary64 payload.
struct StoredTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

void save_tensor(const std::filesystem::path& path, std::span<const std::size_t> shape,
                 std::span<const double> values);
StoredTensor load_tensor(const std::filesystem::path& path);

}  // namespace fcce::io
