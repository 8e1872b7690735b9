#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fcce/params.hpp"

namespace fcce::nn {

// On-disk layout:
//   FCCE-CHECKPOINT 1
//   meta <free text>                      (zero or more)
//   tensor <name> <byte offset> <rank> <dims...>
//   payload <byte count>
//   <row-major little-endian float32 payload>
struct CheckpointTensor {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    std::vector<std::string> meta;
    std::vector<CheckpointTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<std::string>& meta,
                     const ParameterSet<float>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params`; throws ConfigError naming the first
/// missing, extra or mis-shaped tensor.
void restore(const Checkpoint& checkpoint, ParameterSet<float>& params);

}  // namespace fcce::nn
