#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "uhf/nn/parameters.hpp"

namespace uhf::nn {

// Checkpoint container, all integers little-endian:
//   magic    8 bytes  "UHFCKPT\0"
//   version  u32      1
//   count    u32      number of tensors
//   count x { name_len u32, name bytes, rank u32, dims u64[rank], values f64[prod(dims)] }
// Tensors are stored in path order. Optimizer state is not saved.

inline constexpr char kCheckpointMagic[8] = {'U', 'H', 'F', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const ParameterSet& params);
void write_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet read_checkpoint(std::istream& in);
ParameterSet read_checkpoint(const std::string& path);

}  // namespace uhf::nn
