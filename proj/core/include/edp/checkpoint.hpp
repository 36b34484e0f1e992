#ifndef EDP_CHECKPOINT_HPP_
#define EDP_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "edp/mlp.hpp"

namespace edp {

/// Generic checkpoint contents: step counter, named integer scalars, named
/// parameter blocks and free-form key=value metadata.
///
/// File layout (little-endian): "EDPC", u16 version, u16 reserved, u64 step,
/// u32 #scalars {str16 name, u64 value}, u32 #meta {str16 key, str32 value},
/// u32 #blocks {str16 name, u32 #layers {u32 out, u32 in}}, then every block's
/// layers as 32-bit floats (weights column-major, then bias) in manifest order.
struct CheckpointData {
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, std::uint64_t>> scalars;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Params>> blocks;

  std::uint64_t scalar(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
  const Params& block(const std::string& name) const;
  bool has_block(const std::string& name) const;
};

// Parameters must be float-representable for the round trip to be exact.
void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

}  // namespace edp

#endif  // EDP_CHECKPOINT_HPP_
