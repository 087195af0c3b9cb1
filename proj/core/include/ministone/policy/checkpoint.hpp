#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "ministone/policy/network.hpp"

namespace ministone {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Byte layout (little-endian):
//   0   char[8]  magic "MSTNCKPT"
//   8   u32      format version (1)
//   12  u32      scalar width in bytes (4 = float32, 8 = float64)
//   16  u64      card pool checksum
//   24  u64      network dims fingerprint (includes the observation schema)
//   32  i32      hero tag (-1 when not isolated)
//   36  u32      hidden width
//   40  u64      training step counter
//   48  u64      parameter count N
//   56  N * scalar width   flat parameters in ParamLayout order
//   end u64      FNV-1a 64 of every preceding byte
inline constexpr int kCheckpointVersion = 1;

template <class T>
void save_checkpoint(const PolicyParamsT<T>& params, const std::filesystem::path& path);

// Validates magic, version, scalar width, trailer and sizes before building
// anything. When expected_pool is non-zero the stored pool checksum must
// match it. Throws CheckpointError.
template <class T>
PolicyParamsT<T> load_checkpoint(const std::filesystem::path& path, const ObsSchema& schema,
                                 std::uint64_t expected_pool);

// Serialized bytes of a checkpoint; save_checkpoint writes exactly these.
template <class T>
std::string checkpoint_bytes(const PolicyParamsT<T>& params);
template <class T>
PolicyParamsT<T> checkpoint_from_bytes(const std::string& bytes, const ObsSchema& schema, std::uint64_t expected_pool);

}  // namespace ministone
