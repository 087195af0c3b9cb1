#include "ministone/policy/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace ministone {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'T', 'N', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderBytes = 56;

template <class V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

template <class V>
V get(const std::string& in, std::size_t at) {
  V v;
  std::memcpy(&v, in.data() + at, sizeof(V));
  return v;
}

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

template <class T>
std::string checkpoint_bytes(const PolicyParamsT<T>& p) {
  std::string out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(p.w.size()) * sizeof(T) + 8);
  out.append(kMagic, 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, sizeof(T));
  put<std::uint64_t>(out, p.meta.pool_checksum);
  put<std::uint64_t>(out, p.dims.fingerprint());
  put<std::int32_t>(out, p.meta.hero_tag);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.dims.hidden));
  put<std::uint64_t>(out, p.meta.step);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.w.size()));
  out.append(reinterpret_cast<const char*>(p.w.data()), static_cast<std::size_t>(p.w.size()) * sizeof(T));
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

template <class T>
PolicyParamsT<T> checkpoint_from_bytes(const std::string& in, const ObsSchema& schema, std::uint64_t expected_pool) {
  if (in.size() < kHeaderBytes + 8) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(in.data(), kMagic, 8) != 0) throw CheckpointError("not a ministone checkpoint");
  const auto version = get<std::uint32_t>(in, 8);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto width = get<std::uint32_t>(in, 12);
  if (width != sizeof(T)) throw CheckpointError("checkpoint scalar width " + std::to_string(width) + " does not match");
  const auto trailer = get<std::uint64_t>(in, in.size() - 8);
  if (trailer != fnv1a(in.data(), in.size() - 8)) throw CheckpointError("checkpoint is corrupt (checksum)");
  const auto pool = get<std::uint64_t>(in, 16);
  if (expected_pool != 0 && pool != expected_pool) {
    throw CheckpointError("checkpoint pool checksum " + checksum_hex(pool) + " does not match " +
                          checksum_hex(expected_pool));
  }
  const auto hidden = get<std::uint32_t>(in, 36);
  NetDims dims = NetDims::from_schema(schema, static_cast<int>(hidden));
  if (get<std::uint64_t>(in, 24) != dims.fingerprint()) {
    throw CheckpointError("checkpoint network layout does not match the observation schema");
  }
  const auto count = get<std::uint64_t>(in, 48);
  PolicyParamsT<T> p(dims);
  if (count != static_cast<std::uint64_t>(p.w.size()) || in.size() != kHeaderBytes + count * sizeof(T) + 8) {
    throw CheckpointError("checkpoint parameter count mismatch");
  }
  std::memcpy(p.w.data(), in.data() + kHeaderBytes, count * sizeof(T));
  p.meta.pool_checksum = pool;
  p.meta.hero_tag = get<std::int32_t>(in, 32);
  p.meta.step = get<std::uint64_t>(in, 40);
  if (!p.w.allFinite()) throw CheckpointError("checkpoint contains non-finite parameters");
  return p;
}

template <class T>
void save_checkpoint(const PolicyParamsT<T>& p, const std::filesystem::path& path) {
  std::string bytes = checkpoint_bytes(p);
  // Write-then-rename so a crash never leaves a half-written checkpoint behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <class T>
PolicyParamsT<T> load_checkpoint(const std::filesystem::path& path, const ObsSchema& schema,
                                 std::uint64_t expected_pool) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_bytes<T>(ss.str(), schema, expected_pool);
}

template std::string checkpoint_bytes<float>(const PolicyParamsT<float>&);
template std::string checkpoint_bytes<double>(const PolicyParamsT<double>&);
template PolicyParamsT<float> checkpoint_from_bytes<float>(const std::string&, const ObsSchema&, std::uint64_t);
template PolicyParamsT<double> checkpoint_from_bytes<double>(const std::string&, const ObsSchema&, std::uint64_t);
template void save_checkpoint<float>(const PolicyParamsT<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const PolicyParamsT<double>&, const std::filesystem::path&);
template PolicyParamsT<float> load_checkpoint<float>(const std::filesystem::path&, const ObsSchema&, std::uint64_t);
template PolicyParamsT<double> load_checkpoint<double>(const std::filesystem::path&, const ObsSchema&, std::uint64_t);

}  // namespace ministone
