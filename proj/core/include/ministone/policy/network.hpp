#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ministone/obsact/observation.hpp"

namespace ministone {

// Parameter groups; the selector of the E2E policy keeps CB-stage action
// probabilities independent of BtBranch and BT-stage ones of CbBranch.
enum class ParamGroup : std::uint8_t { Embedding, CbBranch, BtBranch, Value };
std::string_view to_string(ParamGroup g);

struct NetDims {
  int pool_size = 0;
  int cb_dense = 0;
  int bt_dense = 0;
  int cb_slots = 0;
  int bt_slots = 0;
  int hidden = 256;
  int embed = kEmbeddingDim;
  std::uint64_t schema_fingerprint = 0;

  static NetDims from_schema(const ObsSchema& schema, int hidden = 256);
  int cb_input() const { return cb_dense + cb_slots * embed; }
  int bt_input() const { return bt_dense + bt_slots * embed; }
  // Hash of every dimension; a checkpoint only loads into identical dims.
  std::uint64_t fingerprint() const;
  friend bool operator==(const NetDims&, const NetDims&) = default;
};

struct TensorSpec {
  std::string name;
  ParamGroup group;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Column-major tensors laid out back to back in one flat vector.
class ParamLayout {
 public:
  explicit ParamLayout(const NetDims& dims);

  std::size_t total() const { return total_; }
  const std::vector<TensorSpec>& tensors() const { return tensors_; }
  const TensorSpec& at(std::string_view name) const;

  // Named tensors, cached for the hot path.
  TensorSpec card_emb, hero_emb;
  TensorSpec cb_w1, cb_b1, cb_w2, cb_b2, cb_out_w, cb_out_b, cb_query;
  TensorSpec bt_w1, bt_b1, bt_w2, bt_b2, bt_out_w, bt_out_b;
  TensorSpec value_w, value_b;

 private:
  std::vector<TensorSpec> tensors_;
  std::size_t total_ = 0;
};

// Checkpoint metadata travelling with parameters.
struct ParamMeta {
  std::uint64_t pool_checksum = 0;
  int hero_tag = -1;  // hero of an isolated instance, -1 when shared
  std::uint64_t step = 0;
};

template <class T>
struct PolicyParamsT {
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  NetDims dims;
  ParamLayout layout{dims};
  Vec w;
  ParamMeta meta;

  PolicyParamsT() = default;
  explicit PolicyParamsT(const NetDims& d) : dims(d), layout(d), w(Vec::Zero(static_cast<Eigen::Index>(layout.total()))) {}

  T* data(const TensorSpec& t) { return w.data() + t.offset; }
  const T* data(const TensorSpec& t) const { return w.data() + t.offset; }

  template <class U>
  PolicyParamsT<U> cast() const {
    PolicyParamsT<U> out(dims);
    out.w = w.template cast<U>();
    out.meta = meta;
    return out;
  }
};

using PolicyParams = PolicyParamsT<float>;
using PolicyParams64 = PolicyParamsT<double>;

// Per-layer scaled-uniform init U(-g/sqrt(fan_in), g/sqrt(fan_in)) with g = 1,
// except the action heads which use g = 0.01 so the initial masked policy is
// close to uniform. Biases start at zero. Deterministic per seed.
template <class T>
PolicyParamsT<T> init_params(const ObsSchema& schema, std::uint64_t seed, int hidden = 256);

template <class T>
struct PolicyOutputT {
  std::array<T, action::kTableSize> logits{};
  std::array<T, action::kTableSize> probs{};
  T value = 0;
  int delta = 1;
  ActionMask mask;
};
using PolicyOutput = PolicyOutputT<float>;

// Masked softmax with a -1e9 offset on illegal entries. Throws on an empty mask.
template <class T>
void masked_softmax(const T* logits, const ActionMask& mask, T* probs);

// Replaces CB logits by zeros (uniform over legal picks) when active.
// Throws std::logic_error for a BT output.
template <class T>
PolicyOutputT<T> random_cb_override(const PolicyOutputT<T>& out, bool active);

template <class T>
class PolicyNet {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  // Activations kept for the backward pass; columns are batch entries.
  struct Cache {
    std::vector<const ObservationBundle*> obs;
    Mat x_cb, h1_cb, h2_cb, x_bt, h1_bt, h2_bt, query;
    Mat logits;  // kTableSize x B, before masking
    Mat probs;   // masked
    Vec values;
  };

  static void forward(const PolicyParamsT<T>& params, std::span<const ObservationBundle* const> batch, Cache& cache);
  static PolicyOutputT<T> forward_one(const PolicyParamsT<T>& params, const ObservationBundle& obs);

  // Accumulates into grad the gradient of sum_b (dlogits[:, b] . logits[:, b] +
  // dvalues[b] * values[b]), i.e. back-propagates per-entry cotangents.
  static void backward(const PolicyParamsT<T>& params, const Cache& cache, const Mat& dlogits, const Vec& dvalues,
                       Vec& grad);
};

extern template class PolicyNet<float>;
extern template class PolicyNet<double>;

}  // namespace ministone
