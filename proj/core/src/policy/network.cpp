#include "ministone/policy/network.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ministone/util/seed.hpp"

namespace ministone {

namespace {

constexpr double kMaskOffset = 1e9;
constexpr int kCbRows = action::kCbSlots;
constexpr int kBtRows = action::kTableSize - action::kTypeBegin;

template <class T>
using MapM = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>>;
template <class T>
using MapCM = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>>;
template <class T>
using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <class T>
using MapCV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <class T>
MapCM<T> mat(const PolicyParamsT<T>& p, const TensorSpec& t) {
  return MapCM<T>(p.data(t), t.rows, t.cols);
}
template <class T>
MapCV<T> vec(const PolicyParamsT<T>& p, const TensorSpec& t) {
  return MapCV<T>(p.data(t), static_cast<Eigen::Index>(t.size()));
}
template <class T>
MapM<T> gmat(Eigen::Matrix<T, Eigen::Dynamic, 1>& g, const TensorSpec& t) {
  return MapM<T>(g.data() + t.offset, t.rows, t.cols);
}
template <class T>
MapV<T> gvec(Eigen::Matrix<T, Eigen::Dynamic, 1>& g, const TensorSpec& t) {
  return MapV<T>(g.data() + t.offset, static_cast<Eigen::Index>(t.size()));
}

std::uint64_t fnv(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Embedding: return "embedding";
    case ParamGroup::CbBranch: return "cb_branch";
    case ParamGroup::BtBranch: return "bt_branch";
    case ParamGroup::Value: return "value";
  }
  return "?";
}

NetDims NetDims::from_schema(const ObsSchema& schema, int hidden) {
  NetDims d;
  d.pool_size = schema.pool_size();
  d.cb_dense = schema.cb_dense_width();
  d.bt_dense = schema.bt_dense_width();
  d.cb_slots = schema.cb_slots();
  d.bt_slots = schema.bt_slots();
  d.hidden = hidden;
  d.embed = kEmbeddingDim;
  d.schema_fingerprint = schema.fingerprint();
  return d;
}

std::uint64_t NetDims::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint64_t v : {std::uint64_t(pool_size), std::uint64_t(cb_dense), std::uint64_t(bt_dense),
                          std::uint64_t(cb_slots), std::uint64_t(bt_slots), std::uint64_t(hidden),
                          std::uint64_t(embed), schema_fingerprint}) {
    h = fnv(h, v);
  }
  return h;
}

ParamLayout::ParamLayout(const NetDims& d) {
  auto add = [this](std::string name, ParamGroup g, int rows, int cols) {
    TensorSpec t{std::move(name), g, total_, rows, cols};
    total_ += t.size();
    tensors_.push_back(t);
    return t;
  };
  const int H = d.hidden;
  card_emb = add("card_embedding", ParamGroup::Embedding, d.embed, d.pool_size);
  hero_emb = add("hero_embedding", ParamGroup::Embedding, d.embed, kNumHeroes);
  cb_w1 = add("cb.w1", ParamGroup::CbBranch, H, d.cb_input());
  cb_b1 = add("cb.b1", ParamGroup::CbBranch, H, 1);
  cb_w2 = add("cb.w2", ParamGroup::CbBranch, H, H);
  cb_b2 = add("cb.b2", ParamGroup::CbBranch, H, 1);
  cb_out_w = add("cb.out_w", ParamGroup::CbBranch, kCbRows, H);
  cb_out_b = add("cb.out_b", ParamGroup::CbBranch, kCbRows, 1);
  cb_query = add("cb.query", ParamGroup::CbBranch, d.embed, H);
  bt_w1 = add("bt.w1", ParamGroup::BtBranch, H, d.bt_input());
  bt_b1 = add("bt.b1", ParamGroup::BtBranch, H, 1);
  bt_w2 = add("bt.w2", ParamGroup::BtBranch, H, H);
  bt_b2 = add("bt.b2", ParamGroup::BtBranch, H, 1);
  bt_out_w = add("bt.out_w", ParamGroup::BtBranch, kBtRows, H);
  bt_out_b = add("bt.out_b", ParamGroup::BtBranch, kBtRows, 1);
  value_w = add("value.w", ParamGroup::Value, 1, 2 * H);
  value_b = add("value.b", ParamGroup::Value, 1, 1);
}

const TensorSpec& ParamLayout::at(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no parameter tensor '" + std::string(name) + "'");
}

template <class T>
PolicyParamsT<T> init_params(const ObsSchema& schema, std::uint64_t seed, int hidden) {
  NetDims dims = NetDims::from_schema(schema, hidden);
  if (hidden <= 0) throw std::invalid_argument("hidden width must be positive");
  PolicyParamsT<T> p(dims);
  std::mt19937_64 rng(derive_seed(seed, {0x1417}));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](const TensorSpec& t, double bound) {
    T* x = p.data(t);
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = static_cast<T>(bound * unit(rng));
  };
  const auto& L = p.layout;
  fill(L.card_emb, 1.0 / std::sqrt(double(dims.embed)));
  fill(L.hero_emb, 1.0 / std::sqrt(double(dims.embed)));
  fill(L.cb_w1, 1.0 / std::sqrt(double(dims.cb_input())));
  fill(L.cb_w2, 1.0 / std::sqrt(double(hidden)));
  fill(L.cb_out_w, 0.01 / std::sqrt(double(hidden)));
  fill(L.cb_query, 0.01 / std::sqrt(double(hidden)));
  fill(L.bt_w1, 1.0 / std::sqrt(double(dims.bt_input())));
  fill(L.bt_w2, 1.0 / std::sqrt(double(hidden)));
  fill(L.bt_out_w, 0.01 / std::sqrt(double(hidden)));
  fill(L.value_w, 1.0 / std::sqrt(double(2 * hidden)));
  return p;
}

template <class T>
void masked_softmax(const T* z, const ActionMask& mask, T* probs) {
  if (mask.none()) throw std::invalid_argument("masked_softmax: no legal action");
  T shifted[action::kTableSize];
  T m = -std::numeric_limits<T>::infinity();
  for (int i = 0; i < action::kTableSize; ++i) {
    shifted[i] = mask.test(static_cast<std::size_t>(i)) ? z[i] : z[i] - static_cast<T>(kMaskOffset);
    m = std::max(m, shifted[i]);
  }
  T sum = 0;
  for (int i = 0; i < action::kTableSize; ++i) {
    probs[i] = std::exp(shifted[i] - m);
    sum += probs[i];
  }
  for (int i = 0; i < action::kTableSize; ++i) probs[i] /= sum;
}

template <class T>
PolicyOutputT<T> random_cb_override(const PolicyOutputT<T>& out, bool active) {
  if (out.delta != 1) throw std::logic_error("random-CB override applies to deck-building outputs only");
  if (!active) return out;
  PolicyOutputT<T> r = out;
  r.logits.fill(T(0));
  masked_softmax(r.logits.data(), r.mask, r.probs.data());
  return r;
}

template <class T>
void PolicyNet<T>::forward(const PolicyParamsT<T>& p, std::span<const ObservationBundle* const> batch, Cache& c) {
  const auto& L = p.layout;
  const auto& d = p.dims;
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const int E = d.embed;
  c.obs.assign(batch.begin(), batch.end());
  auto card = mat(p, L.card_emb);
  auto hero = mat(p, L.hero_emb);

  c.x_cb.setZero(d.cb_input(), B);
  c.x_bt.setZero(d.bt_input(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const ObservationBundle& o = *batch[static_cast<std::size_t>(b)];
    if (static_cast<int>(o.cb.size()) != d.cb_dense || static_cast<int>(o.bt.size()) != d.bt_dense) {
      throw std::invalid_argument("observation does not match the network schema");
    }
    for (int i = 0; i < d.cb_dense; ++i) c.x_cb(i, b) = static_cast<T>(o.cb[static_cast<std::size_t>(i)]);
    for (const auto& e : o.cb_bags) {
      const auto& table = e.table == 0 ? card : hero;
      c.x_cb.col(b).segment(d.cb_dense + e.slot * E, E) += static_cast<T>(e.weight) * table.col(e.row);
    }
    if (o.delta == 0) {
      for (int i = 0; i < d.bt_dense; ++i) c.x_bt(i, b) = static_cast<T>(o.bt[static_cast<std::size_t>(i)]);
      for (const auto& e : o.bt_bags) {
        const auto& table = e.table == 0 ? card : hero;
        c.x_bt.col(b).segment(d.bt_dense + e.slot * E, E) += static_cast<T>(e.weight) * table.col(e.row);
      }
    }
  }
  if (!c.x_cb.allFinite() || !c.x_bt.allFinite()) throw std::invalid_argument("non-finite observation input");

  c.h1_cb = ((mat(p, L.cb_w1) * c.x_cb).colwise() + vec(p, L.cb_b1)).array().tanh().matrix();
  c.h2_cb = ((mat(p, L.cb_w2) * c.h1_cb).colwise() + vec(p, L.cb_b2)).array().tanh().matrix();
  c.h1_bt = ((mat(p, L.bt_w1) * c.x_bt).colwise() + vec(p, L.bt_b1)).array().tanh().matrix();
  c.h2_bt = ((mat(p, L.bt_w2) * c.h1_bt).colwise() + vec(p, L.bt_b2)).array().tanh().matrix();
  c.query = mat(p, L.cb_query) * c.h2_cb;

  Mat z_cb = (mat(p, L.cb_out_w) * c.h2_cb).colwise() + vec(p, L.cb_out_b);
  Mat z_bt = (mat(p, L.bt_out_w) * c.h2_bt).colwise() + vec(p, L.bt_out_b);
  c.logits.setZero(action::kTableSize, B);
  c.probs.setZero(action::kTableSize, B);
  auto vw = mat(p, L.value_w);
  const int H = d.hidden;
  c.values = (vw.leftCols(H) * c.h2_cb + vw.rightCols(H) * c.h2_bt).transpose();
  c.values.array() += p.data(L.value_b)[0];
  for (Eigen::Index b = 0; b < B; ++b) {
    const ObservationBundle& o = *batch[static_cast<std::size_t>(b)];
    if (o.delta == 1) {
      for (int j = 0; j < kCbRows; ++j) {
        T v = z_cb(j, b);
        if (o.cb_candidates[static_cast<std::size_t>(j)] >= 0) {
          v += card.col(o.cb_candidates[static_cast<std::size_t>(j)]).dot(c.query.col(b));
        }
        c.logits(j, b) = v;
      }
    } else {
      c.logits.col(b).segment(action::kTypeBegin, kBtRows) = z_bt.col(b);
    }
    if (o.mask.any()) masked_softmax(c.logits.col(b).data(), o.mask, c.probs.col(b).data());
  }
}

template <class T>
PolicyOutputT<T> PolicyNet<T>::forward_one(const PolicyParamsT<T>& p, const ObservationBundle& obs) {
  Cache c;
  const ObservationBundle* one[] = {&obs};
  forward(p, one, c);
  PolicyOutputT<T> out;
  for (int i = 0; i < action::kTableSize; ++i) {
    out.logits[static_cast<std::size_t>(i)] = c.logits(i, 0);
    out.probs[static_cast<std::size_t>(i)] = c.probs(i, 0);
  }
  out.value = c.values(0);
  out.delta = obs.delta;
  out.mask = obs.mask;
  if (!std::isfinite(static_cast<double>(out.value))) throw std::runtime_error("non-finite value output");
  return out;
}

template <class T>
void PolicyNet<T>::backward(const PolicyParamsT<T>& p, const Cache& c, const Mat& dz, const Vec& dv, Vec& grad) {
  const auto& L = p.layout;
  const auto& d = p.dims;
  const Eigen::Index B = static_cast<Eigen::Index>(c.obs.size());
  const int H = d.hidden;
  const int E = d.embed;
  if (dz.rows() != action::kTableSize || dz.cols() != B || dv.size() != B) {
    throw std::invalid_argument("backward: cotangent shape mismatch");
  }
  if (grad.size() != static_cast<Eigen::Index>(L.total())) grad = Vec::Zero(static_cast<Eigen::Index>(L.total()));
  auto card = mat(p, L.card_emb);
  auto g_card = gmat(grad, L.card_emb);
  auto g_hero = gmat(grad, L.hero_emb);

  // Split logit cotangents by branch; CB rows only matter for CB-stage
  // entries and vice versa.
  Mat dz_cb = Mat::Zero(kCbRows, B);
  Mat dz_bt = Mat::Zero(kBtRows, B);
  Mat dq = Mat::Zero(E, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const ObservationBundle& o = *c.obs[static_cast<std::size_t>(b)];
    if (o.delta == 1) {
      dz_cb.col(b) = dz.col(b).head(kCbRows);
      for (int j = 0; j < kCbRows; ++j) {
        CardId cand = o.cb_candidates[static_cast<std::size_t>(j)];
        if (cand < 0 || dz(j, b) == T(0)) continue;
        dq.col(b) += dz(j, b) * card.col(cand);
        g_card.col(cand) += dz(j, b) * c.query.col(b);
      }
    } else {
      dz_bt.col(b) = dz.col(b).segment(action::kTypeBegin, kBtRows);
    }
  }

  gmat(grad, L.cb_out_w) += dz_cb * c.h2_cb.transpose();
  gvec(grad, L.cb_out_b) += dz_cb.rowwise().sum();
  gmat(grad, L.cb_query) += dq * c.h2_cb.transpose();
  gmat(grad, L.bt_out_w) += dz_bt * c.h2_bt.transpose();
  gvec(grad, L.bt_out_b) += dz_bt.rowwise().sum();

  auto vw = mat(p, L.value_w);
  Mat dh2_cb = mat(p, L.cb_out_w).transpose() * dz_cb + mat(p, L.cb_query).transpose() * dq +
               vw.leftCols(H).transpose() * dv.transpose();
  Mat dh2_bt = mat(p, L.bt_out_w).transpose() * dz_bt + vw.rightCols(H).transpose() * dv.transpose();
  auto g_vw = gmat(grad, L.value_w);
  g_vw.leftCols(H) += dv.transpose() * c.h2_cb.transpose();
  g_vw.rightCols(H) += dv.transpose() * c.h2_bt.transpose();
  grad(static_cast<Eigen::Index>(L.value_b.offset)) += dv.sum();

  auto branch = [&](const Mat& dh2, const Mat& h1, const Mat& h2, const Mat& x, const TensorSpec& w1,
                    const TensorSpec& b1, const TensorSpec& w2, const TensorSpec& b2) -> Mat {
    Mat dpre2 = (dh2.array() * (T(1) - h2.array().square())).matrix();
    gmat(grad, w2) += dpre2 * h1.transpose();
    gvec(grad, b2) += dpre2.rowwise().sum();
    Mat dpre1 = ((mat(p, w2).transpose() * dpre2).array() * (T(1) - h1.array().square())).matrix();
    gmat(grad, w1) += dpre1 * x.transpose();
    gvec(grad, b1) += dpre1.rowwise().sum();
    return mat(p, w1).transpose() * dpre1;
  };
  Mat dx_cb = branch(dh2_cb, c.h1_cb, c.h2_cb, c.x_cb, L.cb_w1, L.cb_b1, L.cb_w2, L.cb_b2);
  Mat dx_bt = branch(dh2_bt, c.h1_bt, c.h2_bt, c.x_bt, L.bt_w1, L.bt_b1, L.bt_w2, L.bt_b2);

  for (Eigen::Index b = 0; b < B; ++b) {
    const ObservationBundle& o = *c.obs[static_cast<std::size_t>(b)];
    for (const auto& e : o.cb_bags) {
      auto seg = dx_cb.col(b).segment(d.cb_dense + e.slot * E, E);
      if (e.table == 0) g_card.col(e.row) += static_cast<T>(e.weight) * seg;
      else g_hero.col(e.row) += static_cast<T>(e.weight) * seg;
    }
    if (o.delta != 0) continue;
    for (const auto& e : o.bt_bags) {
      auto seg = dx_bt.col(b).segment(d.bt_dense + e.slot * E, E);
      if (e.table == 0) g_card.col(e.row) += static_cast<T>(e.weight) * seg;
      else g_hero.col(e.row) += static_cast<T>(e.weight) * seg;
    }
  }
}

template PolicyParamsT<float> init_params<float>(const ObsSchema&, std::uint64_t, int);
template PolicyParamsT<double> init_params<double>(const ObsSchema&, std::uint64_t, int);
template void masked_softmax<float>(const float*, const ActionMask&, float*);
template void masked_softmax<double>(const double*, const ActionMask&, double*);
template PolicyOutputT<float> random_cb_override<float>(const PolicyOutputT<float>&, bool);
template PolicyOutputT<double> random_cb_override<double>(const PolicyOutputT<double>&, bool);
template class PolicyNet<float>;
template class PolicyNet<double>;

}  // namespace ministone
