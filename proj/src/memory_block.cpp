#include "rmn/memory_block.hpp"

#include <algorithm>

namespace rmn {

namespace {

void check_position(std::span<const int> ids, int t, int memory_size) {
  if (memory_size < 1) throw std::invalid_argument("memory size must be >= 1");
  if (t < 1 || t > static_cast<int>(ids.size())) {
    throw std::out_of_range("memory position " + std::to_string(t) + " outside sentence of length " +
                            std::to_string(ids.size()));
  }
}

void fill_uniform(Tensor& t, Rng& rng) {
  for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] = rng.uniform_open(-0.05, 0.05);
}

}  // namespace

MemorySlice gather_memory(std::span<const int> sentence_ids, int t, int memory_size) {
  check_position(sentence_ids, t, memory_size);
  MemorySlice slice;
  const int first = std::max(1, t - memory_size + 1);
  for (int pos = first; pos <= t; ++pos) {
    slice.word_ids.push_back(sentence_ids[pos - 1]);
    slice.positions.push_back(pos);
    slice.temporal_rows.push_back(pos - first);
  }
  return slice;
}

MemorySlice build_bidirectional_memory(std::span<const int> sentence_ids, int t, int memory_size) {
  MemorySlice slice = gather_memory(sentence_ids, t, memory_size);
  const int length = static_cast<int>(sentence_ids.size());
  const int last = std::min(length, t + memory_size + 1);
  for (int pos = t + 2; pos <= last; ++pos) {
    slice.word_ids.push_back(sentence_ids[pos - 1]);
    slice.positions.push_back(pos);
    slice.temporal_rows.push_back(memory_size + (pos - t - 2));
  }
  return slice;
}

Vec compose_linear(const Vec& s, const Vec& h) {
  if (s.size() != h.size()) throw std::invalid_argument("compose_linear: length mismatch");
  return s + h;
}

MemoryBlock::MemoryBlock(Eigen::Index vocab_size, Eigen::Index dim, int memory_size, bool temporal,
                         Composition composition, MemoryDirection direction)
    : M(vocab_size, dim), C(vocab_size, dim), memory_size_(memory_size), temporal_(temporal),
      composition_(composition), direction_(direction) {
  if (vocab_size < 1 || dim < 1 || memory_size < 1) {
    throw std::invalid_argument("MemoryBlock: vocabulary, dimension and memory size must be >= 1");
  }
  if (temporal) {
    const int rows = direction == MemoryDirection::bidirectional ? 2 * memory_size : memory_size;
    T = Tensor(rows, dim);
  }
  if (composition == Composition::gated) {
    for (Tensor* g : {&W_sz, &U_hz, &W_sr, &U_hr, &W, &U}) *g = Tensor(dim, dim);
  }
}

MemoryBlock MemoryBlock::init(Eigen::Index vocab_size, Eigen::Index dim, int memory_size, bool temporal,
                              Composition composition, MemoryDirection direction, Rng& rng) {
  MemoryBlock mb(vocab_size, dim, memory_size, temporal, composition, direction);
  fill_uniform(mb.M, rng);
  fill_uniform(mb.C, rng);
  if (temporal) fill_uniform(mb.T, rng);
  if (composition == Composition::gated) {
    for (Tensor* g : {&mb.W_sz, &mb.U_hz, &mb.W_sr, &mb.U_hr, &mb.W, &mb.U}) fill_uniform(*g, rng);
  }
  return mb;
}

MemorySlice MemoryBlock::slice_at(std::span<const int> sentence_ids, int t) const {
  return direction_ == MemoryDirection::bidirectional ? build_bidirectional_memory(sentence_ids, t, memory_size_)
                                                      : gather_memory(sentence_ids, t, memory_size_);
}

void MemoryBlock::check_ids(const MemorySlice& slice) const {
  if (slice.size() == 0) throw std::invalid_argument("memory slice is empty");
  for (int id : slice.word_ids) {
    if (id < 0 || id >= vocab_size()) throw std::out_of_range("invalid word id in memory: " + std::to_string(id));
  }
  if (temporal_) {
    for (int row : slice.temporal_rows) {
      if (row < 0 || row >= T.rows()) throw std::out_of_range("memory slice exceeds temporal matrix");
    }
  }
}

Vec MemoryBlock::attention_weights(const MemorySlice& slice, const Vec& h, Mat* keys) const {
  check_ids(slice);
  if (h.size() != dim()) throw std::invalid_argument("attention_weights: query dimension mismatch");
  const auto len = static_cast<Eigen::Index>(slice.size());
  Mat k(len, dim());
  for (Eigen::Index s = 0; s < len; ++s) {
    k.row(s) = M.value.row(slice.word_ids[s]);
    if (temporal_) k.row(s) += T.value.row(slice.temporal_rows[s]);
  }
  Vec p = softmax_stable(k * h);
  if (keys != nullptr) *keys = std::move(k);
  return p;
}

Vec MemoryBlock::context_vector(const MemorySlice& slice, const Vec& p) const {
  if (static_cast<std::size_t>(p.size()) != slice.size()) {
    throw std::invalid_argument("context_vector: attention length does not match slice");
  }
  check_ids(slice);
  Vec s = Vec::Zero(dim());
  for (Eigen::Index k = 0; k < p.size(); ++k) s += p[k] * C.value.row(slice.word_ids[k]).transpose();
  return s;
}

Vec MemoryBlock::compose_gated(const Vec& s, const Vec& h, GateCache* cache) const {
  if (composition_ != Composition::gated) throw std::logic_error("compose_gated: memory block has no gate parameters");
  if (s.size() != dim() || h.size() != dim()) throw std::invalid_argument("compose_gated: length mismatch");
  Vec z = sigmoid(Vec(W_sz.value * s + U_hz.value * h));
  Vec r = sigmoid(Vec(W_sr.value * s + U_hr.value * h));
  Vec reset_h = r.cwiseProduct(h);
  Vec h_tilde = tanh(Vec(W.value * s + U.value * reset_h));
  Vec out = (Vec::Ones(dim()) - z).cwiseProduct(h) + z.cwiseProduct(h_tilde);
  if (cache != nullptr) {
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->h_tilde = std::move(h_tilde);
    cache->reset_h = std::move(reset_h);
  }
  return out;
}

MbOutput MemoryBlock::step(std::span<const int> sentence_ids, int t, const Vec& h, MbCache* cache) const {
  MbOutput out;
  out.slice = slice_at(sentence_ids, t);
  Mat keys;
  out.p = attention_weights(out.slice, h, cache != nullptr ? &keys : nullptr);
  Vec s = context_vector(out.slice, out.p);
  GateCache gate;
  out.h_m = composition_ == Composition::gated ? compose_gated(s, h, cache != nullptr ? &gate : nullptr)
                                               : compose_linear(s, h);
  check_finite(out.h_m, "memory block");
  if (cache != nullptr) {
    cache->slice = out.slice;
    cache->keys = std::move(keys);
    cache->h = h;
    cache->p = out.p;
    cache->s = std::move(s);
    cache->gate = std::move(gate);
  }
  return out;
}

Vec MemoryBlock::backward(const MbCache& k, const Vec& dh_m) {
  Vec ds;
  Vec dh;
  if (composition_ == Composition::linear) {
    ds = dh_m;
    dh = dh_m;
  } else {
    const GateCache& g = k.gate;
    const auto one = Vec::Ones(dim()).array();
    const Vec dz = dh_m.cwiseProduct(g.h_tilde - k.h);
    dh = (dh_m.array() * (one - g.z.array())).matrix();
    const Vec da_h = (dh_m.array() * g.z.array() * (one - g.h_tilde.array().square())).matrix();
    W.grad.noalias() += da_h * k.s.transpose();
    U.grad.noalias() += da_h * g.reset_h.transpose();
    ds = W.value.transpose() * da_h;
    const Vec d_reset_h = U.value.transpose() * da_h;
    dh += d_reset_h.cwiseProduct(g.r);
    const Vec da_r = (d_reset_h.array() * k.h.array() * g.r.array() * (one - g.r.array())).matrix();
    W_sr.grad.noalias() += da_r * k.s.transpose();
    U_hr.grad.noalias() += da_r * k.h.transpose();
    ds += W_sr.value.transpose() * da_r;
    dh += U_hr.value.transpose() * da_r;
    const Vec da_z = (dz.array() * g.z.array() * (one - g.z.array())).matrix();
    W_sz.grad.noalias() += da_z * k.s.transpose();
    U_hz.grad.noalias() += da_z * k.h.transpose();
    ds += W_sz.value.transpose() * da_z;
    dh += U_hz.value.transpose() * da_z;
  }

  const auto len = static_cast<Eigen::Index>(k.slice.size());
  Vec dp(len);
  for (Eigen::Index s = 0; s < len; ++s) {
    const int id = k.slice.word_ids[s];
    dp[s] = C.value.row(id).dot(ds);
    C.grad.row(id) += k.p[s] * ds.transpose();
  }
  const Vec dlogits = (k.p.array() * (dp.array() - k.p.dot(dp))).matrix();
  dh += k.keys.transpose() * dlogits;
  for (Eigen::Index s = 0; s < len; ++s) {
    M.grad.row(k.slice.word_ids[s]) += dlogits[s] * k.h.transpose();
    if (temporal_) T.grad.row(k.slice.temporal_rows[s]) += dlogits[s] * k.h.transpose();
  }
  return dh;
}

void MemoryBlock::register_params(ParamRegistry& registry, const std::string& prefix) {
  registry.add(prefix + "M", M);
  registry.add(prefix + "C", C);
  if (temporal_) registry.add(prefix + "T", T);
  if (composition_ == Composition::gated) {
    registry.add(prefix + "W_sz", W_sz);
    registry.add(prefix + "U_hz", U_hz);
    registry.add(prefix + "W_sr", W_sr);
    registry.add(prefix + "U_hr", U_hr);
    registry.add(prefix + "W", W);
    registry.add(prefix + "U", U);
  }
}

}  // namespace rmn
