#pragma once

#include <span>
#include <string>
#include <vector>

#include "rmn/numeric.hpp"
#include "rmn/rng.hpp"

namespace rmn {

enum class Composition { linear, gated };
enum class MemoryDirection { unidirectional, bidirectional };

// Words the memory block attends over at one time step. Positions are
// 1-indexed sentence positions; temporal_rows are 0-based rows of T.
struct MemorySlice {
  std::vector<int> word_ids;
  std::vector<int> positions;
  std::vector<int> temporal_rows;

  std::size_t size() const { return word_ids.size(); }
};

// Positions max(1, t-n+1)..t, oldest first, with T rows 0..len-1.
MemorySlice gather_memory(std::span<const int> sentence_ids, int t, int memory_size);

// The unidirectional window followed by positions t+2..min(L, t+n+1). The
// prediction target t+1 is never included. Future slots use T rows
// n..2n-1, nearest first.
MemorySlice build_bidirectional_memory(std::span<const int> sentence_ids, int t, int memory_size);

struct GateCache {
  Vec z, r, h_tilde, reset_h;
};

struct MbCache {
  MemorySlice slice;
  Mat keys;  // (M_i + T) rows, one per slot
  Vec h;
  Vec p;
  Vec s;
  GateCache gate;
};

struct MbOutput {
  Vec h_m;
  Vec p;
  MemorySlice slice;
};

Vec compose_linear(const Vec& s, const Vec& h);

class MemoryBlock {
 public:
  MemoryBlock() = default;
  MemoryBlock(Eigen::Index vocab_size, Eigen::Index dim, int memory_size, bool temporal,
              Composition composition, MemoryDirection direction = MemoryDirection::unidirectional);

  // Every table and gate matrix uniform in (-0.05, 0.05).
  static MemoryBlock init(Eigen::Index vocab_size, Eigen::Index dim, int memory_size, bool temporal,
                          Composition composition, MemoryDirection direction, Rng& rng);

  int memory_size() const { return memory_size_; }
  Eigen::Index dim() const { return M.cols(); }
  Eigen::Index vocab_size() const { return M.rows(); }
  bool temporal() const { return temporal_; }
  Composition composition() const { return composition_; }
  MemoryDirection direction() const { return direction_; }

  MemorySlice slice_at(std::span<const int> sentence_ids, int t) const;

  Vec attention_weights(const MemorySlice& slice, const Vec& h, Mat* keys = nullptr) const;
  Vec context_vector(const MemorySlice& slice, const Vec& p) const;
  Vec compose_gated(const Vec& s, const Vec& h, GateCache* cache = nullptr) const;

  MbOutput step(std::span<const int> sentence_ids, int t, const Vec& h, MbCache* cache = nullptr) const;

  // Accumulates parameter gradients; returns d(loss)/dh.
  Vec backward(const MbCache& cache, const Vec& dh_m);

  void register_params(ParamRegistry& registry, const std::string& prefix);

  Tensor M, C, T;
  Tensor W_sz, U_hz, W_sr, U_hr, W, U;

 private:
  void check_ids(const MemorySlice& slice) const;

  int memory_size_ = 0;
  bool temporal_ = false;
  Composition composition_ = Composition::linear;
  MemoryDirection direction_ = MemoryDirection::unidirectional;
};

}  // namespace rmn
