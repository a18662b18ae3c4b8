#pragma once

#include <string>

#include "rmn/numeric.hpp"
#include "rmn/rng.hpp"

namespace rmn {

// Nonlinearity applied to the output gate pre-activation.
enum class OutputGate { tanh_gate, sigmoid_gate };

struct LstmState {
  Vec h;
  Vec c;

  static LstmState zeros(Eigen::Index dim) { return {Vec::Zero(dim), Vec::Zero(dim)}; }
};

// Activations kept from the forward pass for backpropagation.
struct LstmCache {
  Vec x, h_prev, c_prev;
  Vec i, j, f, o;
  Vec c, tanh_c;
};

struct LstmInputGrads {
  Vec dx;
  Vec dh_prev;
  Vec dc_prev;
};

class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(Eigen::Index input_dim, Eigen::Index hidden_dim, OutputGate gate = OutputGate::tanh_gate);

  // Forget-gate bias at 1, everything else uniform in (-0.05, 0.05).
  static LstmCell init(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng,
                       OutputGate gate = OutputGate::tanh_gate);
  static LstmCell init(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed,
                       OutputGate gate = OutputGate::tanh_gate);

  Eigen::Index input_dim() const { return W_xi.cols(); }
  Eigen::Index hidden_dim() const { return W_xi.rows(); }
  OutputGate output_gate() const { return gate_; }
  void set_output_gate(OutputGate gate) { gate_ = gate; }

  LstmState step(const Vec& x, const LstmState& prev, LstmCache* cache = nullptr) const;

  // Accumulates parameter gradients and returns gradients for the inputs of
  // the step that produced `cache`.
  LstmInputGrads backward(const LstmCache& cache, const Vec& dh, const Vec& dc);

  void register_params(ParamRegistry& registry, const std::string& prefix);

  Tensor W_xi, W_hi, W_xj, W_hj, W_xf, W_hf, W_xo, W_ho;
  Tensor b_i, b_j, b_f, b_o;

 private:
  OutputGate gate_ = OutputGate::tanh_gate;
};

enum class DropoutMode { train, eval };

// Inverted dropout: survivors are scaled by 1/(1-rate) so eval mode is the
// identity. When `mask` is given it receives the multiplier used per entry.
Vec apply_dropout(const Vec& v, double rate, DropoutMode mode, Rng& rng, Vec* mask = nullptr);

}  // namespace rmn
