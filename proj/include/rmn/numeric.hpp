#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rmn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a NaN or Inf shows up in an operation's result.
class NumericError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Dense rank-1/2 array with a gradient slot of identical shape. Vectors are
// stored as (n x 1).
struct Tensor {
  Mat value;
  Mat grad;

  Tensor() = default;
  Tensor(Eigen::Index rows, Eigen::Index cols)
      : value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
  explicit Tensor(Mat v) : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

// Ordered (name, tensor) list. Tensors are owned elsewhere (by the layers);
// the registry only indexes them, so it must be rebuilt when its owner is
// copied.
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Tensor* tensor;
  };

  void add(std::string name, Tensor& tensor);
  void clear() { entries_.clear(); }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t num_values() const;

  Tensor* find(std::string_view name) const;
  Tensor& at(std::string_view name) const;

  void zero_grad();
  double grad_norm() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& m, const char* where) {
  if (!all_finite(m)) throw NumericError(std::string("non-finite value produced by ") + where);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec sigmoid(const Vec& x);
Vec tanh(const Vec& x);

// Max-subtracted softmax. Throws on empty or non-finite input.
Vec softmax_stable(const Vec& logits);

// Rescales every registered gradient by threshold/norm when the global L2
// norm exceeds threshold. Returns the scale that was applied.
double clip_gradients(const ParamRegistry& registry, double threshold);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients against central differences for every entry of
// every registered tensor.
//
// `loss` evaluates the scalar objective without touching gradients.
// `loss_and_grad` evaluates the objective and accumulates d(loss)/d(theta)
// into each tensor's grad slot (which gradient_check zeroes beforehand).
//
// A loss that differs bitwise between two evaluations at the same point is
// rejected with std::invalid_argument.
GradCheckResult gradient_check(const ParamRegistry& registry,
                               const std::function<double()>& loss,
                               const std::function<double()>& loss_and_grad,
                               double epsilon = 1e-5);

}  // namespace rmn
