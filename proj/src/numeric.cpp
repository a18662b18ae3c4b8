#include "rmn/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace rmn {

void ParamRegistry::add(std::string name, Tensor& tensor) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), &tensor});
}

std::size_t ParamRegistry::num_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.tensor->size());
  return n;
}

Tensor* ParamRegistry::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  return nullptr;
}

Tensor& ParamRegistry::at(std::string_view name) const {
  Tensor* t = find(name);
  if (t == nullptr) throw std::out_of_range("unknown parameter: " + std::string(name));
  return *t;
}

void ParamRegistry::zero_grad() {
  for (auto& e : entries_) e.tensor->zero_grad();
}

double ParamRegistry::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) sq += e.tensor->grad.squaredNorm();
  return std::sqrt(sq);
}

Vec sigmoid(const Vec& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

Vec tanh(const Vec& x) { return x.array().tanh().matrix(); }

Vec softmax_stable(const Vec& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax_stable: empty input");
  check_finite(logits, "softmax_stable input");
  const double peak = logits.maxCoeff();
  // Scalar std::exp keeps the map monotone near underflow; the vectorized
  // packet exp flushes some subnormals to zero but not others.
  Vec out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - peak);
  out /= out.sum();
  return out;
}

double clip_gradients(const ParamRegistry& registry, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_gradients: threshold must be positive");
  for (const auto& e : registry) {
    if (!all_finite(e.tensor->grad)) throw NumericError("non-finite gradient in " + e.name);
  }
  const double norm = registry.grad_norm();
  if (norm <= threshold) return 1.0;
  const double scale = threshold / norm;
  for (const auto& e : registry) e.tensor->grad *= scale;
  return scale;
}

GradCheckResult gradient_check(const ParamRegistry& registry,
                               const std::function<double()>& loss,
                               const std::function<double()>& loss_and_grad,
                               double epsilon) {
  if (epsilon < 1e-6 || epsilon > 1e-4) {
    throw std::invalid_argument("gradient_check: epsilon must lie in [1e-6, 1e-4]");
  }
  const double first = loss();
  const double second = loss();
  if (first != second) {
    throw std::invalid_argument("gradient_check: loss is not deterministic");
  }

  for (const auto& e : registry) e.tensor->zero_grad();
  loss_and_grad();

  std::vector<Mat> analytic;
  analytic.reserve(registry.size());
  for (const auto& e : registry) analytic.push_back(e.tensor->grad);

  GradCheckResult result;
  for (std::size_t p = 0; p < registry.size(); ++p) {
    const auto& entry = registry.entries()[p];
    Mat& value = entry.tensor->value;
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      double& theta = value.data()[k];
      const double saved = theta;
      theta = saved + epsilon;
      const double up = loss();
      theta = saved - epsilon;
      const double down = loss();
      theta = saved;

      const double num = (up - down) / (2.0 * epsilon);
      const double ana = analytic[p].data()[k];
      const double denom = std::max({std::abs(ana), std::abs(num), 1e-8});
      const double rel = std::abs(ana - num) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = entry.name;
        result.worst_index = k;
        result.analytic = ana;
        result.numeric = num;
      }
    }
  }
  return result;
}

}  // namespace rmn
