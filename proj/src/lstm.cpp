#include "rmn/lstm.hpp"

namespace rmn {

namespace {

void fill_uniform(Tensor& t, Rng& rng) {
  for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] = rng.uniform_open(-0.05, 0.05);
}

}  // namespace

LstmCell::LstmCell(Eigen::Index input_dim, Eigen::Index hidden_dim, OutputGate gate)
    : W_xi(hidden_dim, input_dim), W_hi(hidden_dim, hidden_dim),
      W_xj(hidden_dim, input_dim), W_hj(hidden_dim, hidden_dim),
      W_xf(hidden_dim, input_dim), W_hf(hidden_dim, hidden_dim),
      W_xo(hidden_dim, input_dim), W_ho(hidden_dim, hidden_dim),
      b_i(hidden_dim, 1), b_j(hidden_dim, 1), b_f(hidden_dim, 1), b_o(hidden_dim, 1),
      gate_(gate) {
  if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("LstmCell: dimensions must be >= 1");
}

LstmCell LstmCell::init(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng, OutputGate gate) {
  LstmCell cell(input_dim, hidden_dim, gate);
  for (Tensor* t : {&cell.W_xi, &cell.W_hi, &cell.b_i, &cell.W_xj, &cell.W_hj, &cell.b_j,
                    &cell.W_xf, &cell.W_hf, &cell.W_xo, &cell.W_ho, &cell.b_o}) {
    fill_uniform(*t, rng);
  }
  cell.b_f.value.setOnes();
  return cell;
}

LstmCell LstmCell::init(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed,
                        OutputGate gate) {
  Rng rng(seed);
  return init(input_dim, hidden_dim, rng, gate);
}

LstmState LstmCell::step(const Vec& x, const LstmState& prev, LstmCache* cache) const {
  if (x.size() != input_dim() || prev.h.size() != hidden_dim() || prev.c.size() != hidden_dim()) {
    throw std::invalid_argument("lstm_step: shape mismatch");
  }
  Vec i = sigmoid(Vec(W_xi.value * x + W_hi.value * prev.h + b_i.value));
  Vec j = sigmoid(Vec(W_xj.value * x + W_hj.value * prev.h + b_j.value));
  Vec f = sigmoid(Vec(W_xf.value * x + W_hf.value * prev.h + b_f.value));
  Vec a_o = W_xo.value * x + W_ho.value * prev.h + b_o.value;
  Vec o = gate_ == OutputGate::tanh_gate ? tanh(a_o) : sigmoid(a_o);

  LstmState next;
  next.c = prev.c.cwiseProduct(f) + i.cwiseProduct(j);
  Vec tanh_c = tanh(next.c);
  next.h = tanh_c.cwiseProduct(o);
  check_finite(next.h, "lstm_step");
  check_finite(next.c, "lstm_step");

  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->i = std::move(i);
    cache->j = std::move(j);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

LstmInputGrads LstmCell::backward(const LstmCache& k, const Vec& dh, const Vec& dc) {
  const auto one = Vec::Ones(hidden_dim()).array();
  const Vec dc_total = (dc.array() + dh.array() * k.o.array() * (one - k.tanh_c.array().square())).matrix();

  const Vec da_i = (dc_total.array() * k.j.array() * k.i.array() * (one - k.i.array())).matrix();
  const Vec da_j = (dc_total.array() * k.i.array() * k.j.array() * (one - k.j.array())).matrix();
  const Vec da_f = (dc_total.array() * k.c_prev.array() * k.f.array() * (one - k.f.array())).matrix();
  const Vec d_o = dh.cwiseProduct(k.tanh_c);
  const Vec da_o = gate_ == OutputGate::tanh_gate
                       ? Vec((d_o.array() * (one - k.o.array().square())).matrix())
                       : Vec((d_o.array() * k.o.array() * (one - k.o.array())).matrix());

  W_xi.grad.noalias() += da_i * k.x.transpose();
  W_xj.grad.noalias() += da_j * k.x.transpose();
  W_xf.grad.noalias() += da_f * k.x.transpose();
  W_xo.grad.noalias() += da_o * k.x.transpose();
  W_hi.grad.noalias() += da_i * k.h_prev.transpose();
  W_hj.grad.noalias() += da_j * k.h_prev.transpose();
  W_hf.grad.noalias() += da_f * k.h_prev.transpose();
  W_ho.grad.noalias() += da_o * k.h_prev.transpose();
  b_i.grad += da_i;
  b_j.grad += da_j;
  b_f.grad += da_f;
  b_o.grad += da_o;

  LstmInputGrads g;
  g.dx = W_xi.value.transpose() * da_i + W_xj.value.transpose() * da_j +
         W_xf.value.transpose() * da_f + W_xo.value.transpose() * da_o;
  g.dh_prev = W_hi.value.transpose() * da_i + W_hj.value.transpose() * da_j +
              W_hf.value.transpose() * da_f + W_ho.value.transpose() * da_o;
  g.dc_prev = dc_total.cwiseProduct(k.f);
  return g;
}

void LstmCell::register_params(ParamRegistry& registry, const std::string& prefix) {
  registry.add(prefix + "W_xi", W_xi);
  registry.add(prefix + "W_hi", W_hi);
  registry.add(prefix + "b_i", b_i);
  registry.add(prefix + "W_xj", W_xj);
  registry.add(prefix + "W_hj", W_hj);
  registry.add(prefix + "b_j", b_j);
  registry.add(prefix + "W_xf", W_xf);
  registry.add(prefix + "W_hf", W_hf);
  registry.add(prefix + "b_f", b_f);
  registry.add(prefix + "W_xo", W_xo);
  registry.add(prefix + "W_ho", W_ho);
  registry.add(prefix + "b_o", b_o);
}

Vec apply_dropout(const Vec& v, double rate, DropoutMode mode, Rng& rng, Vec* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("apply_dropout: rate must lie in [0, 1)");
  if (mode == DropoutMode::eval || rate == 0.0) {
    if (mask != nullptr) *mask = Vec::Ones(v.size());
    return v;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Vec m(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) m[k] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Vec out = v.cwiseProduct(m);
  if (mask != nullptr) *mask = std::move(m);
  return out;
}

}  // namespace rmn
