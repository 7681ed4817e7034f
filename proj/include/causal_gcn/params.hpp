#pragma once

#include <cmath>
#include <string_view>
#include <vector>

#include "causal_gcn/common.hpp"

namespace causal_gcn {

// Flat view of one learnable array, used by the optimizer, the checkpoint
// writer and the finite-difference checks.
struct ParamRef {
  std::string_view name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool is_weight;  // ridge-penalized

  Eigen::Index size() const { return rows * cols; }
};

template <class Derived>
ParamRef make_ref(std::string_view name, Eigen::PlainObjectBase<Derived>& m, bool is_weight) {
  return {name, m.data(), m.rows(), m.cols(), is_weight};
}

template <class Params>
double ridge_penalty(const Params& params) {
  double total = 0.0;
  for (const auto& r : params.refs()) {
    if (!r.is_weight) continue;
    for (Eigen::Index i = 0; i < r.size(); ++i) total += r.data[i] * r.data[i];
  }
  return total;
}

template <class Params>
bool all_finite(const Params& params) {
  for (const auto& r : params.refs()) {
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (!std::isfinite(r.data[i])) return false;
  }
  return true;
}

// Glorot-uniform init: uniform(-s, s), s = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng, Eigen::Index rows = -1) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-s, s);
  Matrix m(rows < 0 ? fan_in : rows, fan_out);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
  return m;
}

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class Params>
class Adam {
 public:
  Adam(const Params& shape, AdamSettings settings) : settings_(settings) {
    for (const auto& r : shape.refs()) {
      m_.emplace_back(r.size(), 0.0);
      v_.emplace_back(r.size(), 0.0);
    }
  }

  void step(Params& params, const Params& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
    auto p_refs = params.refs();
    auto g_refs = grads.refs();
    for (std::size_t b = 0; b < p_refs.size(); ++b) {
      auto& m = m_[b];
      auto& v = v_[b];
      for (Eigen::Index i = 0; i < p_refs[b].size(); ++i) {
        const double g = g_refs[b].data[i];
        m[i] = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * g;
        v[i] = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * g * g;
        p_refs[b].data[i] -= settings_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + settings_.epsilon);
      }
    }
  }

  long steps() const { return t_; }

 private:
  AdamSettings settings_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace causal_gcn
