#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spotter/common.hpp"
#include "spotter/parallel.hpp"

namespace spotter {

enum class OptimizerKind { Adam, Sgd };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  raise(ErrorKind::Config, "unknown optimizer: " + s);
}

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "sgd";
}

// Adam over a flat parameter vector; moment state kept in double.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(i64 n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<T> params, std::span<const T> grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    par::parallel_for(static_cast<i64>(params.size()), [&](i64 i) {
      const double g = static_cast<double>(grads[i]);
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    });
  }

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  i64 t_ = 0;
  std::vector<double> m_, v_;
};

template <typename T>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void step(std::span<T> params, std::span<const T> grads) {
    par::parallel_for(static_cast<i64>(params.size()), [&](i64 i) {
      params[i] -= static_cast<T>(lr_ * static_cast<double>(grads[i]));
    });
  }

 private:
  double lr_;
};

}  // namespace spotter
