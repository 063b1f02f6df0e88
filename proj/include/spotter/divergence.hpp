#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "spotter/common.hpp"

namespace spotter {

enum class DivergenceKind { KL, JS };

inline const char* to_string(DivergenceKind k) {
  return k == DivergenceKind::KL ? "kl" : "js";
}

// Flooring events are legitimate (unlearned models drive forget-class mass
// to exact zero) but worth counting. Counters are process-global and
// thread-safe; they never influence computed values.
struct DivergenceDiagnostics {
  std::atomic<i64> kl_floor_events{0};
  std::atomic<i64> masked_floor_events{0};
  void reset() {
    kl_floor_events = 0;
    masked_floor_events = 0;
  }
};
DivergenceDiagnostics& divergence_diagnostics();

inline constexpr double kProbFloor = 1e-12;

template <typename T>
std::vector<T> softmax(std::span<const T> z) {
  std::vector<T> p(z.size());
  T zmax = *std::max_element(z.begin(), z.end());
  T sum = T(0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - zmax);
    sum += p[k];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Softmax with the forget classes zeroed out and the retain mass
// renormalized. forget_classes must leave at least one retain class; an
// empty mask returns the plain softmax unchanged.
template <typename T>
std::vector<T> masked_softmax(std::span<const T> z,
                              std::span<const int> forget_classes) {
  if (forget_classes.empty()) return softmax(z);
  std::vector<char> masked(z.size(), 0);
  for (int c : forget_classes) {
    require(c >= 0 && c < static_cast<int>(z.size()), ErrorKind::Config,
            "forget class out of range");
    masked[c] = 1;
  }
  require(std::find(masked.begin(), masked.end(), 0) != masked.end(),
          ErrorKind::InvalidMask, "mask covers every class");

  std::vector<T> p = softmax(z);
  T retain_mass = T(0);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (!masked[k]) retain_mass += p[k];
  if (static_cast<double>(retain_mass) < kProbFloor) {
    divergence_diagnostics().masked_floor_events.fetch_add(
        1, std::memory_order_relaxed);
    retain_mass = static_cast<T>(kProbFloor);
  }
  for (std::size_t k = 0; k < p.size(); ++k)
    p[k] = masked[k] ? T(0) : p[k] / retain_mass;
  return p;
}

// sum_k p_k ln(p_k / q_k), with 0 ln(0/.) = 0 and q floored at 1e-12.
template <typename T>
T kl_divergence(std::span<const T> p, std::span<const T> q) {
  require(p.size() == q.size(), ErrorKind::ShapeMismatch,
          "probability vectors differ in length");
  double acc = 0.0;
  bool floored = false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double pk = static_cast<double>(p[k]);
    if (pk <= 0.0) continue;
    double qk = static_cast<double>(q[k]);
    if (qk < kProbFloor) {
      qk = kProbFloor;
      floored = true;
    }
    acc += pk * std::log(pk / qk);
  }
  if (floored)
    divergence_diagnostics().kl_floor_events.fetch_add(
        1, std::memory_order_relaxed);
  return static_cast<T>(acc);
}

// JS(p, q) = KL(p || m)/2 + KL(q || m)/2 with m = (p + q)/2; symmetric and
// bounded by ln 2 (natural-log convention throughout).
template <typename T>
T js_divergence(std::span<const T> p, std::span<const T> q) {
  require(p.size() == q.size(), ErrorKind::ShapeMismatch,
          "probability vectors differ in length");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double pk = static_cast<double>(p[k]);
    double qk = static_cast<double>(q[k]);
    double mk = 0.5 * (pk + qk);
    if (pk > 0.0) acc += 0.5 * pk * std::log(pk / mk);
    if (qk > 0.0) acc += 0.5 * qk * std::log(qk / mk);
  }
  return static_cast<T>(acc);
}

template <typename T>
T divergence(DivergenceKind kind, std::span<const T> p, std::span<const T> q) {
  return kind == DivergenceKind::KL ? kl_divergence(p, q)
                                    : js_divergence(p, q);
}

// d divergence(p, q(z)) / d z for fixed p and q = softmax(z).
// KL: q - p.  JS: q .* (g - <q, g>) with g_k = ln(q_k / m_k) / 2.
template <typename T>
void divergence_grad_logits(DivergenceKind kind, std::span<const T> p,
                            std::span<const T> q, std::span<T> gz) {
  const std::size_t n = p.size();
  if (kind == DivergenceKind::KL) {
    for (std::size_t k = 0; k < n; ++k) gz[k] = q[k] - p[k];
    return;
  }
  double dot = 0.0;
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    double qk = std::max(static_cast<double>(q[k]), kProbFloor);
    double mk = std::max(0.5 * (static_cast<double>(p[k]) + qk), kProbFloor);
    g[k] = 0.5 * std::log(qk / mk);
    dot += static_cast<double>(q[k]) * g[k];
  }
  for (std::size_t k = 0; k < n; ++k)
    gz[k] = static_cast<T>(static_cast<double>(q[k]) * (g[k] - dot));
}

}  // namespace spotter
