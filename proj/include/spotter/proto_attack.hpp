#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "spotter/data.hpp"
#include "spotter/model.hpp"
#include "spotter/unlearn.hpp"

namespace spotter {

enum class ProtoMetric { Cosine, Euclidean };

const char* to_string(ProtoMetric m);
ProtoMetric proto_metric_from_string(const std::string& s);

struct AttackConfig {
  int k = 5;                              // support samples per forget class
  double alpha = 1.0;                     // interpolation factor
  ProtoMetric metric = ProtoMetric::Cosine;
  u64 seed = 0;
};

// Componentwise mean of the support embeddings (rows of `embeddings`).
template <typename T>
std::vector<T> class_prototype(const Matrix<T>& embeddings) {
  require(embeddings.rows > 0, ErrorKind::EmptySupport,
          "prototype needs at least one embedding");
  std::vector<T> p(embeddings.cols, T(0));
  for (i64 i = 0; i < embeddings.rows; ++i)
    for (i64 k = 0; k < embeddings.cols; ++k) p[k] += embeddings.at(i, k);
  for (auto& v : p) v /= static_cast<T>(embeddings.rows);
  return p;
}

// Head row equivalent to nearest-prototype classification:
//   cosine:    w = p / |p|, b = 0
//   euclidean: w = 2p,      b = -|p|^2
template <typename T>
HeadRow<T> prototype_head(std::span<const T> p, ProtoMetric metric) {
  HeadRow<T> row;
  row.weights.assign(p.begin(), p.end());
  double norm2 = 0.0;
  for (T v : p) norm2 += static_cast<double>(v) * v;
  if (metric == ProtoMetric::Cosine) {
    require(norm2 > 0.0, ErrorKind::DegeneratePrototype,
            "cosine head undefined for a zero-norm prototype");
    const T inv = static_cast<T>(1.0 / std::sqrt(norm2));
    for (auto& v : row.weights) v *= inv;
    row.bias = T(0);
  } else {
    for (auto& v : row.weights) v *= T(2);
    row.bias = static_cast<T>(-norm2);
  }
  return row;
}

// Convex combination of the prototype head with the unlearned head:
//   w* = alpha w_hat + (1 - alpha) w_u,  b* = alpha b_hat + (1 - alpha) b_u.
template <typename T>
HeadRow<T> interpolate_head(std::span<const T> w_hat, T b_hat,
                            std::span<const T> w_u, T b_u, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::Config,
          "alpha must lie in [0, 1]");
  require(w_hat.size() == w_u.size(), ErrorKind::ShapeMismatch,
          "head rows differ in width");
  const T a = static_cast<T>(alpha);
  const T one_minus = static_cast<T>(1.0 - alpha);
  HeadRow<T> row;
  row.weights.resize(w_hat.size());
  for (std::size_t i = 0; i < w_hat.size(); ++i)
    row.weights[i] = a * w_hat[i] + one_minus * w_u[i];
  row.bias = a * b_hat + one_minus * b_u;
  return row;
}

// Patches the unlearned head: for each supported class, embed the support
// samples with the unlearned feature extractor, form the prototype, derive
// the head row under cfg.metric, interpolate with the existing row, and
// replace only those rows. phi and all other rows are untouched.
Classifier<float> prototypical_attack(
    const Classifier<float>& model_u,
    const std::map<int, Matrix<float>>& support_inputs,
    const AttackConfig& cfg);

// Draws k support inputs per forget class from the forget training split.
std::map<int, Matrix<float>> draw_support(const Dataset& data,
                                          const ForgetSpec& forget, int k,
                                          u64 seed);

struct AlphaRecord {
  double alpha = 0.0;
  double proto_acc_f = 0.0;  // accuracy on D_f after the patch
  double acc_r_star = 0.0;   // retained training accuracy after the patch
  bool feasible = false;     // acc_r_star >= acc_r - max_drop
};

struct AlphaTuneResult {
  double chosen_alpha = 0.0;
  bool constraint_unsatisfied = false;
  double base_acc_r = 0.0;  // unlearned model's retained accuracy
  std::vector<AlphaRecord> records;
};

// Evaluates the patched model for every alpha in the grid (descending) and
// returns the largest alpha whose retained-accuracy drop stays within
// max_drop percentage points. Falls back to alpha = 0 with a flag when no
// grid point qualifies.
AlphaTuneResult tune_alpha(const Classifier<float>& model_u,
                           const std::map<int, Matrix<float>>& support,
                           const Dataset& data, const ForgetSpec& forget,
                           std::span<const double> alpha_grid,
                           const AttackConfig& cfg, double max_drop = 1.0);

// RelearnN comparison attack: plain cross-entropy fine-tuning of the whole
// model on N forget samples.
Classifier<float> finetune_relearn(const Classifier<float>& model_u,
                                   const Matrix<float>& xs,
                                   const std::vector<int>& ys,
                                   const OptimConfig& optim, u64 seed);

}  // namespace spotter
