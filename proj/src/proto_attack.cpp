#include "spotter/proto_attack.hpp"

#include <algorithm>

namespace spotter {

const char* to_string(ProtoMetric m) {
  return m == ProtoMetric::Cosine ? "cosine" : "euclidean";
}

ProtoMetric proto_metric_from_string(const std::string& s) {
  if (s == "cosine") return ProtoMetric::Cosine;
  if (s == "euclidean") return ProtoMetric::Euclidean;
  raise(ErrorKind::Config, "unknown prototype metric: " + s);
}

Classifier<float> prototypical_attack(
    const Classifier<float>& model_u,
    const std::map<int, Matrix<float>>& support_inputs,
    const AttackConfig& cfg) {
  require(!support_inputs.empty(), ErrorKind::EmptySupport,
          "attack needs at least one supported class");
  require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, ErrorKind::Config,
          "alpha must lie in [0, 1]");

  std::map<int, HeadRow<float>> rows;
  for (const auto& [c, inputs] : support_inputs) {
    require(c >= 0 && c < model_u.num_classes(), ErrorKind::Protocol,
            "support class out of range");
    require(inputs.rows >= 1, ErrorKind::EmptySupport,
            "empty support set for class " + std::to_string(c));
    Matrix<float> emb = model_u.features(inputs);
    std::vector<float> proto = class_prototype(emb);
    HeadRow<float> derived = prototype_head<float>(proto, cfg.metric);
    rows[c] = interpolate_head<float>(derived.weights, derived.bias,
                                      model_u.weight_row(c), model_u.bias(c),
                                      cfg.alpha);
  }
  return replace_head_rows(model_u, rows);
}

std::map<int, Matrix<float>> draw_support(const Dataset& data,
                                          const ForgetSpec& forget, int k,
                                          u64 seed) {
  require(k >= 1, ErrorKind::Config, "k must be positive");
  std::map<int, Matrix<float>> support;
  for (std::size_t ci = 0; ci < forget.forget_classes.size(); ++ci) {
    const int c = forget.forget_classes[ci];
    std::vector<i64> pool;
    for (i64 idx : forget.forget_indices)
      if (data.y_train[idx] == c) pool.push_back(idx);
    require(!pool.empty(), ErrorKind::EmptySupport,
            "no forget samples for class " + std::to_string(c));
    Rng rng(substream(seed, kStreamAttackSupport, static_cast<u64>(ci)));
    rng.shuffle(pool);
    const i64 take = std::min<i64>(k, static_cast<i64>(pool.size()));
    Matrix<float> xs(take, data.input_dim);
    for (i64 i = 0; i < take; ++i)
      std::copy(data.x_train.row(pool[i]),
                data.x_train.row(pool[i]) + data.input_dim, xs.row(i));
    support.emplace(c, std::move(xs));
  }
  return support;
}

AlphaTuneResult tune_alpha(const Classifier<float>& model_u,
                           const std::map<int, Matrix<float>>& support,
                           const Dataset& data, const ForgetSpec& forget,
                           std::span<const double> alpha_grid,
                           const AttackConfig& cfg, double max_drop) {
  require(!alpha_grid.empty(), ErrorKind::Config, "alpha grid is empty");
  for (std::size_t i = 1; i < alpha_grid.size(); ++i)
    require(alpha_grid[i] <= alpha_grid[i - 1], ErrorKind::Config,
            "alpha grid must be sorted descending");
  for (const auto& [c, xs] : support) {
    require(forget.class_is_forgotten(c), ErrorKind::Protocol,
            "support class " + std::to_string(c) + " is not a forget class");
    (void)xs;
  }

  AlphaTuneResult result;
  result.base_acc_r = subset_accuracy(model_u, data.x_train, data.y_train,
                                      forget.retain_indices);
  result.constraint_unsatisfied = true;
  bool chosen = false;
  for (double alpha : alpha_grid) {
    AttackConfig point = cfg;
    point.alpha = alpha;
    Classifier<float> patched = prototypical_attack(model_u, support, point);
    AlphaRecord rec;
    rec.alpha = alpha;
    rec.proto_acc_f = subset_accuracy(patched, data.x_train, data.y_train,
                                      forget.forget_indices);
    rec.acc_r_star = subset_accuracy(patched, data.x_train, data.y_train,
                                     forget.retain_indices);
    rec.feasible = rec.acc_r_star >= result.base_acc_r - max_drop;
    if (rec.feasible && !chosen) {
      result.chosen_alpha = alpha;  // grid is descending: first hit is largest
      result.constraint_unsatisfied = false;
      chosen = true;
    }
    result.records.push_back(rec);
  }
  if (!chosen) result.chosen_alpha = 0.0;
  return result;
}

Classifier<float> finetune_relearn(const Classifier<float>& model_u,
                                   const Matrix<float>& xs,
                                   const std::vector<int>& ys,
                                   const OptimConfig& optim, u64 seed) {
  require(xs.rows > 0, ErrorKind::EmptyData, "relearning needs samples");
  require(static_cast<i64>(ys.size()) == xs.rows, ErrorKind::ShapeMismatch,
          "label count mismatch");

  // Wrap the samples in a throwaway dataset so the shared CE loop applies.
  Dataset tiny;
  tiny.num_classes = model_u.num_classes();
  tiny.input_dim = model_u.input_dim();
  tiny.x_train = xs;
  tiny.y_train = ys;
  ForgetSpec all;
  all.forget_classes.assign(1, ys[0]);
  all.is_forget.assign(ys.size(), 1);
  for (i64 i = 0; i < xs.rows; ++i) all.forget_indices.push_back(i);

  Classifier<float> model = model_u;
  if (optim.epochs > 0) {
    fit_cross_entropy(model, tiny, all, all.forget_indices, optim,
                      substream(seed, kStreamRelearn, 0), nullptr);
  }
  return model;
}

}  // namespace spotter
