#include "spotter/unlearn.hpp"

#include <algorithm>
#include <cmath>

namespace spotter {

const char* to_string(BaseLossKind k) {
  switch (k) {
    case BaseLossKind::Spotter: return "spotter";
    case BaseLossKind::RandomLabel: return "random-label";
    case BaseLossKind::NegGrad: return "neggrad";
    case BaseLossKind::Custom: return "custom";
  }
  return "?";
}

BaseLossKind base_loss_from_string(const std::string& s) {
  if (s == "spotter") return BaseLossKind::Spotter;
  if (s == "random-label") return BaseLossKind::RandomLabel;
  if (s == "neggrad") return BaseLossKind::NegGrad;
  if (s == "custom") return BaseLossKind::Custom;
  raise(ErrorKind::Config, "unknown base loss: " + s);
}

void SpotterConfig::validate() const {
  require(lambda1 >= 0.0 && lambda1 <= 1.0, ErrorKind::Config,
          "lambda1 must lie in [0, 1]");
  require(lambda2 >= 0.0, ErrorKind::Config, "lambda2 must be nonnegative");
  require(optim.lr >= 0.0, ErrorKind::Config, "learning rate must be nonnegative");
  require(optim.epochs >= 0, ErrorKind::Config, "epochs must be nonnegative");
  require(optim.batch >= 1, ErrorKind::Config, "batch size must be positive");
  perturb.validate();
  if (base_loss == BaseLossKind::Custom)
    require(static_cast<bool>(custom_base), ErrorKind::Config,
            "custom base loss selected but no hook provided");
}

namespace {

// Round-robin interleave of per-class shuffled index lists, so every batch
// carries samples from each forget class when the batch is large enough.
std::vector<i64> stratified_epoch_order(const Dataset& data,
                                        const ForgetSpec& forget, u64 seed,
                                        int epoch) {
  std::vector<std::vector<i64>> per_class(forget.forget_classes.size());
  for (i64 idx : forget.forget_indices) {
    const int label = data.y_train[idx];
    const auto it = std::lower_bound(forget.forget_classes.begin(),
                                     forget.forget_classes.end(), label);
    per_class[static_cast<std::size_t>(
        it - forget.forget_classes.begin())].push_back(idx);
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    Rng rng(substream(seed, kStreamShuffle,
                      static_cast<u64>(epoch) * 1000003ull + c));
    rng.shuffle(per_class[c]);
  }
  std::vector<i64> order;
  order.reserve(forget.forget_indices.size());
  for (std::size_t at = 0; !per_class.empty(); ++at) {
    bool any = false;
    for (auto& list : per_class) {
      if (at < list.size()) {
        order.push_back(list[at]);
        any = true;
      }
    }
    if (!any) break;
  }
  return order;
}

Matrix<float> perturbed_training_batch(const Classifier<float>& teacher,
                                       const Matrix<float>& x,
                                       const std::vector<int>& y,
                                       const PerturbConfig& cfg, u64 seed,
                                       int epoch, i64 batch_start,
                                       bool* all_filtered) {
  const i64 n = x.rows;
  std::vector<std::vector<float>> points(n);
  std::vector<char> keep(n, 1);
  par::parallel_for(n, [&](i64 i) {
    std::span<const float> xi{x.row(i), static_cast<std::size_t>(x.cols)};
    std::vector<float> xp;
    if (cfg.method == PerturbMethod::PGD) {
      xp = pgd_perturb(teacher, xi, y[i], cfg);
    } else {
      Rng rng(substream(seed, kStreamTrainPerturb,
                        static_cast<u64>(epoch) * 0x10000000ull +
                            static_cast<u64>(batch_start + i)));
      xp = gaussian_perturb(xi, cfg, rng);
    }
    if (std::isfinite(cfg.boundary_buffer)) {
      std::vector<float> z = teacher.logits_one(xp);
      if (std::abs(logit_margin<float>(z, y[i])) >
          static_cast<float>(cfg.boundary_buffer))
        keep[i] = 0;
    }
    points[i] = std::move(xp);
  });
  i64 kept = 0;
  for (i64 i = 0; i < n; ++i) kept += keep[i];
  *all_filtered = kept == 0;
  Matrix<float> out(kept, x.cols);
  i64 at = 0;
  for (i64 i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    std::copy(points[i].begin(), points[i].end(), out.row(at++));
  }
  return out;
}

}  // namespace

UnlearnRun run_unlearning(const Classifier<float>& teacher,
                          const Dataset& data, const ForgetSpec& forget,
                          const SpotterConfig& cfg) {
  cfg.validate();
  require(!forget.forget_indices.empty(), ErrorKind::Config,
          "forget set is empty");

  UnlearnRun run{.model_unlearned = teacher,
                 .trajectory = {},
                 .accounting = {},
                 .teacher_checksum_before = teacher.params_checksum(),
                 .teacher_checksum_after = 0,
                 .train_perturb_stream = kStreamTrainPerturb,
                 .over_batches_skipped = 0};
  Classifier<float>& student = run.model_unlearned;

  BaseLossFn<float> base;
  switch (cfg.base_loss) {
    case BaseLossKind::Spotter:
      base = masked_distill_base<float>(cfg.loss_divergence);
      break;
    case BaseLossKind::RandomLabel:
    // labels substituted per epoch below; the loss itself is plain CE
      base = cross_entropy_base<float>(1.0);
      break;
    case BaseLossKind::NegGrad:
      base = cross_entropy_base<float>(-1.0);
      break;
    case BaseLossKind::Custom:
      base = cfg.custom_base;
      break;
  }

  const double w_over = 1.0 - cfg.lambda1;
  const i64 nparams = student.param_count();
  AdamOptimizer<float> adam(nparams, cfg.optim.lr);
  SgdOptimizer<float> sgd(cfg.optim.lr);
  std::vector<float> grad(nparams);

  std::span<const int> cf{forget.forget_classes.data(),
                          forget.forget_classes.size()};
  std::vector<int> label_map;  // per-epoch random labels, by train index

  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    std::vector<i64> order = stratified_epoch_order(data, forget, cfg.seed, epoch);
    if (cfg.base_loss == BaseLossKind::RandomLabel) {
      Rng rng(substream(cfg.seed, kStreamRandomLabel, static_cast<u64>(epoch)));
      std::vector<int> sampled = sample_retain_labels(
          data.num_classes, cf, static_cast<i64>(forget.forget_indices.size()),
          rng);
      label_map.assign(data.y_train.size(), -1);
      for (std::size_t i = 0; i < forget.forget_indices.size(); ++i)
        label_map[forget.forget_indices[i]] = sampled[i];
    }

    EpochSnapshot snap;
    snap.epoch = epoch;
    i64 batches = 0;
    for (i64 start = 0; start < static_cast<i64>(order.size());
         start += cfg.optim.batch) {
      const i64 count =
          std::min<i64>(cfg.optim.batch, static_cast<i64>(order.size()) - start);
      Matrix<float> x;
      std::vector<int> y;
      gather_train_batch(data, forget,
                         {order.data() + start, static_cast<std::size_t>(count)},
                         x, y, &run.accounting);

      Matrix<float> xp;
      if (w_over != 0.0) {
        bool all_filtered = false;
        xp = perturbed_training_batch(teacher, x, y, cfg.perturb, cfg.seed,
                                      epoch, start, &all_filtered);
        if (all_filtered) ++run.over_batches_skipped;
      }

      std::vector<int> y_base = y;
      if (cfg.base_loss == BaseLossKind::RandomLabel) {
        for (i64 i = 0; i < count; ++i) y_base[i] = label_map[order[start + i]];
      }

      std::fill(grad.begin(), grad.end(), 0.0f);
      ObjectiveValue v = objective_with_grad<float>(
          teacher, student, x, y_base, xp, cf, cfg.loss_divergence, base,
          cfg.lambda1, w_over, cfg.lambda2, grad);
      require(std::isfinite(v.total), ErrorKind::NonFiniteLoss,
              "non-finite loss at epoch " + std::to_string(epoch) +
                  ", batch offset " + std::to_string(start));

      if (cfg.optim.kind == OptimizerKind::Adam)
        adam.step(student.params(), grad);
      else
        sgd.step(student.params(), grad);

      snap.mean_total += v.total;
      snap.mean_base += v.base;
      snap.mean_over += v.over;
      snap.mean_sim += v.sim;
      ++batches;
    }
    if (batches > 0) {
      snap.mean_total /= static_cast<double>(batches);
      snap.mean_base /= static_cast<double>(batches);
      snap.mean_over /= static_cast<double>(batches);
      snap.mean_sim /= static_cast<double>(batches);
    }
    snap.forget_train_acc = subset_accuracy(student, data.x_train, data.y_train,
                                            forget.forget_indices);
    run.accounting.forget_train_reads +=
        static_cast<i64>(forget.forget_indices.size());
    run.trajectory.push_back(snap);
  }

  run.teacher_checksum_after = teacher.params_checksum();
  return run;
}

std::vector<double> fit_cross_entropy(Classifier<float>& model,
                                      const Dataset& data,
                                      const ForgetSpec& forget,
                                      std::span<const i64> indices,
                                      const OptimConfig& optim, u64 seed,
                                      DataAccounting* acct) {
  require(!indices.empty(), ErrorKind::EmptyData, "no training rows given");
  const i64 nparams = model.param_count();
  AdamOptimizer<float> adam(nparams, optim.lr);
  SgdOptimizer<float> sgd(optim.lr);
  std::vector<float> grad(nparams);
  std::vector<i64> order(indices.begin(), indices.end());
  std::vector<double> epoch_losses;

  for (int epoch = 0; epoch < optim.epochs; ++epoch) {
    Rng rng(substream(seed, kStreamShuffle, static_cast<u64>(epoch)));
    rng.shuffle(order);
    double total = 0.0;
    i64 batches = 0;
    for (i64 start = 0; start < static_cast<i64>(order.size());
         start += optim.batch) {
      const i64 count =
          std::min<i64>(optim.batch, static_cast<i64>(order.size()) - start);
      Matrix<float> x;
      std::vector<int> y;
      gather_train_batch(data, forget,
                         {order.data() + start, static_cast<std::size_t>(count)},
                         x, y, acct);
      ForwardPass<float> fp = model.forward(x, true);
      Matrix<float> glogits(count, model.num_classes());
      double loss = cross_entropy<float>(fp.logits, y, 1.0, &glogits);
      require(std::isfinite(loss), ErrorKind::NonFiniteLoss,
              "non-finite training loss at epoch " + std::to_string(epoch));
      std::fill(grad.begin(), grad.end(), 0.0f);
      model.backward(x.data.data(), count, fp, glogits, nullptr, grad);
      if (optim.kind == OptimizerKind::Adam)
        adam.step(model.params(), grad);
      else
        sgd.step(model.params(), grad);
      total += loss;
      ++batches;
    }
    epoch_losses.push_back(batches > 0 ? total / static_cast<double>(batches)
                                       : 0.0);
  }
  return epoch_losses;
}

Classifier<float> retrain_gold(const Dataset& data, const ForgetSpec& forget,
                               std::shared_ptr<const FeatureArch<float>> arch,
                               const OptimConfig& optim, u64 seed,
                               DataAccounting* acct) {
  require(!forget.retain_indices.empty(), ErrorKind::Config,
          "retained split is empty");
  Classifier<float> model(std::move(arch), data.num_classes);
  Rng init_rng(substream(seed, kStreamInit, 0));
  model.init(init_rng);
  fit_cross_entropy(model, data, forget, forget.retain_indices, optim, seed,
                    acct);
  return model;
}

}  // namespace spotter
