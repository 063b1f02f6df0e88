#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spotter/data.hpp"
#include "spotter/losses.hpp"
#include "spotter/model.hpp"
#include "spotter/optimizer.hpp"
#include "spotter/perturb.hpp"

namespace spotter {

struct OptimConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  int epochs = 10;
  i64 batch = 64;
};

enum class BaseLossKind { Spotter, RandomLabel, NegGrad, Custom };

const char* to_string(BaseLossKind k);
BaseLossKind base_loss_from_string(const std::string& s);

struct SpotterConfig {
  double lambda1 = 0.7;
  double lambda2 = 1.0;
  DivergenceKind loss_divergence = DivergenceKind::KL;
  PerturbConfig perturb;  // training-time tube settings
  BaseLossKind base_loss = BaseLossKind::Spotter;
  BaseLossFn<float> custom_base;  // used when base_loss == Custom
  OptimConfig optim;
  u64 seed = 0;

  void validate() const;
};

struct EpochSnapshot {
  int epoch = 0;
  double mean_total = 0.0;
  double mean_base = 0.0;
  double mean_over = 0.0;
  double mean_sim = 0.0;
  double forget_train_acc = 0.0;
};

struct UnlearnRun {
  Classifier<float> model_unlearned;
  std::vector<EpochSnapshot> trajectory;
  DataAccounting accounting;
  u64 teacher_checksum_before = 0;
  u64 teacher_checksum_after = 0;
  u64 train_perturb_stream = kStreamTrainPerturb;
  i64 over_batches_skipped = 0;
};

// Runs the unlearning loop: the student starts as a copy of the teacher and
// iterates over forget-set batches only (never retained data). The
// over-unlearning perturbation stream is regenerated every epoch against the
// frozen teacher. Aborts on a non-finite loss.
UnlearnRun run_unlearning(const Classifier<float>& teacher,
                          const Dataset& data, const ForgetSpec& forget,
                          const SpotterConfig& cfg);

// Cross-entropy training over the given train indices; shared by original
// training, retraining, and relearning. Accounting (when provided) counts
// every row read by forget membership.
std::vector<double> fit_cross_entropy(Classifier<float>& model,
                                      const Dataset& data,
                                      const ForgetSpec& forget,
                                      std::span<const i64> indices,
                                      const OptimConfig& optim, u64 seed,
                                      DataAccounting* acct);

// Gold standard: trains a fresh model on the retained split only. The
// accounting proves the forget set was never touched.
Classifier<float> retrain_gold(const Dataset& data, const ForgetSpec& forget,
                               std::shared_ptr<const FeatureArch<float>> arch,
                               const OptimConfig& optim, u64 seed,
                               DataAccounting* acct = nullptr);

}  // namespace spotter
