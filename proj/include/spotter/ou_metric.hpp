#pragma once

#include <vector>

#include "spotter/divergence.hpp"
#include "spotter/model.hpp"
#include "spotter/perturb.hpp"

namespace spotter {

struct OUReport {
  double value = 0.0;
  i64 n_points = 0;
  DivergenceKind divergence = DivergenceKind::JS;
  PerturbMethod perturb_method = PerturbMethod::PGD;
  double epsilon = 0.0;
  std::vector<double> per_point;
};

// OU@eps: mean over tube points of
//   D( masked_softmax(logits_orig(x_p), C_f) || softmax(logits_unlearned(x_p)) ).
// The teacher side is masked, the student side is not. The Gaussian variant
// is the same computation fed a Gaussian-method tube. Raises on an empty
// tube; batching never affects the value.
OUReport ou_at_eps(const Classifier<float>& model_orig,
                   const Classifier<float>& model_unlearned,
                   const PerturbedSet& tube,
                   std::span<const int> forget_classes, DivergenceKind div,
                   i64 batch_size = 256);

}  // namespace spotter
