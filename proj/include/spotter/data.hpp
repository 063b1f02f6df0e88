#pragma once

#include <limits>
#include <string>
#include <vector>

#include "spotter/common.hpp"
#include "spotter/model.hpp"
#include "spotter/rng.hpp"

namespace spotter {

// Labeled train/test splits, flattened row-major. image_shape is {C, H, W}
// for image-like data and all zeros for plain vectors. bound_lo/hi are the
// valid input range for perturbation clamping (infinite when unbounded).
struct Dataset {
  int num_classes = 0;
  int input_dim = 0;
  int image_channels = 0;
  int image_size = 0;
  Matrix<float> x_train, x_test;
  std::vector<int> y_train, y_test;
  float bound_lo = -std::numeric_limits<float>::infinity();
  float bound_hi = std::numeric_limits<float>::infinity();
  bool bounded() const { return std::isfinite(bound_lo) && std::isfinite(bound_hi); }
};

// Forget-class set plus the train indices forming D_f. Construction
// guarantees every forget index carries a forget-class label.
struct ForgetSpec {
  std::vector<int> forget_classes;   // sorted, unique
  std::vector<i64> forget_indices;   // sorted train indices
  std::vector<i64> retain_indices;   // complement, sorted
  std::vector<char> is_forget;       // per train index

  bool class_is_forgotten(int c) const {
    return std::binary_search(forget_classes.begin(), forget_classes.end(), c);
  }
};

ForgetSpec forget_by_classes(const Dataset& data, std::vector<int> classes);

// Read counters, scoped to one phase of a run (unlearning loops must show
// zero retain reads; retraining must show zero forget reads).
struct DataAccounting {
  i64 forget_train_reads = 0;
  i64 retain_train_reads = 0;
};

// Copies the given train rows into x/y, counting reads by forget membership.
void gather_train_batch(const Dataset& data, const ForgetSpec& forget,
                        std::span<const i64> indices, Matrix<float>& x,
                        std::vector<int>& y, DataAccounting* acct);

// Top-1 accuracy (percent) of the model over the given rows; ties break to
// the lowest class index.
double subset_accuracy(const Classifier<float>& model, const Matrix<float>& xs,
                       const std::vector<int>& ys,
                       std::span<const i64> indices);

struct BlobsSpec {
  int classes = 5;
  int train_per_class = 500;
  int test_per_class = 200;
  int dim = 20;
  double separation = 6.0;
};

struct ImagesSpec {
  int classes = 10;
  int train_per_class = 200;
  int test_per_class = 50;
  int size = 12;
  double noise = 0.05;
};

// Gaussian blobs with near-orthogonal class means (unit within-class
// variance), deterministic per seed. Unbounded inputs.
Dataset make_blobs(const BlobsSpec& spec, u64 seed);

// Procedural grayscale gratings: per-class orientation/frequency, random
// phase per sample, additive noise, clamped to [0, 1].
Dataset make_pattern_images(const ImagesSpec& spec, u64 seed);

}  // namespace spotter
