#include "spotter/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spotter/parallel.hpp"

namespace spotter {

ForgetSpec forget_by_classes(const Dataset& data, std::vector<int> classes) {
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  require(!classes.empty(), ErrorKind::Config, "forget-class set is empty");
  require(static_cast<int>(classes.size()) < data.num_classes,
          ErrorKind::Config, "cannot forget every class");
  for (int c : classes)
    require(c >= 0 && c < data.num_classes, ErrorKind::Config,
            "forget class out of range");

  ForgetSpec spec;
  spec.forget_classes = std::move(classes);
  const i64 n = static_cast<i64>(data.y_train.size());
  spec.is_forget.assign(n, 0);
  for (i64 i = 0; i < n; ++i) {
    if (spec.class_is_forgotten(data.y_train[i])) {
      spec.is_forget[i] = 1;
      spec.forget_indices.push_back(i);
    } else {
      spec.retain_indices.push_back(i);
    }
  }
  require(!spec.forget_indices.empty(), ErrorKind::Config,
          "forget set is empty for the chosen classes");
  return spec;
}

void gather_train_batch(const Dataset& data, const ForgetSpec& forget,
                        std::span<const i64> indices, Matrix<float>& x,
                        std::vector<int>& y, DataAccounting* acct) {
  const i64 n = static_cast<i64>(indices.size());
  x = Matrix<float>(n, data.input_dim);
  y.resize(n);
  for (i64 i = 0; i < n; ++i) {
    const i64 src = indices[i];
    std::copy(data.x_train.row(src), data.x_train.row(src) + data.input_dim,
              x.row(i));
    y[i] = data.y_train[src];
    if (acct != nullptr) {
      if (forget.is_forget[src])
        ++acct->forget_train_reads;
      else
        ++acct->retain_train_reads;
    }
  }
}

double subset_accuracy(const Classifier<float>& model, const Matrix<float>& xs,
                       const std::vector<int>& ys,
                       std::span<const i64> indices) {
  if (indices.empty()) return 0.0;
  const i64 n = static_cast<i64>(indices.size());
  Matrix<float> x(n, xs.cols);
  par::parallel_for(n, [&](i64 i) {
    std::copy(xs.row(indices[i]), xs.row(indices[i]) + xs.cols, x.row(i));
  });
  ForwardPass<float> fp = model.forward(x);
  std::vector<char> correct(n, 0);
  par::parallel_for(n, [&](i64 i) {
    correct[i] =
        argmax_lowest(fp.logits.row_span(i)) == ys[indices[i]] ? 1 : 0;
  });
  i64 hits = 0;
  for (i64 i = 0; i < n; ++i) hits += correct[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

// Gram-Schmidt over seeded Gaussian draws; falls back to unnormalized random
// directions when there are more classes than dimensions.
std::vector<std::vector<double>> class_directions(int classes, int dim,
                                                  Rng& rng) {
  std::vector<std::vector<double>> dirs;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> v(dim);
    for (int d = 0; d < dim; ++d) v[d] = rng.normal();
    if (c < dim) {
      for (const auto& u : dirs) {
        double dot = 0;
        for (int d = 0; d < dim; ++d) dot += v[d] * u[d];
        for (int d = 0; d < dim; ++d) v[d] -= dot * u[d];
      }
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    require(norm > 1e-9, ErrorKind::Config, "degenerate class direction");
    for (double& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace

Dataset make_blobs(const BlobsSpec& spec, u64 seed) {
  require(spec.classes >= 2, ErrorKind::Config, "need at least two classes");
  require(spec.train_per_class >= 2 && spec.test_per_class >= 2,
          ErrorKind::Config, "need at least two samples per class per split");
  require(spec.dim >= 1, ErrorKind::Config, "dimension must be positive");
  require(spec.separation >= 0.0, ErrorKind::Config,
          "separation must be nonnegative");

  Dataset data;
  data.num_classes = spec.classes;
  data.input_dim = spec.dim;

  Rng dir_rng(substream(seed, kStreamDataset, 0));
  auto dirs = class_directions(spec.classes, spec.dim, dir_rng);

  auto fill = [&](Matrix<float>& x, std::vector<int>& y, int per_class,
                  u64 split_tag) {
    x = Matrix<float>(static_cast<i64>(spec.classes) * per_class, spec.dim);
    y.resize(x.rows);
    i64 at = 0;
    for (int c = 0; c < spec.classes; ++c) {
      Rng rng(substream(seed, kStreamDataset,
                        split_tag * 1000003ull + static_cast<u64>(c) + 1));
      for (int i = 0; i < per_class; ++i, ++at) {
        float* row = x.row(at);
        for (int d = 0; d < spec.dim; ++d) {
          row[d] = static_cast<float>(spec.separation * dirs[c][d] +
                                      rng.normal());
        }
        y[at] = c;
      }
    }
  };
  fill(data.x_train, data.y_train, spec.train_per_class, 1);
  fill(data.x_test, data.y_test, spec.test_per_class, 2);
  return data;
}

Dataset make_pattern_images(const ImagesSpec& spec, u64 seed) {
  require(spec.classes >= 2, ErrorKind::Config, "need at least two classes");
  require(spec.train_per_class >= 2 && spec.test_per_class >= 2,
          ErrorKind::Config, "need at least two samples per class per split");
  require(spec.size >= 4 && spec.size % 4 == 0, ErrorKind::Config,
          "image size must be a positive multiple of 4");

  Dataset data;
  data.num_classes = spec.classes;
  data.image_channels = 1;
  data.image_size = spec.size;
  data.input_dim = spec.size * spec.size;
  data.bound_lo = 0.0f;
  data.bound_hi = 1.0f;

  auto fill = [&](Matrix<float>& x, std::vector<int>& y, int per_class,
                  u64 split_tag) {
    x = Matrix<float>(static_cast<i64>(spec.classes) * per_class,
                      data.input_dim);
    y.resize(x.rows);
    i64 at = 0;
    for (int c = 0; c < spec.classes; ++c) {
      // class-specific grating: orientation from class id, one of three
      // spatial frequencies
      const double angle = std::numbers::pi * c / spec.classes;
      const double freq =
          2.0 * std::numbers::pi * (1.0 + c % 3) / spec.size;
      const double kx = freq * std::cos(angle);
      const double ky = freq * std::sin(angle);
      Rng rng(substream(seed, kStreamDataset,
                        split_tag * 2000003ull + static_cast<u64>(c) + 1));
      for (int i = 0; i < per_class; ++i, ++at) {
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        float* row = x.row(at);
        for (int r = 0; r < spec.size; ++r) {
          for (int q = 0; q < spec.size; ++q) {
            double v = 0.5 + 0.4 * std::sin(kx * q + ky * r + phase) +
                       spec.noise * rng.normal();
            row[r * spec.size + q] =
                static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
        y[at] = c;
      }
    }
  };
  fill(data.x_train, data.y_train, spec.train_per_class, 1);
  fill(data.x_test, data.y_test, spec.test_per_class, 2);
  return data;
}

}  // namespace spotter
