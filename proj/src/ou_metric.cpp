#include "spotter/ou_metric.hpp"

#include <algorithm>

#include "spotter/parallel.hpp"

namespace spotter {

OUReport ou_at_eps(const Classifier<float>& model_orig,
                   const Classifier<float>& model_unlearned,
                   const PerturbedSet& tube,
                   std::span<const int> forget_classes, DivergenceKind div,
                   i64 batch_size) {
  require(!tube.items.empty(), ErrorKind::EmptyTube,
          "perturbed set is empty; OU@eps is undefined");
  require(model_orig.num_classes() == model_unlearned.num_classes(),
          ErrorKind::ShapeMismatch, "models disagree on class count");
  require(model_orig.input_dim() == model_unlearned.input_dim(),
          ErrorKind::ShapeMismatch, "models disagree on input shape");
  require(batch_size >= 1, ErrorKind::Config, "batch size must be positive");

  const i64 n = static_cast<i64>(tube.items.size());
  const int d = model_orig.input_dim();
  OUReport report;
  report.n_points = n;
  report.divergence = div;
  report.perturb_method = tube.config.method;
  report.epsilon = tube.config.epsilon;
  report.per_point.resize(n);

  for (i64 start = 0; start < n; start += batch_size) {
    const i64 count = std::min(batch_size, n - start);
    Matrix<float> x(count, d);
    for (i64 i = 0; i < count; ++i) {
      const auto& xp = tube.items[start + i].x_p;
      require(static_cast<int>(xp.size()) == d, ErrorKind::ShapeMismatch,
              "tube point dimension mismatch");
      std::copy(xp.begin(), xp.end(), x.row(i));
    }
    ForwardPass<float> fo = model_orig.forward(x);
    ForwardPass<float> fu = model_unlearned.forward(x);
    par::parallel_for(count, [&](i64 i) {
      // divergences evaluated in double regardless of model precision
      std::vector<double> zo(fo.logits.row(i), fo.logits.row(i) + fo.logits.cols);
      std::vector<double> zu(fu.logits.row(i), fu.logits.row(i) + fu.logits.cols);
      std::vector<double> p = masked_softmax<double>(zo, forget_classes);
      std::vector<double> q = softmax<double>(zu);
      report.per_point[start + i] = divergence<double>(div, p, q);
    });
  }

  double acc = 0.0;
  for (double v : report.per_point) acc += v;
  report.value = acc / static_cast<double>(n);
  return report;
}

}  // namespace spotter
