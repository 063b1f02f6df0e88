#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "spotter/divergence.hpp"
#include "spotter/model.hpp"
#include "spotter/parallel.hpp"
#include "spotter/rng.hpp"

namespace spotter {

// ---- building blocks ------------------------------------------------------

// Mean over rows of D( masked_softmax(teacher_z, C_f) || softmax(student_z) ).
// Fills d(mean)/d(student logits) when glogits is non-null. This is the
// functional form shared by the unlearning loss, the over-unlearning loss
// and the OU metric integrand.
template <typename T>
double masked_distill(const Matrix<T>& teacher_logits,
                      const Matrix<T>& student_logits,
                      std::span<const int> forget_classes, DivergenceKind div,
                      Matrix<T>* glogits = nullptr) {
  require(teacher_logits.rows == student_logits.rows &&
              teacher_logits.cols == student_logits.cols,
          ErrorKind::ShapeMismatch, "teacher/student logits differ in shape");
  const i64 n = teacher_logits.rows;
  if (n == 0) return 0.0;
  std::vector<double> values(n);
  const T scale = static_cast<T>(1.0 / static_cast<double>(n));
  par::parallel_for(n, [&](i64 i) {
    std::vector<T> p =
        masked_softmax<T>(teacher_logits.row_span(i), forget_classes);
    std::vector<T> q = softmax<T>(student_logits.row_span(i));
    values[i] = static_cast<double>(divergence<T>(div, p, q));
    if (glogits != nullptr) {
      divergence_grad_logits<T>(div, p, q, glogits->row_span(i));
      for (auto& g : glogits->row_span(i)) g *= scale;
    }
  });
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(n);
}

// Mean cross-entropy (natural log) against integer labels, scaled by `sign`
// (+1 for descent losses, -1 for gradient-ascent style losses).
template <typename T>
double cross_entropy(const Matrix<T>& logits, const std::vector<int>& labels,
                     double sign = 1.0, Matrix<T>* glogits = nullptr) {
  const i64 n = logits.rows;
  require(static_cast<i64>(labels.size()) == n, ErrorKind::ShapeMismatch,
          "label count mismatch");
  if (n == 0) return 0.0;
  std::vector<double> values(n);
  const T scale = static_cast<T>(sign / static_cast<double>(n));
  par::parallel_for(n, [&](i64 i) {
    std::vector<T> q = softmax<T>(logits.row_span(i));
    const int y = labels[i];
    double qy = std::max(static_cast<double>(q[y]), kProbFloor);
    values[i] = -std::log(qy);
    if (glogits != nullptr) {
      for (i64 k = 0; k < logits.cols; ++k)
        glogits->at(i, k) = (q[k] - (k == y ? T(1) : T(0))) * scale;
    }
  });
  double acc = 0.0;
  for (double v : values) acc += v;
  return sign * acc / static_cast<double>(n);
}

// Mean pairwise cosine similarity of within-class embeddings, averaged over
// the forget classes present. Classes with fewer than two usable (nonzero
// norm) embeddings are skipped and counted in *skipped_classes. Adds
// d(value)/d(embeddings) into gemb when non-null.
template <typename T>
double dispersion_from_embeddings(const Matrix<T>& emb,
                                  const std::vector<int>& labels,
                                  std::span<const int> forget_classes,
                                  Matrix<T>* gemb = nullptr,
                                  i64* skipped_classes = nullptr) {
  const i64 n = emb.rows;
  const i64 d = emb.cols;
  require(static_cast<i64>(labels.size()) == n, ErrorKind::ShapeMismatch,
          "label count mismatch");
  std::vector<double> norms(n);
  par::parallel_for(n, [&](i64 i) {
    double s = 0.0;
    const T* e = emb.row(i);
    for (i64 k = 0; k < d; ++k) s += static_cast<double>(e[k]) * e[k];
    norms[i] = std::sqrt(s);
  });

  std::vector<std::vector<i64>> groups;
  i64 skipped = 0;
  for (int c : forget_classes) {
    std::vector<i64> idx;
    for (i64 i = 0; i < n; ++i)
      if (labels[i] == c && norms[i] > 0.0) idx.push_back(i);
    bool present = false;
    for (i64 i = 0; i < n; ++i)
      if (labels[i] == c) present = true;
    if (!present) continue;  // class absent from batch entirely
    if (idx.size() < 2) {
      ++skipped;
      continue;
    }
    groups.push_back(std::move(idx));
  }
  if (skipped_classes != nullptr) *skipped_classes = skipped;
  if (groups.empty()) return 0.0;

  const double outer = 1.0 / static_cast<double>(groups.size());
  double total = 0.0;
  for (const auto& idx : groups) {
    const i64 m = static_cast<i64>(idx.size());
    const double pair_norm = 1.0 / static_cast<double>(m * (m - 1));
    std::vector<double> rowsum(m);
    par::parallel_for(m, [&](i64 a) {
      const i64 i = idx[a];
      const T* ei = emb.row(i);
      double acc = 0.0;
      for (i64 b = 0; b < m; ++b) {
        if (b == a) continue;
        const i64 j = idx[b];
        const T* ej = emb.row(j);
        double dot = 0.0;
        for (i64 k = 0; k < d; ++k)
          dot += static_cast<double>(ei[k]) * ej[k];
        const double cos = dot / (norms[i] * norms[j]);
        acc += cos;
        if (gemb != nullptr) {
          // d cos(e_i, e_j) / d e_i = e_j/(|e_i||e_j|) - cos * e_i/|e_i|^2;
          // ordered pairs (i,j) and (j,i) both contribute, hence factor 2.
          const double w = 2.0 * pair_norm * outer;
          T* g = gemb->row(i);
          const double inv_ij = 1.0 / (norms[i] * norms[j]);
          const double inv_ii = cos / (norms[i] * norms[i]);
          for (i64 k = 0; k < d; ++k)
            g[k] += static_cast<T>(w * (ej[k] * inv_ij - ei[k] * inv_ii));
        }
      }
      rowsum[a] = acc;
    });
    double class_sum = 0.0;
    for (double v : rowsum) class_sum += v;
    total += class_sum * pair_norm;
  }
  return total * outer;
}

// ---- named losses ---------------------------------------------------------

// L_unlearn: masked distillation of the teacher onto the student over a
// forget-set batch. Every label must belong to a forget class.
template <typename T>
double unlearn_loss(const Classifier<T>& teacher, const Classifier<T>& student,
                    const Matrix<T>& x, const std::vector<int>& y,
                    std::span<const int> forget_classes, DivergenceKind div) {
  for (int label : y)
    require(std::binary_search(forget_classes.begin(), forget_classes.end(),
                               label),
            ErrorKind::Protocol, "forget batch contains a non-forget label");
  ForwardPass<T> ft = teacher.forward(x);
  ForwardPass<T> fs = student.forward(x);
  return masked_distill<T>(ft.logits, fs.logits, forget_classes, div);
}

// L_over: identical functional form evaluated on perturbed inputs. An empty
// perturbed batch contributes zero and sets *skipped.
template <typename T>
double over_loss(const Classifier<T>& teacher, const Classifier<T>& student,
                 const Matrix<T>& x_perturbed,
                 std::span<const int> forget_classes, DivergenceKind div,
                 bool* skipped = nullptr) {
  if (skipped != nullptr) *skipped = x_perturbed.rows == 0;
  if (x_perturbed.rows == 0) return 0.0;
  ForwardPass<T> ft = teacher.forward(x_perturbed);
  ForwardPass<T> fs = student.forward(x_perturbed);
  return masked_distill<T>(ft.logits, fs.logits, forget_classes, div);
}

// L_sim over a forget batch, computed from the student's embeddings.
template <typename T>
double dispersion_loss(const Classifier<T>& student, const Matrix<T>& x,
                       const std::vector<int>& y,
                       std::span<const int> forget_classes,
                       i64* skipped_classes = nullptr) {
  Matrix<T> emb = student.features(x);
  return dispersion_from_embeddings<T>(emb, y, forget_classes, nullptr,
                                       skipped_classes);
}

// lambda1 * base + (1 - lambda1) * over + lambda2 * sim, exactly as written.
inline double combine_objective(double l_base, double l_over, double l_sim,
                                double lambda1, double lambda2) {
  require(lambda1 >= 0.0 && lambda1 <= 1.0, ErrorKind::Config,
          "lambda1 must lie in [0, 1]");
  require(lambda2 >= 0.0, ErrorKind::Config, "lambda2 must be nonnegative");
  return lambda1 * l_base + (1.0 - lambda1) * l_over + lambda2 * l_sim;
}

// Uniform labels over the retain classes, resampled by the caller per epoch.
inline std::vector<int> sample_retain_labels(
    int num_classes, std::span<const int> forget_classes, i64 n, Rng& rng) {
  std::vector<int> retain;
  for (int c = 0; c < num_classes; ++c)
    if (!std::binary_search(forget_classes.begin(), forget_classes.end(), c))
      retain.push_back(c);
  require(!retain.empty(), ErrorKind::Config, "no retain class exists");
  std::vector<int> labels(n);
  for (i64 i = 0; i < n; ++i) labels[i] = retain[rng.index(retain.size())];
  return labels;
}

// Random Label baseline: cross-entropy against labels drawn uniformly from
// the retain classes.
template <typename T>
double random_label_loss(const Classifier<T>& student, const Matrix<T>& x,
                         std::span<const int> forget_classes, Rng& rng) {
  std::vector<int> labels =
      sample_retain_labels(student.num_classes(), forget_classes, x.rows, rng);
  ForwardPass<T> fs = student.forward(x);
  return cross_entropy<T>(fs.logits, labels);
}

// NegGrad baseline: negated cross-entropy on the true labels.
template <typename T>
double neggrad_loss(const Classifier<T>& student, const Matrix<T>& x,
                    const std::vector<int>& y) {
  ForwardPass<T> fs = student.forward(x);
  return cross_entropy<T>(fs.logits, y, -1.0);
}

// ---- combined objective with gradients -------------------------------------

// The lambda1 slot of the objective is pluggable: any base loss that can
// produce a value and d(value)/d(student logits) for a forget batch drops in
// here. `student_logits` is the student's forward output on the batch.
template <typename T>
using BaseLossFn = std::function<double(
    const Classifier<T>& teacher, const Classifier<T>& student,
    const Matrix<T>& x, const std::vector<int>& y,
    std::span<const int> forget_classes, const Matrix<T>& student_logits,
    Matrix<T>* glogits)>;

template <typename T>
BaseLossFn<T> masked_distill_base(DivergenceKind div) {
  return [div](const Classifier<T>& teacher, const Classifier<T>&,
               const Matrix<T>& x, const std::vector<int>&,
               std::span<const int> forget_classes,
               const Matrix<T>& student_logits, Matrix<T>* glogits) {
    ForwardPass<T> ft = teacher.forward(x);
    return masked_distill<T>(ft.logits, student_logits, forget_classes, div,
                             glogits);
  };
}

template <typename T>
BaseLossFn<T> cross_entropy_base(double sign) {
  return [sign](const Classifier<T>&, const Classifier<T>&, const Matrix<T>&,
                const std::vector<int>& y, std::span<const int>,
                const Matrix<T>& student_logits, Matrix<T>* glogits) {
    return cross_entropy<T>(student_logits, y, sign, glogits);
  };
}

struct ObjectiveValue {
  double total = 0.0;
  double base = 0.0;
  double over = 0.0;
  double sim = 0.0;
  bool over_skipped = false;
  i64 sim_skipped_classes = 0;
};

// Evaluates w_base * base + w_over * over + w_sim * sim and, when gtheta is
// nonempty, accumulates the gradient with respect to the student parameters.
// The teacher is only ever read. Weights are taken raw so callers can probe
// individual terms; the lambda parametrization sits on top.
template <typename T>
ObjectiveValue objective_with_grad(
    const Classifier<T>& teacher, const Classifier<T>& student,
    const Matrix<T>& x_f, const std::vector<int>& y_f, const Matrix<T>& x_p,
    std::span<const int> forget_classes, DivergenceKind div,
    const BaseLossFn<T>& base_loss, double w_base, double w_over, double w_sim,
    std::span<T> gtheta) {
  const bool want_grad = !gtheta.empty();
  ObjectiveValue out;

  // forget batch: base term + dispersion share one forward pass
  if (x_f.rows > 0) {
    ForwardPass<T> fs = student.forward(x_f, want_grad);
    Matrix<T> glogits;
    if (want_grad) glogits = Matrix<T>(x_f.rows, student.num_classes());
    out.base = base_loss(teacher, student, x_f, y_f, forget_classes, fs.logits,
                         want_grad ? &glogits : nullptr);
    Matrix<T> gemb;
    if (want_grad && w_sim != 0.0) gemb = Matrix<T>(x_f.rows, student.embed_dim());
    out.sim = dispersion_from_embeddings<T>(
        fs.emb, y_f, forget_classes,
        want_grad && w_sim != 0.0 ? &gemb : nullptr, &out.sim_skipped_classes);
    if (want_grad) {
      const T wb = static_cast<T>(w_base);
      par::parallel_for(glogits.rows * glogits.cols,
                        [&](i64 i) { glogits.data[i] *= wb; });
      if (w_sim != 0.0) {
        const T ws = static_cast<T>(w_sim);
        par::parallel_for(gemb.rows * gemb.cols,
                          [&](i64 i) { gemb.data[i] *= ws; });
      }
      if (w_base != 0.0 || w_sim != 0.0) {
        student.backward(x_f.data.data(), x_f.rows, fs, glogits,
                         (w_sim != 0.0) ? &gemb : nullptr, gtheta);
      }
    }
  }

  // perturbed batch: over term
  out.over_skipped = x_p.rows == 0;
  if (x_p.rows > 0) {
    ForwardPass<T> fs = student.forward(x_p, want_grad);
    ForwardPass<T> ft = teacher.forward(x_p);
    Matrix<T> glogits;
    if (want_grad) glogits = Matrix<T>(x_p.rows, student.num_classes());
    out.over = masked_distill<T>(ft.logits, fs.logits, forget_classes, div,
                                 want_grad ? &glogits : nullptr);
    if (want_grad && w_over != 0.0) {
      const T wo = static_cast<T>(w_over);
      par::parallel_for(glogits.rows * glogits.cols,
                        [&](i64 i) { glogits.data[i] *= wo; });
      student.backward(x_p.data.data(), x_p.rows, fs, glogits, nullptr,
                       gtheta);
    }
  }

  out.total = w_base * out.base + w_over * out.over + w_sim * out.sim;
  return out;
}

// Spec-facing value: the full objective at (lambda1, lambda2) with the
// masked-distillation base (or a plugged-in replacement).
template <typename T>
double spotter_objective(const Classifier<T>& teacher,
                         const Classifier<T>& student, const Matrix<T>& x_f,
                         const std::vector<int>& y_f, const Matrix<T>& x_p,
                         std::span<const int> forget_classes,
                         DivergenceKind div, double lambda1, double lambda2,
                         const BaseLossFn<T>* base = nullptr) {
  require(lambda1 >= 0.0 && lambda1 <= 1.0, ErrorKind::Config,
          "lambda1 must lie in [0, 1]");
  require(lambda2 >= 0.0, ErrorKind::Config, "lambda2 must be nonnegative");
  BaseLossFn<T> fallback = masked_distill_base<T>(div);
  ObjectiveValue v = objective_with_grad<T>(
      teacher, student, x_f, y_f, x_p, forget_classes, div,
      base != nullptr ? *base : fallback, lambda1, 1.0 - lambda1, lambda2, {});
  return combine_objective(v.base, v.over, v.sim, lambda1, lambda2);
}

}  // namespace spotter
