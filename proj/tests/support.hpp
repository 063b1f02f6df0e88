#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "spotter/model.hpp"
#include "spotter/rng.hpp"

namespace spotter::testing {

// phi(x) = 0: exercises the affine head in isolation.
template <typename T>
class ZeroFeatures final : public FeatureArch<T> {
 public:
  ZeroFeatures(int in, int out) : in_(in), out_(out) {}
  std::string name() const override { return "zero"; }
  int input_dim() const override { return in_; }
  int embed_dim() const override { return out_; }
  i64 param_count() const override { return 0; }
  void init_params(std::span<T>, Rng&) const override {}
  void forward(std::span<const T>, const T*, i64, Matrix<T>& emb,
               std::vector<Matrix<T>>*) const override {
    emb.zero();
  }
  void backward(std::span<const T>, const T*, i64 n,
                const std::vector<Matrix<T>>&, const Matrix<T>&,
                const Matrix<T>&, std::span<T>, T* gx) const override {
    if (gx != nullptr)
      std::fill(gx, gx + n * in_, T(0));
  }
  nlohmann::json to_json() const override {
    return {{"name", "zero"}, {"in", in_}, {"out", out_}};
  }

 private:
  int in_, out_;
};

// Identity-feature classifier with an explicit head, for hand-computable
// logits.
template <typename T>
Classifier<T> identity_model(const std::vector<std::vector<T>>& w,
                             const std::vector<T>& b) {
  const int num_classes = static_cast<int>(w.size());
  const int dim = static_cast<int>(w[0].size());
  Classifier<T> model(std::make_shared<IdentityFeatures<T>>(dim), num_classes);
  for (int c = 0; c < num_classes; ++c) {
    std::copy(w[c].begin(), w[c].end(), model.weight_row(c).begin());
    model.bias(c) = b[c];
  }
  return model;
}

template <typename T>
Classifier<T> random_mlp(int in, int hidden, int num_classes, u64 seed) {
  Classifier<T> model(std::make_shared<MlpFeatures<T>>(in, hidden),
                      num_classes);
  Rng rng(seed);
  model.init(rng);
  return model;
}

// Central finite differences over every student parameter.
// Returns the largest error |analytic - fd| / max(|analytic|, |fd|, floor).
inline double max_gradient_error(Classifier<double>& student,
                                 const std::function<double()>& loss,
                                 std::span<const double> analytic,
                                 double h = 1e-5) {
  double worst = 0.0;
  auto& params = student.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double fp = loss();
    params[i] = saved - h;
    const double fm = loss();
    params[i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(fd), 1e-4});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double rank = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j] < v[i] || (v[j] == v[i] && j < i)) rank += 1.0;
      r[i] = rank;
    }
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace spotter::testing
