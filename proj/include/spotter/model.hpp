#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spotter/common.hpp"
#include "spotter/kernels.hpp"
#include "spotter/rng.hpp"

namespace spotter {

template <typename T>
struct ForwardPass {
  Matrix<T> emb;                  // N x embed_dim
  Matrix<T> logits;               // N x C
  std::vector<Matrix<T>> acts;    // architecture-internal activations
};

// Feature extractor phi. Stateless description of the architecture; the
// parameters live in the owning Classifier's flat vector. No stochastic
// layers anywhere, so evaluation is deterministic by construction.
template <typename T>
class FeatureArch {
 public:
  virtual ~FeatureArch() = default;
  virtual std::string name() const = 0;
  virtual int input_dim() const = 0;
  virtual int embed_dim() const = 0;
  virtual i64 param_count() const = 0;
  virtual void init_params(std::span<T> p, Rng& rng) const = 0;
  // emb must be preshaped to n x embed_dim. acts may be null when no
  // backward pass will follow.
  virtual void forward(std::span<const T> p, const T* x, i64 n, Matrix<T>& emb,
                       std::vector<Matrix<T>>* acts) const = 0;
  // Accumulates into gp; writes input gradients to gx when non-null.
  virtual void backward(std::span<const T> p, const T* x, i64 n,
                        const std::vector<Matrix<T>>& acts,
                        const Matrix<T>& emb, const Matrix<T>& gemb,
                        std::span<T> gp, T* gx) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// phi(x) = x. Used by toy setups and tests where logits should be a plain
// affine map of the input.
template <typename T>
class IdentityFeatures final : public FeatureArch<T> {
 public:
  explicit IdentityFeatures(int dim) : dim_(dim) {}
  std::string name() const override { return "identity"; }
  int input_dim() const override { return dim_; }
  int embed_dim() const override { return dim_; }
  i64 param_count() const override { return 0; }
  void init_params(std::span<T>, Rng&) const override {}
  void forward(std::span<const T>, const T* x, i64 n, Matrix<T>& emb,
               std::vector<Matrix<T>>*) const override {
    std::copy(x, x + n * dim_, emb.data.data());
  }
  void backward(std::span<const T>, const T*, i64 n,
                const std::vector<Matrix<T>>&, const Matrix<T>&,
                const Matrix<T>& gemb, std::span<T>, T* gx) const override {
    if (gx != nullptr)
      std::copy(gemb.data.data(), gemb.data.data() + n * dim_, gx);
  }
  nlohmann::json to_json() const override {
    return {{"name", "identity"}, {"dim", dim_}};
  }

 private:
  int dim_;
};

// One tanh hidden layer; the hidden activation is the embedding.
// params = [W1 (hidden x in) | b1 (hidden)]
template <typename T>
class MlpFeatures final : public FeatureArch<T> {
 public:
  MlpFeatures(int in, int hidden) : in_(in), hidden_(hidden) {}
  std::string name() const override { return "mlp"; }
  int input_dim() const override { return in_; }
  int embed_dim() const override { return hidden_; }
  i64 param_count() const override {
    return static_cast<i64>(hidden_) * in_ + hidden_;
  }
  void init_params(std::span<T> p, Rng& rng) const override {
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_));
    for (i64 i = 0; i < static_cast<i64>(hidden_) * in_; ++i)
      p[i] = static_cast<T>(rng.normal() * scale);
    for (int j = 0; j < hidden_; ++j) p[hidden_ * in_ + j] = T(0);
  }
  void forward(std::span<const T> p, const T* x, i64 n, Matrix<T>& emb,
               std::vector<Matrix<T>>*) const override {
    kernels::affine_forward(x, n, in_, p.data(), p.data() + static_cast<i64>(hidden_) * in_,
                            hidden_, emb.data.data());
    kernels::tanh_forward(emb.data.data(), n * hidden_, emb.data.data());
  }
  void backward(std::span<const T> p, const T* x, i64 n,
                const std::vector<Matrix<T>>&, const Matrix<T>& emb,
                const Matrix<T>& gemb, std::span<T> gp, T* gx) const override {
    Matrix<T> gpre(n, hidden_);
    kernels::tanh_backward(emb.data.data(), gemb.data.data(), n * hidden_,
                           gpre.data.data());
    if (!gp.empty()) {
      kernels::affine_backward_params(x, gpre.data.data(), n, in_, hidden_,
                                      gp.data(),
                                      gp.data() + static_cast<i64>(hidden_) * in_);
    }
    if (gx != nullptr) {
      kernels::affine_backward_input(gpre.data.data(), n, in_, p.data(),
                                     hidden_, gx);
    }
  }
  nlohmann::json to_json() const override {
    return {{"name", "mlp"}, {"in", in_}, {"hidden", hidden_}};
  }

 private:
  int in_;
  int hidden_;
};

// Two conv blocks for small images: (conv3x3 -> tanh -> avgpool2) twice,
// then flatten. Input is [channels x size x size]; size must be divisible
// by 4. params = [K1 | b1 | K2 | b2].
template <typename T>
class ConvFeatures final : public FeatureArch<T> {
 public:
  ConvFeatures(int in_channels, int size, int c1, int c2)
      : cin_(in_channels), size_(size), c1_(c1), c2_(c2) {
    require(size % 4 == 0, ErrorKind::Config,
            "conv2 architecture needs image size divisible by 4");
  }
  std::string name() const override { return "conv2"; }
  int input_dim() const override { return cin_ * size_ * size_; }
  int embed_dim() const override { return c2_ * (size_ / 4) * (size_ / 4); }
  i64 param_count() const override {
    return static_cast<i64>(c1_) * cin_ * 9 + c1_ +
           static_cast<i64>(c2_) * c1_ * 9 + c2_;
  }
  void init_params(std::span<T> p, Rng& rng) const override {
    i64 at = 0;
    auto fill = [&](i64 count, double fan_in) {
      const double scale = 1.0 / std::sqrt(fan_in);
      for (i64 i = 0; i < count; ++i)
        p[at + i] = static_cast<T>(rng.normal() * scale);
      at += count;
    };
    fill(static_cast<i64>(c1_) * cin_ * 9, cin_ * 9.0);
    for (int i = 0; i < c1_; ++i) p[at + i] = T(0);
    at += c1_;
    fill(static_cast<i64>(c2_) * c1_ * 9, c1_ * 9.0);
    for (int i = 0; i < c2_; ++i) p[at + i] = T(0);
  }
  void forward(std::span<const T> p, const T* x, i64 n, Matrix<T>& emb,
               std::vector<Matrix<T>>* acts) const override {
    const int h1 = size_, h2 = size_ / 2, h3 = size_ / 4;
    const T* k1 = p.data();
    const T* b1 = k1 + static_cast<i64>(c1_) * cin_ * 9;
    const T* k2 = b1 + c1_;
    const T* b2 = k2 + static_cast<i64>(c2_) * c1_ * 9;

    Matrix<T> a1(n, static_cast<i64>(c1_) * h1 * h1);
    kernels::conv3x3_forward(x, n, cin_, h1, h1, k1, b1, c1_, a1.data.data());
    kernels::tanh_forward(a1.data.data(), a1.data.size(), a1.data.data());
    Matrix<T> p1(n, static_cast<i64>(c1_) * h2 * h2);
    kernels::avgpool2_forward(a1.data.data(), n, c1_, h1, h1, p1.data.data());
    Matrix<T> a2(n, static_cast<i64>(c2_) * h2 * h2);
    kernels::conv3x3_forward(p1.data.data(), n, c1_, h2, h2, k2, b2, c2_,
                             a2.data.data());
    kernels::tanh_forward(a2.data.data(), a2.data.size(), a2.data.data());
    kernels::avgpool2_forward(a2.data.data(), n, c2_, h2, h2, emb.data.data());
    (void)h3;
    if (acts != nullptr) {
      acts->clear();
      acts->push_back(std::move(a1));
      acts->push_back(std::move(p1));
      acts->push_back(std::move(a2));
    }
  }
  void backward(std::span<const T> p, const T* x, i64 n,
                const std::vector<Matrix<T>>& acts, const Matrix<T>&,
                const Matrix<T>& gemb, std::span<T> gp, T* gx) const override {
    const int h1 = size_, h2 = size_ / 2;
    const Matrix<T>& a1 = acts[0];
    const Matrix<T>& p1 = acts[1];
    const Matrix<T>& a2 = acts[2];
    const T* k1 = p.data();
    const T* k2 = p.data() + static_cast<i64>(c1_) * cin_ * 9 + c1_;
    const i64 k1n = static_cast<i64>(c1_) * cin_ * 9;
    const i64 k2n = static_cast<i64>(c2_) * c1_ * 9;

    Matrix<T> ga2(n, static_cast<i64>(c2_) * h2 * h2);
    kernels::avgpool2_backward(gemb.data.data(), n, c2_, h2, h2,
                               ga2.data.data());
    kernels::tanh_backward(a2.data.data(), ga2.data.data(), ga2.data.size(),
                           ga2.data.data());
    Matrix<T> gp1(n, static_cast<i64>(c1_) * h2 * h2);
    kernels::conv3x3_backward_input(ga2.data.data(), n, c1_, h2, h2, k2, c2_,
                                    gp1.data.data());
    if (!gp.empty()) {
      kernels::conv3x3_backward_params(p1.data.data(), ga2.data.data(), n, c1_,
                                       h2, h2, c2_, gp.data() + k1n + c1_,
                                       gp.data() + k1n + c1_ + k2n);
    }
    Matrix<T> ga1(n, static_cast<i64>(c1_) * h1 * h1);
    kernels::avgpool2_backward(gp1.data.data(), n, c1_, h1, h1,
                               ga1.data.data());
    kernels::tanh_backward(a1.data.data(), ga1.data.data(), ga1.data.size(),
                           ga1.data.data());
    if (!gp.empty()) {
      kernels::conv3x3_backward_params(x, ga1.data.data(), n, cin_, h1, h1,
                                       c1_, gp.data(), gp.data() + k1n);
    }
    if (gx != nullptr) {
      kernels::conv3x3_backward_input(ga1.data.data(), n, cin_, h1, h1, k1,
                                      c1_, gx);
    }
  }
  nlohmann::json to_json() const override {
    return {{"name", "conv2"},
            {"in_channels", cin_},
            {"size", size_},
            {"c1", c1_},
            {"c2", c2_}};
  }

 private:
  int cin_;
  int size_;
  int c1_;
  int c2_;
};

template <typename T>
std::shared_ptr<const FeatureArch<T>> arch_from_json(const nlohmann::json& j) {
  const std::string name = j.at("name").get<std::string>();
  if (name == "identity")
    return std::make_shared<IdentityFeatures<T>>(j.at("dim").get<int>());
  if (name == "mlp")
    return std::make_shared<MlpFeatures<T>>(j.at("in").get<int>(),
                                            j.at("hidden").get<int>());
  if (name == "conv2")
    return std::make_shared<ConvFeatures<T>>(
        j.at("in_channels").get<int>(), j.at("size").get<int>(),
        j.at("c1").get<int>(), j.at("c2").get<int>());
  raise(ErrorKind::Config, "unknown architecture: " + name);
}

// Classifier = feature extractor phi plus affine head: logits = W phi(x) + b.
// All parameters live in one flat vector laid out [phi | W (C x n) | b (C)].
// Instances are value types; copies never share mutable state.
template <typename T>
class Classifier {
 public:
  Classifier(std::shared_ptr<const FeatureArch<T>> arch, int num_classes)
      : arch_(std::move(arch)), num_classes_(num_classes) {
    require(num_classes_ >= 1, ErrorKind::Config, "need at least one class");
    theta_.assign(static_cast<std::size_t>(param_count()), T(0));
  }

  const FeatureArch<T>& arch() const { return *arch_; }
  std::shared_ptr<const FeatureArch<T>> arch_ptr() const { return arch_; }
  int num_classes() const { return num_classes_; }
  int embed_dim() const { return arch_->embed_dim(); }
  int input_dim() const { return arch_->input_dim(); }
  i64 feature_param_count() const { return arch_->param_count(); }
  i64 param_count() const {
    return arch_->param_count() +
           static_cast<i64>(num_classes_) * (arch_->embed_dim() + 1);
  }

  std::vector<T>& params() { return theta_; }
  const std::vector<T>& params() const { return theta_; }

  std::span<const T> feature_params() const {
    return {theta_.data(), static_cast<std::size_t>(arch_->param_count())};
  }
  std::span<T> feature_params() {
    return {theta_.data(), static_cast<std::size_t>(arch_->param_count())};
  }
  // W row for class c (length embed_dim)
  std::span<const T> weight_row(int c) const {
    return {theta_.data() + arch_->param_count() +
                static_cast<i64>(c) * embed_dim(),
            static_cast<std::size_t>(embed_dim())};
  }
  std::span<T> weight_row(int c) {
    return {theta_.data() + arch_->param_count() +
                static_cast<i64>(c) * embed_dim(),
            static_cast<std::size_t>(embed_dim())};
  }
  const T* head_weights() const { return theta_.data() + arch_->param_count(); }
  const T* head_bias() const {
    return theta_.data() + arch_->param_count() +
           static_cast<i64>(num_classes_) * embed_dim();
  }
  T bias(int c) const { return head_bias()[c]; }
  T& bias(int c) {
    return theta_[arch_->param_count() +
                  static_cast<i64>(num_classes_) * embed_dim() + c];
  }

  void init(Rng& rng) {
    arch_->init_params(feature_params(), rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim()));
    T* w = theta_.data() + arch_->param_count();
    for (i64 i = 0; i < static_cast<i64>(num_classes_) * embed_dim(); ++i)
      w[i] = static_cast<T>(rng.normal() * scale);
    for (int c = 0; c < num_classes_; ++c) bias(c) = T(0);
  }

  ForwardPass<T> forward(const T* x, i64 n, bool keep_acts = false) const {
    ForwardPass<T> fp;
    fp.emb = Matrix<T>(n, embed_dim());
    fp.logits = Matrix<T>(n, num_classes_);
    arch_->forward(feature_params(), x, n, fp.emb,
                   keep_acts ? &fp.acts : nullptr);
    kernels::affine_forward(fp.emb.data.data(), n, embed_dim(), head_weights(),
                            head_bias(), num_classes_, fp.logits.data.data());
    return fp;
  }

  ForwardPass<T> forward(const Matrix<T>& x, bool keep_acts = false) const {
    require(x.cols == input_dim(), ErrorKind::ShapeMismatch,
            "input dimension mismatch");
    return forward(x.data.data(), x.rows, keep_acts);
  }

  std::vector<T> logits_one(std::span<const T> x) const {
    require(static_cast<int>(x.size()) == input_dim(), ErrorKind::ShapeMismatch,
            "input dimension mismatch");
    ForwardPass<T> fp = forward(x.data(), 1);
    return {fp.logits.data.begin(), fp.logits.data.end()};
  }

  Matrix<T> features(const Matrix<T>& x) const {
    require(x.cols == input_dim(), ErrorKind::ShapeMismatch,
            "input dimension mismatch");
    Matrix<T> emb(x.rows, embed_dim());
    arch_->forward(feature_params(), x.data.data(), x.rows, emb, nullptr);
    return emb;
  }

  // Backprop given dL/dlogits and, optionally, an extra dL/demb term that
  // bypasses the head (used by embedding-space losses). Accumulates into
  // gtheta (layout mirrors params()); writes dL/dx when gx is non-null.
  void backward(const T* x, i64 n, const ForwardPass<T>& fp,
                const Matrix<T>& glogits, const Matrix<T>* gemb_extra,
                std::span<T> gtheta, T* gx = nullptr) const {
    const int ndim = embed_dim();
    Matrix<T> gemb(n, ndim);
    kernels::affine_backward_input(glogits.data.data(), n, ndim,
                                   head_weights(), num_classes_,
                                   gemb.data.data());
    if (gemb_extra != nullptr) {
      par::parallel_for(n * ndim, [&](i64 i) {
        gemb.data[i] += gemb_extra->data[i];
      });
    }
    if (!gtheta.empty()) {
      T* gw = gtheta.data() + arch_->param_count();
      T* gb = gw + static_cast<i64>(num_classes_) * ndim;
      kernels::affine_backward_params(fp.emb.data.data(), glogits.data.data(),
                                      n, ndim, num_classes_, gw, gb);
    }
    std::span<T> gphi =
        gtheta.empty() ? std::span<T>{}
                       : gtheta.subspan(0, static_cast<std::size_t>(
                                               arch_->param_count()));
    arch_->backward(feature_params(), x, n, fp.acts, fp.emb, gemb, gphi, gx);
  }

  u64 params_checksum() const {
    return checksum(std::span<const T>(theta_.data(), theta_.size()));
  }

 private:
  std::shared_ptr<const FeatureArch<T>> arch_;
  int num_classes_;
  std::vector<T> theta_;
};

template <typename T>
int argmax_lowest(std::span<T> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// g_c(z) = z_c - max_{k != c} z_k. Positive iff c is the unique argmax,
// zero at ties.
template <typename T>
T logit_margin(std::span<const T> logits, int c) {
  require(logits.size() >= 2, ErrorKind::DegenerateClassifier,
          "logit margin needs at least two classes");
  require(c >= 0 && c < static_cast<int>(logits.size()), ErrorKind::Config,
          "class index out of range");
  T best = -std::numeric_limits<T>::infinity();
  for (int k = 0; k < static_cast<int>(logits.size()); ++k)
    if (k != c && logits[k] > best) best = logits[k];
  return logits[c] - best;
}

template <typename T>
struct HeadRow {
  std::vector<T> weights;
  T bias = T(0);
};

// Returns a copy of `model` with the head rows for the listed classes
// replaced. The input model and all unlisted rows are untouched.
template <typename T>
Classifier<T> replace_head_rows(const Classifier<T>& model,
                                const std::map<int, HeadRow<T>>& rows) {
  Classifier<T> out = model;
  for (const auto& [c, row] : rows) {
    require(c >= 0 && c < model.num_classes(), ErrorKind::Config,
            "head row class out of range");
    require(static_cast<int>(row.weights.size()) == model.embed_dim(),
            ErrorKind::ShapeMismatch, "head row has wrong width");
    std::copy(row.weights.begin(), row.weights.end(),
              out.weight_row(c).begin());
    out.bias(c) = row.bias;
  }
  return out;
}

}  // namespace spotter
