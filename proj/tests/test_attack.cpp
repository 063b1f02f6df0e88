#include <doctest.h>

#include <cmath>

#include "spotter/proto_attack.hpp"
#include "support.hpp"

using namespace spotter;
using spotter::testing::identity_model;
using spotter::testing::random_mlp;

TEST_CASE("class prototype is the componentwise mean") {
  Matrix<float> emb(2, 2);
  emb.at(0, 0) = 1;
  emb.at(1, 1) = 1;
  auto p = class_prototype(emb);
  CHECK(p == std::vector<float>{0.5f, 0.5f});

  Matrix<float> one(1, 2);
  one.at(0, 0) = 3;
  one.at(0, 1) = 4;
  CHECK(class_prototype(one) == std::vector<float>{3.0f, 4.0f});

  Matrix<float> swapped(2, 2);
  swapped.at(0, 1) = 1;
  swapped.at(1, 0) = 1;
  CHECK(class_prototype(swapped) == p);

  Matrix<float> empty(0, 2);
  CHECK_THROWS_AS((void)class_prototype(empty), Error);
}

TEST_CASE("prototype head derivations") {
  std::vector<double> p{0.5, 0.5};
  HeadRow<double> cos = prototype_head<double>(p, ProtoMetric::Cosine);
  CHECK(cos.weights[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-4));
  CHECK(cos.weights[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-4));
  CHECK(cos.bias == 0.0);

  HeadRow<double> euc = prototype_head<double>(p, ProtoMetric::Euclidean);
  CHECK(euc.weights == std::vector<double>{1.0, 1.0});
  CHECK(euc.bias == doctest::Approx(-0.5));

  std::vector<double> zero{0.0, 0.0};
  HeadRow<double> origin = prototype_head<double>(zero, ProtoMetric::Euclidean);
  CHECK(origin.weights == std::vector<double>{0.0, 0.0});
  CHECK(origin.bias == 0.0);
  CHECK_THROWS_AS((void)prototype_head<double>(zero, ProtoMetric::Cosine),
                  Error);
}

TEST_CASE("head interpolation endpoints and midpoint") {
  std::vector<double> w_hat{1, 1};
  std::vector<double> w_u{0, 0};
  auto at0 = interpolate_head<double>(w_hat, -0.5, w_u, 0.0, 0.0);
  CHECK(at0.weights == w_u);
  CHECK(at0.bias == 0.0);
  auto at1 = interpolate_head<double>(w_hat, -0.5, w_u, 0.0, 1.0);
  CHECK(at1.weights == w_hat);
  CHECK(at1.bias == -0.5);
  auto mid = interpolate_head<double>(w_hat, -0.5, w_u, 0.0, 0.5);
  CHECK(mid.weights == std::vector<double>{0.5, 0.5});
  CHECK(mid.bias == doctest::Approx(-0.25));
  CHECK_THROWS_AS((void)interpolate_head<double>(w_hat, 0.0, w_u, 0.0, 1.5),
                  Error);
}

TEST_CASE("attack with alpha = 0 leaves logits unchanged") {
  auto model = random_mlp<float>(4, 6, 3, 404);
  std::map<int, Matrix<float>> support;
  Matrix<float> xs(2, 4);
  Rng rng(1);
  for (auto& v : xs.data) v = static_cast<float>(rng.normal());
  support.emplace(1, xs);
  AttackConfig cfg;
  cfg.alpha = 0.0;
  Classifier<float> patched = prototypical_attack(model, support, cfg);
  Matrix<float> q(5, 4);
  for (auto& v : q.data) v = static_cast<float>(rng.normal());
  CHECK(patched.forward(q).logits.data == model.forward(q).logits.data);
}

TEST_CASE("two-class identity toy restores the forgotten class") {
  auto model_u = identity_model<float>({{1, 0}, {0, 0}}, {0, 0});
  std::map<int, Matrix<float>> support;
  Matrix<float> xs(1, 2);
  xs.at(0, 1) = 1.0f;  // support point (0, 1)
  support.emplace(1, xs);
  AttackConfig cfg;
  cfg.alpha = 1.0;
  cfg.metric = ProtoMetric::Cosine;
  Classifier<float> patched = prototypical_attack(model_u, support, cfg);
  std::vector<float> q{0.0f, 1.0f};
  auto z = patched.logits_one(q);
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(z[1] == doctest::Approx(1.0));
  CHECK(argmax_lowest(std::span<const float>{z}) == 1);
}

TEST_CASE("attack locality: phi and retain rows bit-identical") {
  auto model = random_mlp<float>(5, 7, 4, 2025);
  std::map<int, Matrix<float>> support;
  Matrix<float> xs(3, 5);
  Rng rng(2);
  for (auto& v : xs.data) v = static_cast<float>(rng.normal());
  support.emplace(2, xs);
  AttackConfig cfg;
  cfg.alpha = 0.7;
  Classifier<float> patched = prototypical_attack(model, support, cfg);

  CHECK(std::equal(patched.feature_params().begin(),
                   patched.feature_params().end(),
                   model.feature_params().begin()));
  for (int c : {0, 1, 3}) {
    CHECK(std::equal(patched.weight_row(c).begin(), patched.weight_row(c).end(),
                     model.weight_row(c).begin()));
    CHECK(patched.bias(c) == model.bias(c));
  }
  CHECK_FALSE(std::equal(patched.weight_row(2).begin(),
                         patched.weight_row(2).end(),
                         model.weight_row(2).begin()));
}

TEST_CASE("patched logits are affine in alpha") {
  auto model = random_mlp<float>(5, 7, 4, 31337);
  std::map<int, Matrix<float>> support;
  Matrix<float> xs(4, 5);
  Rng rng(3);
  for (auto& v : xs.data) v = static_cast<float>(rng.normal());
  support.emplace(0, xs);

  Matrix<float> q(3, 5);
  for (auto& v : q.data) v = static_cast<float>(rng.normal());
  auto logits_at = [&](double alpha) {
    AttackConfig cfg;
    cfg.alpha = alpha;
    return prototypical_attack(model, support, cfg).forward(q).logits;
  };
  Matrix<float> z0 = logits_at(0.0), z1 = logits_at(1.0), zh = logits_at(0.5);
  for (std::size_t i = 0; i < z0.data.size(); ++i) {
    CHECK(std::abs(0.5f * (z0.data[i] + z1.data[i]) - zh.data[i]) <= 1e-6f);
  }
}

TEST_CASE("head forms match brute-force nearest-prototype classification") {
  Rng rng(99);
  for (int inst = 0; inst < 100; ++inst) {
    const int c = 2 + rng.index(4);  // classes in [2, 5]
    const int n = 2 + rng.index(7);  // dims in [2, 8]
    std::vector<std::vector<double>> protos(c, std::vector<double>(n));
    for (auto& p : protos)
      for (auto& v : p) v = rng.normal();
    std::vector<double> e(n);
    for (auto& v : e) v = rng.normal();

    // Euclidean form
    int brute_euc = 0, head_euc = 0;
    double best_d = 1e300, best_z = -1e300;
    for (int k = 0; k < c; ++k) {
      double d2 = 0.0, dot = 0.0, p2 = 0.0;
      for (int i = 0; i < n; ++i) {
        d2 += (e[i] - protos[k][i]) * (e[i] - protos[k][i]);
        dot += e[i] * protos[k][i];
        p2 += protos[k][i] * protos[k][i];
      }
      if (d2 < best_d) {
        best_d = d2;
        brute_euc = k;
      }
      HeadRow<double> row = prototype_head<double>(protos[k], ProtoMetric::Euclidean);
      double z = row.bias;
      for (int i = 0; i < n; ++i) z += row.weights[i] * e[i];
      (void)dot;
      (void)p2;
      if (z > best_z) {
        best_z = z;
        head_euc = k;
      }
    }
    CHECK(brute_euc == head_euc);

    // Cosine form
    int brute_cos = 0, head_cos = 0;
    double best_c = -1e300, best_zc = -1e300;
    for (int k = 0; k < c; ++k) {
      double dot = 0.0, p2 = 0.0, e2 = 0.0;
      for (int i = 0; i < n; ++i) {
        dot += e[i] * protos[k][i];
        p2 += protos[k][i] * protos[k][i];
        e2 += e[i] * e[i];
      }
      const double cosv = dot / std::sqrt(p2 * e2);
      if (cosv > best_c) {
        best_c = cosv;
        brute_cos = k;
      }
      HeadRow<double> row = prototype_head<double>(protos[k], ProtoMetric::Cosine);
      double z = row.bias;
      for (int i = 0; i < n; ++i) z += row.weights[i] * e[i];
      if (z > best_zc) {
        best_zc = z;
        head_cos = k;
      }
    }
    CHECK(brute_cos == head_cos);
  }
}

namespace {

Dataset two_point_dataset() {
  Dataset data;
  data.num_classes = 2;
  data.input_dim = 2;
  data.x_train = Matrix<float>(8, 2);
  data.y_train.resize(8);
  for (i64 i = 0; i < 4; ++i) {  // class 0 near (1, 0)
    data.x_train.at(i, 0) = 1.0f + 0.001f * static_cast<float>(i);
    data.x_train.at(i, 1) = 0.0f;
    data.y_train[i] = 0;
  }
  for (i64 i = 4; i < 8; ++i) {  // class 1 near (0, 1)
    data.x_train.at(i, 0) = 0.0f;
    data.x_train.at(i, 1) = 1.0f + 0.001f * static_cast<float>(i);
    data.y_train[i] = 1;
  }
  data.x_test = data.x_train;
  data.y_test = data.y_train;
  return data;
}

}  // namespace

TEST_CASE("alpha tuning picks the largest feasible alpha") {
  Dataset data = two_point_dataset();
  ForgetSpec forget = forget_by_classes(data, {1});
  // unlearned model: class 1 row zeroed, class 0 weakly correct
  auto model_u = identity_model<float>({{0.1f, 0.0f}, {0.0f, 0.0f}},
                                       {0.0f, 0.0f});
  std::map<int, Matrix<float>> support;
  Matrix<float> xs(1, 2);
  xs.at(0, 0) = 0.0f;
  xs.at(0, 1) = 1.0f;
  support.emplace(1, xs);
  AttackConfig cfg;

  SUBCASE("support orthogonal to retain direction keeps alpha = 1 feasible") {
    std::vector<double> grid{1.0, 0.5, 0.0};
    AlphaTuneResult r =
        tune_alpha(model_u, support, data, forget, grid, cfg);
    CHECK(r.chosen_alpha == 1.0);
    CHECK_FALSE(r.constraint_unsatisfied);
    CHECK(r.records.size() == 3);
    // alpha = 0 leaves the model unchanged, so it is always feasible
    CHECK(r.records.back().feasible);
    CHECK(r.records.back().acc_r_star == r.base_acc_r);
  }

  SUBCASE("retain-aligned support forces infeasibility on a 1-point grid") {
    Matrix<float> bad(1, 2);
    bad.at(0, 0) = 1.0f;  // embedding aligned with the retain cluster
    bad.at(0, 1) = 0.01f;
    std::map<int, Matrix<float>> bad_support;
    bad_support.emplace(1, bad);
    std::vector<double> grid{1.0};
    AlphaTuneResult r =
        tune_alpha(model_u, bad_support, data, forget, grid, cfg);
    CHECK(r.constraint_unsatisfied);
    CHECK(r.chosen_alpha == 0.0);
  }

  SUBCASE("support outside the forget classes is a protocol error") {
    std::map<int, Matrix<float>> wrong;
    wrong.emplace(0, xs);
    std::vector<double> grid{1.0};
    CHECK_THROWS_AS(
        (void)tune_alpha(model_u, wrong, data, forget, grid, cfg), Error);
  }
}

TEST_CASE("finetune relearning identities and sanity") {
  auto model = random_mlp<float>(4, 6, 3, 808);
  Rng rng(4);
  Matrix<float> xs(5, 4);
  for (auto& v : xs.data) v = static_cast<float>(rng.normal());
  std::vector<int> ys{0, 1, 2, 0, 1};

  SUBCASE("zero epochs leaves the model untouched") {
    Classifier<float> out =
        finetune_relearn(model, xs, ys, {OptimizerKind::Adam, 1e-3, 0, 8}, 1);
    CHECK(out.params() == model.params());
  }

  SUBCASE("zero learning rate leaves the model untouched") {
    Classifier<float> out =
        finetune_relearn(model, xs, ys, {OptimizerKind::Sgd, 0.0, 3, 8}, 1);
    CHECK(out.params() == model.params());
  }

  SUBCASE("no samples is an error") {
    Matrix<float> none(0, 4);
    CHECK_THROWS_AS((void)finetune_relearn(model, none, {},
                                           {OptimizerKind::Adam, 1e-3, 1, 8}, 1),
                    Error);
  }

  SUBCASE("one small-step epoch lowers the loss on most seeds") {
    int improved = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
      auto m = random_mlp<float>(4, 6, 3, 9000 + t);
      Rng r2(t);
      Matrix<float> x(6, 4);
      for (auto& v : x.data) v = static_cast<float>(r2.normal());
      std::vector<int> y{0, 1, 2, 0, 1, 2};
      auto before = m.forward(x);
      const double loss_before = cross_entropy<float>(before.logits, y);
      Classifier<float> after =
          finetune_relearn(m, x, y, {OptimizerKind::Sgd, 1e-3, 1, 6}, t);
      const double loss_after =
          cross_entropy<float>(after.forward(x).logits, y);
      if (loss_after <= loss_before) ++improved;
    }
    CHECK(improved >= 18);  // >= 90%
  }
}
