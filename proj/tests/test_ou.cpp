#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "spotter/ou_metric.hpp"
#include "support.hpp"

using namespace spotter;
using spotter::testing::identity_model;
using spotter::testing::random_mlp;

namespace {

PerturbedSet manual_tube(const std::vector<std::vector<float>>& points) {
  PerturbedSet tube;
  tube.config.epsilon = 0.03;
  tube.total_candidates = static_cast<i64>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    PerturbedItem item;
    item.x_p = points[i];
    item.origin_index = static_cast<i64>(i);
    tube.items.push_back(item);
  }
  return tube;
}

}  // namespace

TEST_CASE("identical models with no forget mass give zero") {
  // logits (0, 0, -100): class-2 mass underflows to ~0, so masking the
  // teacher changes nothing and the divergence vanishes.
  auto model = identity_model<float>({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                                     {0, 0, 0});
  PerturbedSet tube = manual_tube({{0.0f, 0.0f, -100.0f}});
  std::vector<int> cf{2};
  OUReport r = ou_at_eps(model, model, tube, cf, DivergenceKind::JS);
  CHECK(r.value <= 1e-9);
}

TEST_CASE("single-point closed form") {
  auto model = identity_model<float>({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                                     {0, 0, 0});
  PerturbedSet tube =
      manual_tube({{0.0f, 0.0f, static_cast<float>(std::log(2.0))}});
  std::vector<int> cf{2};
  // teacher masked: (1/2, 1/2, 0); student softmax: (1/4, 1/4, 1/2)
  OUReport r = ou_at_eps(model, model, tube, cf, DivergenceKind::JS);
  CHECK(r.value == doctest::Approx(0.2158).epsilon(1e-3));
  CHECK(r.n_points == 1);
}

TEST_CASE("mean is permutation invariant and bounded by ln 2 under JS") {
  auto orig = random_mlp<float>(4, 8, 3, 100);
  auto unlearned = random_mlp<float>(4, 8, 3, 200);
  Rng rng(7);
  std::vector<std::vector<float>> points;
  for (int i = 0; i < 33; ++i) {
    std::vector<float> x(4);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    points.push_back(x);
  }
  PerturbedSet tube = manual_tube(points);
  std::vector<int> cf{0};
  OUReport a = ou_at_eps(orig, unlearned, tube, cf, DivergenceKind::JS);
  CHECK(a.value >= 0.0);
  CHECK(a.value <= std::log(2.0) + 1e-12);

  std::reverse(points.begin(), points.end());
  PerturbedSet reversed = manual_tube(points);
  OUReport b = ou_at_eps(orig, unlearned, reversed, cf, DivergenceKind::JS);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
}

TEST_CASE("batch size has no effect on the value") {
  auto orig = random_mlp<float>(4, 8, 3, 300);
  auto unlearned = random_mlp<float>(4, 8, 3, 400);
  Rng rng(8);
  std::vector<std::vector<float>> points;
  for (int i = 0; i < 57; ++i) {
    std::vector<float> x(4);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    points.push_back(x);
  }
  PerturbedSet tube = manual_tube(points);
  std::vector<int> cf{1};
  OUReport a = ou_at_eps(orig, unlearned, tube, cf, DivergenceKind::JS, 7);
  OUReport b = ou_at_eps(orig, unlearned, tube, cf, DivergenceKind::JS, 64);
  CHECK(a.value == b.value);  // bitwise
  CHECK(a.per_point == b.per_point);
}

TEST_CASE("empty tube is an error, distinct from zero") {
  auto model = random_mlp<float>(4, 8, 3, 1);
  PerturbedSet tube;
  tube.total_candidates = 5;
  std::vector<int> cf{0};
  CHECK_THROWS_AS((void)ou_at_eps(model, model, tube, cf, DivergenceKind::JS),
                  Error);
}

TEST_CASE("recomputation from a serialized tube is bit-exact") {
  auto orig = random_mlp<float>(4, 8, 3, 500);
  auto unlearned = random_mlp<float>(4, 8, 3, 600);
  Rng rng(9);
  std::vector<std::vector<float>> points;
  for (int i = 0; i < 21; ++i) {
    std::vector<float> x(4);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    points.push_back(x);
  }
  PerturbedSet tube = manual_tube(points);
  std::vector<int> cf{2};
  OUReport before = ou_at_eps(orig, unlearned, tube, cf, DivergenceKind::JS);

  const auto path =
      std::filesystem::temp_directory_path() / "spotter_ou_tube.json";
  save_perturbed_set(path, tube);
  PerturbedSet loaded = load_perturbed_set(path);
  OUReport after = ou_at_eps(orig, unlearned, loaded, cf, DivergenceKind::JS);
  CHECK(before.value == after.value);
  CHECK(before.per_point == after.per_point);
  std::filesystem::remove(path);
}
