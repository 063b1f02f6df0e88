#include <doctest.h>

#include <cmath>

#include "spotter/divergence.hpp"
#include "spotter/rng.hpp"

using namespace spotter;

namespace {

std::vector<double> random_logits(Rng& rng, int n) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal() * 3.0;
  return z;
}

std::vector<double> random_probs(Rng& rng, int n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) {
    v = rng.uniform() + 1e-6;
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

TEST_CASE("softmax examples") {
  std::vector<double> z{0, 0};
  auto p = softmax<double>(z);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  std::vector<double> z2{0, 0, std::log(2.0)};
  auto p2 = softmax<double>(z2);
  CHECK(p2[0] == doctest::Approx(0.25));
  CHECK(p2[1] == doctest::Approx(0.25));
  CHECK(p2[2] == doctest::Approx(0.5));
}

TEST_CASE("softmax shift invariance") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto z = random_logits(rng, 5);
    const double shift = rng.normal() * 10.0;
    auto zs = z;
    for (auto& v : zs) v += shift;
    auto p = softmax<double>(z);
    auto ps = softmax<double>(zs);
    for (int k = 0; k < 5; ++k)
      CHECK(std::abs(p[k] - ps[k]) < 1e-9);
  }
}

TEST_CASE("masked softmax examples") {
  std::vector<double> z{0, 0, std::log(2.0)};
  std::vector<int> cf{2};
  auto p = masked_softmax<double>(z, cf);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK(p[2] == 0.0);

  std::vector<double> z2{1, 2, 3};
  std::vector<int> cf2{0};
  auto p2 = masked_softmax<double>(z2, cf2);
  const double e = std::exp(1.0);
  CHECK(p2[0] == 0.0);
  CHECK(p2[1] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-4));
  CHECK(p2[2] == doctest::Approx(e / (1.0 + e)).epsilon(1e-4));
}

TEST_CASE("masked softmax with an empty mask equals softmax exactly") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = random_logits(rng, 6);
    CHECK(masked_softmax<double>(z, {}) == softmax<double>(z));
  }
}

TEST_CASE("masked softmax properties over random cases") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    auto z = random_logits(rng, 6);
    std::vector<int> cf{0, static_cast<int>(rng.below(4)) + 1};
    auto p = masked_softmax<double>(z, cf);
    for (int c : cf) CHECK(p[c] == 0.0);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
    // shift invariance
    auto zs = z;
    for (auto& v : zs) v += 2.5;
    auto ps = masked_softmax<double>(zs, cf);
    for (int k = 0; k < 6; ++k) CHECK(std::abs(p[k] - ps[k]) < 1e-9);
  }
}

TEST_CASE("masking every class is invalid") {
  std::vector<double> z{0, 1};
  std::vector<int> cf{0, 1};
  CHECK_THROWS_AS((void)masked_softmax<double>(z, cf), Error);
}

TEST_CASE("vanishing retain mass floors and flags") {
  divergence_diagnostics().reset();
  std::vector<double> z{200.0, 0.0, 0.0};
  std::vector<int> cf{0};
  auto p = masked_softmax<double>(z, cf);
  CHECK(p[0] == 0.0);
  CHECK(divergence_diagnostics().masked_floor_events.load() == 1);
}

TEST_CASE("KL examples and properties") {
  std::vector<double> p{1, 0};
  std::vector<double> q{0.5, 0.5};
  CHECK(kl_divergence<double>(p, q) == doctest::Approx(std::log(2.0)));
  CHECK(kl_divergence<double>(q, q) == 0.0);

  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = random_probs(rng, 4);
    auto b = random_probs(rng, 4);
    CHECK(kl_divergence<double>(a, b) >= 0.0);
    CHECK(kl_divergence<double>(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("JS examples and properties") {
  std::vector<double> p{1, 0};
  std::vector<double> q{0, 1};
  CHECK(js_divergence<double>(p, q) == doctest::Approx(std::log(2.0)));
  CHECK(js_divergence<double>(p, p) == 0.0);

  const double ln2 = std::log(2.0);
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = random_probs(rng, 5);
    auto b = random_probs(rng, 5);
    const double ab = js_divergence<double>(a, b);
    const double ba = js_divergence<double>(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab <= ln2 + 1e-12);
    CHECK(std::abs(ab - ba) < 1e-9);
  }
}

TEST_CASE("KL flooring counts a diagnostic event") {
  divergence_diagnostics().reset();
  std::vector<double> p{0.5, 0.5};
  std::vector<double> q{1.0, 0.0};
  const double v = kl_divergence<double>(p, q);
  CHECK(v > 0.0);
  CHECK(divergence_diagnostics().kl_floor_events.load() == 1);
}
