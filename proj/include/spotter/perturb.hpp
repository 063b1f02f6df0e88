#pragma once

#include <filesystem>
#include <limits>
#include <vector>

#include "spotter/data.hpp"
#include "spotter/model.hpp"
#include "spotter/rng.hpp"

namespace spotter {

enum class PerturbMethod { PGD, Gaussian };

const char* to_string(PerturbMethod m);
PerturbMethod perturb_method_from_string(const std::string& s);

// L-infinity perturbation settings. boundary_buffer is the margin filter
// beta from the tube definition; +inf disables it.
struct PerturbConfig {
  double epsilon = 0.03;
  int steps = 3;
  double step_size = 0.0;  // 0 -> epsilon / steps
  PerturbMethod method = PerturbMethod::PGD;
  double sigma = 0.1;      // Gaussian std; variance 0.01 by default
  double boundary_buffer = std::numeric_limits<double>::infinity();
  double bound_lo = -std::numeric_limits<double>::infinity();
  double bound_hi = std::numeric_limits<double>::infinity();

  void validate() const;
  double effective_step() const {
    return step_size > 0.0 ? step_size : epsilon / steps;
  }
};

struct PerturbedItem {
  std::vector<float> x_p;
  i64 origin_index = 0;       // train index into D_f
  PerturbMethod method = PerturbMethod::PGD;
  float delta_inf_norm = 0.0f;
  float margin_at_xp = 0.0f;  // g_c at x_p under the original model
};

struct PerturbedSet {
  std::vector<PerturbedItem> items;
  PerturbConfig config;
  u64 seed = 0;
  u64 stream_id = 0;
  i64 total_candidates = 0;  // before the boundary-buffer filter
  bool all_filtered() const { return items.empty() && total_candidates > 0; }
};

// Iterated sign-gradient ascent on the cross-entropy of `model` at label y,
// projected onto the epsilon ball after every step and clamped to the input
// bounds. No random start; epsilon = 0 returns x unchanged.
std::vector<float> pgd_perturb(const Classifier<float>& model,
                               std::span<const float> x, int y,
                               const PerturbConfig& cfg);

// x + delta with delta ~ N(0, sigma^2 I), clamped to the input bounds.
std::vector<float> gaussian_perturb(std::span<const float> x,
                                    const PerturbConfig& cfg, Rng& rng);

// One perturbed sample per forget sample, each carrying the logit margin of
// its original label under `model_orig` at the perturbed point. Records with
// |margin| > boundary_buffer are dropped; an empty result is a warning state,
// not an error. Per-sample RNG substreams make the result independent of
// any parallel partitioning.
PerturbedSet epsilon_tube(const Classifier<float>& model_orig,
                          const Dataset& data, const ForgetSpec& forget,
                          const PerturbConfig& cfg, u64 seed, u64 stream_id);

void save_perturbed_set(const std::filesystem::path& path,
                        const PerturbedSet& set);
PerturbedSet load_perturbed_set(const std::filesystem::path& path);

}  // namespace spotter
