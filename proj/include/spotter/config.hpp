#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spotter/data.hpp"
#include "spotter/divergence.hpp"
#include "spotter/perturb.hpp"
#include "spotter/proto_attack.hpp"
#include "spotter/unlearn.hpp"

namespace spotter {

// Flat `key = value` text config; '#' starts a comment. Unset keys fall back
// to defaults during resolution, and every run writes the fully resolved set
// back out as config.resolved.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_text(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string get_str(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  int get_int(const std::string& key, int dflt) const;
  u64 get_u64(const std::string& key, u64 dflt) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& dflt) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& dflt) const;

  std::string resolved_text() const;  // sorted lines
  void write(const std::filesystem::path& path) const;
  // Hash over the resolved text minus non-semantic keys (out, threads).
  u64 semantic_hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

enum class DatasetKind { Blobs, Images };
enum class MethodKind { Spotter, RandomLabel, NegGrad, Retrain };

const char* to_string(MethodKind m);
MethodKind method_from_string(const std::string& s);

// Fully resolved experiment settings. from_kv applies every default; to_kv
// round-trips the resolved state for config.resolved and hashing.
struct ExperimentConfig {
  u64 seed = 1;
  std::string out_dir = "runs";
  int threads = 0;
  MethodKind method = MethodKind::Spotter;

  DatasetKind dataset_kind = DatasetKind::Blobs;
  BlobsSpec blobs;
  ImagesSpec images;

  std::string arch = "mlp";  // mlp | conv2
  int mlp_hidden = 64;
  int conv_c1 = 8, conv_c2 = 8;

  std::vector<int> forget_classes{0};

  OptimConfig train_optim{OptimizerKind::Adam, 1e-3, 30, 64};
  std::string teacher_dir;  // when set, load instead of training

  SpotterConfig unlearn;  // includes lambda1/lambda2/divergence/perturb/optim

  PerturbConfig eval_perturb;      // PGD tube for OU@eps
  double eval_gaussian_sigma = 0.1;  // sigma^2 = 0.01
  DivergenceKind eval_divergence = DivergenceKind::JS;

  AttackConfig attack;
  std::vector<double> alpha_grid;
  std::optional<double> fixed_alpha;  // set -> skip tuning
  double attack_max_drop = 1.0;

  int relearn_samples = 5;
  int relearn_epochs = 1;

  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;

  Dataset make_dataset() const;
  std::shared_ptr<const FeatureArch<float>> make_arch(const Dataset& d) const;
  std::string hash_string() const;  // hex of the semantic hash
};

}  // namespace spotter
