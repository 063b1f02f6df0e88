#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spotter/config.hpp"
#include "spotter/data.hpp"
#include "spotter/ou_metric.hpp"
#include "spotter/proto_attack.hpp"
#include "spotter/unlearn.hpp"

namespace spotter {

struct Accuracies {
  std::optional<double> acc_f;   // forget classes, train split
  std::optional<double> acc_r;   // retain classes, train split
  std::optional<double> acc_ft;  // forget classes, test split
  std::optional<double> acc_rt;  // retain classes, test split
};

// Top-1 accuracies restricted to forget/retain classes on each split.
// Empty restrictions yield an unset optional, never a zero.
Accuracies evaluate_accuracies(const Classifier<float>& model,
                               const Dataset& data, const ForgetSpec& forget);

// One Table-1-style row. Optionals render as "-" in reports (the original
// model has no OU or attack entries).
struct MetricsReport {
  std::string method;
  u64 seed = 0;
  std::string config_hash;
  std::optional<double> acc_f, acc_r, acc_ft, acc_rt;
  std::optional<double> ou_eps, gaussian_ou;
  std::optional<double> proto_acc_f, acc_r_star, chosen_alpha;
  bool alpha_constraint_unsatisfied = false;
  std::vector<AlphaRecord> alpha_table;
  DataAccounting unlearn_accounting;
  u64 eval_perturb_stream = kStreamEvalPerturb;
  u64 train_perturb_stream = kStreamTrainPerturb;
  double wall_time_sec = 0.0;  // metadata, excluded from values_equal

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  bool values_equal(const MetricsReport& other) const;
};

// Full pipeline: train (or load) the teacher, unlearn with the configured
// method, evaluate accuracies, OU@eps (PGD) and Gaussian-OU, run the
// prototypical attack with alpha tuning, and persist every artifact under
// <out>/<method>-seed<seed>-<hash8>/. Returns the unlearned-model report.
MetricsReport run_experiment(const ExperimentConfig& cfg);

// Directory of the run that run_experiment(cfg) writes.
std::filesystem::path run_directory(const ExperimentConfig& cfg);

struct SweepPoint {
  std::map<std::string, std::string> coords;
  std::optional<MetricsReport> report;
  std::string error;  // set when the point failed
};

// Cartesian sweep over config keys. Failures are recorded per point and do
// not stop the sweep. Writes sweep_summary.csv and, when a numeric axis is
// present, an OU line plot under out_dir.
std::vector<SweepPoint> sweep(
    const KeyValueConfig& base,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    const std::filesystem::path& out_dir);

// Table-1-shaped summary: machine-readable CSV plus an aligned text table.
void write_report_table(std::span<const MetricsReport> reports,
                        const std::filesystem::path& txt_path,
                        const std::filesystem::path& csv_path);

MetricsReport load_report(const std::filesystem::path& metrics_json);

struct ExportStats {
  i64 points = 0;
  double forget_mean_cosine = 0.0;  // dispersion statistic on raw embeddings
};

// Projects test-split embeddings to 2-D (PCA; pass-through when the
// embedding is already 2-D) and writes <prefix>.csv plus <prefix>.svg with
// forget points flagged.
ExportStats export_embeddings_2d(const Classifier<float>& model,
                                 const Dataset& data, const ForgetSpec& forget,
                                 const std::filesystem::path& out_prefix);

// Teacher training on the full train split; logs per-class train accuracy.
Classifier<float> train_original(const Dataset& data,
                                 std::shared_ptr<const FeatureArch<float>> arch,
                                 const OptimConfig& optim, u64 seed,
                                 std::vector<double>* per_class_train_acc = nullptr);

}  // namespace spotter
