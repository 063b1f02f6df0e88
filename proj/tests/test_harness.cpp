#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spotter/harness.hpp"
#include "support.hpp"

using namespace spotter;
using spotter::testing::identity_model;

namespace {

KeyValueConfig tiny_experiment_kv(const std::string& method, u64 seed,
                                  const std::filesystem::path& out) {
  KeyValueConfig kv;
  kv.set("method", method);
  kv.set("seed", std::to_string(seed));
  kv.set("out", out.string());
  kv.set("dataset.classes", "3");
  kv.set("dataset.train_per_class", "40");
  kv.set("dataset.test_per_class", "15");
  kv.set("dataset.dim", "8");
  kv.set("arch.hidden", "16");
  kv.set("train.epochs", "10");
  kv.set("train.lr", "0.01");
  kv.set("train.batch", "32");
  kv.set("unlearn.epochs", "3");
  kv.set("unlearn.batch", "32");
  kv.set("attack.alpha_grid", "1.0,0.5,0.0");
  return kv;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("synthetic blobs are deterministic and well separated") {
  BlobsSpec spec;
  spec.classes = 5;
  spec.train_per_class = 50;
  spec.test_per_class = 20;
  spec.dim = 20;
  Dataset a = make_blobs(spec, 9);
  Dataset b = make_blobs(spec, 9);
  CHECK(a.x_train.data == b.x_train.data);
  CHECK(a.x_test.data == b.x_test.data);
  CHECK(a.y_train == b.y_train);

  Dataset c = make_blobs(spec, 10);
  CHECK(a.x_train.data != c.x_train.data);

  SUBCASE("zero separation still builds") {
    spec.separation = 0.0;
    Dataset d = make_blobs(spec, 1);
    CHECK(d.x_train.rows == 250);
  }

  SUBCASE("a linear probe reaches 95% test accuracy") {
    auto probe = identity_model<float>(
        std::vector<std::vector<float>>(5, std::vector<float>(20, 0.0f)),
        std::vector<float>(5, 0.0f));
    ForgetSpec none;
    none.is_forget.assign(a.x_train.rows, 0);
    std::vector<i64> all(a.x_train.rows);
    for (i64 i = 0; i < a.x_train.rows; ++i) all[i] = i;
    fit_cross_entropy(probe, a, none, all, {OptimizerKind::Adam, 1e-2, 20, 32},
                      3, nullptr);
    std::vector<i64> test_idx(a.x_test.rows);
    for (i64 i = 0; i < a.x_test.rows; ++i) test_idx[i] = i;
    CHECK(subset_accuracy(probe, a.x_test, a.y_test, test_idx) >= 95.0);
  }
}

TEST_CASE("pattern images stay in bounds and are deterministic") {
  ImagesSpec spec;
  spec.classes = 4;
  spec.train_per_class = 10;
  spec.test_per_class = 4;
  spec.size = 8;
  Dataset a = make_pattern_images(spec, 3);
  Dataset b = make_pattern_images(spec, 3);
  CHECK(a.x_train.data == b.x_train.data);
  CHECK(a.bounded());
  for (float v : a.x_train.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(a.image_size == 8);
}

TEST_CASE("train_original reaches high train accuracy; zero epochs is chance") {
  BlobsSpec spec;
  spec.classes = 5;
  spec.train_per_class = 100;
  spec.test_per_class = 30;
  spec.dim = 20;
  Dataset data = make_blobs(spec, 4);

  auto arch = std::make_shared<MlpFeatures<float>>(20, 32);
  std::vector<double> per_class;
  Classifier<float> teacher =
      train_original(data, arch, {OptimizerKind::Adam, 1e-2, 20, 64}, 4,
                     &per_class);
  std::vector<i64> all(data.x_train.rows);
  for (i64 i = 0; i < data.x_train.rows; ++i) all[i] = i;
  CHECK(subset_accuracy(teacher, data.x_train, data.y_train, all) >= 99.0);
  CHECK(per_class.size() == 5);
  for (double acc : per_class) CHECK(acc >= 95.0);

  Classifier<float> untrained =
      train_original(data, arch, {OptimizerKind::Adam, 1e-2, 0, 64}, 4, nullptr);
  std::vector<i64> test_idx(data.x_test.rows);
  for (i64 i = 0; i < data.x_test.rows; ++i) test_idx[i] = i;
  const double chance =
      subset_accuracy(untrained, data.x_test, data.y_test, test_idx);
  CHECK(std::abs(chance - 20.0) <= 15.0);
}

TEST_CASE("evaluate_accuracies counts per restriction") {
  Dataset data;
  data.num_classes = 3;
  data.input_dim = 2;
  data.x_train = Matrix<float>(6, 2);
  data.y_train = {0, 0, 1, 1, 2, 2};
  data.x_test = Matrix<float>(3, 2);
  data.y_test = {1, 1, 2};  // no class-0 test samples
  for (i64 i = 0; i < 6; ++i) data.x_train.at(i, 0) = static_cast<float>(i);
  ForgetSpec forget = forget_by_classes(data, {0});

  // constant predictor of retain class 1
  auto model = identity_model<float>({{0, 0}, {0, 1000}, {0, 0}},
                                     {0.0f, 1.0f, 0.0f});
  Accuracies acc = evaluate_accuracies(model, data, forget);
  REQUIRE(acc.acc_f.has_value());
  REQUIRE(acc.acc_r.has_value());
  CHECK(*acc.acc_f == 0.0);
  CHECK(*acc.acc_r == doctest::Approx(50.0));  // class 1 is half the retain split
  CHECK_FALSE(acc.acc_ft.has_value());         // empty forget test restriction
  REQUIRE(acc.acc_rt.has_value());
}

TEST_CASE("config parsing, defaults, and hashing") {
  KeyValueConfig kv = KeyValueConfig::from_text(
      "# comment\n"
      "seed = 7\n"
      "method = neggrad\n"
      "unlearn.perturb.eps = 0.05\n"
      "attack.alpha_grid = 1.0, 0.5, 0.0\n");
  ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
  CHECK(cfg.seed == 7);
  CHECK(cfg.method == MethodKind::NegGrad);
  CHECK(cfg.unlearn.perturb.epsilon == 0.05);
  CHECK(cfg.unlearn.lambda1 == 1.0);  // pure baseline default
  CHECK(cfg.unlearn.lambda2 == 0.0);
  CHECK(cfg.alpha_grid == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(cfg.eval_perturb.epsilon == 0.03);
  CHECK(cfg.eval_divergence == DivergenceKind::JS);
  CHECK(cfg.attack.k == 5);

  // spotter picks the composing defaults
  KeyValueConfig kv2;
  ExperimentConfig cfg2 = ExperimentConfig::from_kv(kv2);
  CHECK(cfg2.unlearn.lambda1 == 0.7);
  CHECK(cfg2.unlearn.lambda2 == 1.0);

  // resolved output re-parses to the same semantic hash
  KeyValueConfig resolved = cfg.to_kv();
  KeyValueConfig reparsed = KeyValueConfig::from_text(resolved.resolved_text());
  CHECK(resolved.semantic_hash() == reparsed.semantic_hash());

  // out and threads are not semantic
  KeyValueConfig moved = resolved;
  moved.set("out", "elsewhere");
  moved.set("threads", "4");
  CHECK(moved.semantic_hash() == resolved.semantic_hash());

  CHECK_THROWS_AS((void)KeyValueConfig::from_text("novalue\n"), Error);
}

TEST_CASE("metrics report JSON round-trips with identical values") {
  MetricsReport r;
  r.method = "spotter";
  r.seed = 3;
  r.config_hash = "0123456789abcdef";
  r.acc_f = 0.5;
  r.acc_rt = 99.25;
  r.ou_eps = 0.0421875;
  r.proto_acc_f = 7.25;
  r.chosen_alpha = 0.8;
  r.alpha_table = {{1.0, 80.0, 90.0, false}, {0.8, 7.25, 99.5, true}};
  r.unlearn_accounting.forget_train_reads = 1234;
  r.wall_time_sec = 1.5;

  MetricsReport back = MetricsReport::from_json(r.to_json());
  CHECK(back.values_equal(r));
  CHECK_FALSE(back.acc_r.has_value());

  MetricsReport changed = back;
  changed.ou_eps = 0.05;
  CHECK_FALSE(changed.values_equal(r));
}

TEST_CASE("report table columns and '-' rendering") {
  TempDir tmp("spotter_report_test");
  MetricsReport original;
  original.method = "original";
  original.seed = 1;
  original.acc_f = 100.0;
  original.acc_r = 100.0;
  original.acc_ft = 94.5;
  original.acc_rt = 94.0;
  MetricsReport run;
  run.method = "spotter";
  run.seed = 1;
  run.acc_f = 0.0;
  run.acc_r = 99.9;
  run.acc_ft = 0.0;
  run.acc_rt = 93.8;
  run.ou_eps = 0.0228;
  run.proto_acc_f = 0.24;
  run.acc_r_star = 99.96;

  std::vector<MetricsReport> rows{original, run};
  write_report_table(rows, tmp.path / "summary.txt", tmp.path / "summary.csv");

  std::ifstream txt(tmp.path / "summary.txt");
  std::string header;
  std::getline(txt, header);
  for (const char* col : {"Method", "Acc_f", "Acc_r", "Acc_ft", "Acc_rt",
                          "OU@eps", "Proto-Acc_f", "Acc*_r"}) {
    CHECK(header.find(col) != std::string::npos);
  }
  std::string original_row;
  std::getline(txt, original_row);
  CHECK(original_row.find("-") != std::string::npos);  // missing OU cell
}

TEST_CASE("embedding export: 2-D passthrough and point counts") {
  TempDir tmp("spotter_export_test");
  BlobsSpec spec;
  spec.classes = 3;
  spec.train_per_class = 20;
  spec.test_per_class = 10;
  spec.dim = 2;
  Dataset data = make_blobs(spec, 5);
  ForgetSpec forget = forget_by_classes(data, {0});
  auto model = identity_model<float>({{1, 0}, {0, 1}, {1, 1}}, {0, 0, 0});

  ExportStats stats =
      export_embeddings_2d(model, data, forget, tmp.path / "emb");
  CHECK(stats.points == data.x_test.rows);

  std::ifstream csv(tmp.path / "emb.csv");
  std::string line;
  std::getline(csv, line);  // header
  i64 rows = 0;
  double first_x = 0.0, first_y = 0.0;
  while (std::getline(csv, line)) {
    if (rows == 0) {
      std::sscanf(line.c_str(), "%lf,%lf", &first_x, &first_y);
    }
    ++rows;
  }
  CHECK(rows == data.x_test.rows);
  // identity features in 2-D pass through unprojected
  CHECK(first_x == doctest::Approx(data.x_test.at(0, 0)).epsilon(1e-6));
  CHECK(first_y == doctest::Approx(data.x_test.at(0, 1)).epsilon(1e-6));
  CHECK(std::filesystem::exists(tmp.path / "emb.svg"));
}

TEST_CASE("run_experiment is deterministic and writes its artifacts") {
  TempDir tmp("spotter_runexp_test");
  KeyValueConfig kv = tiny_experiment_kv("spotter", 5, tmp.path / "a");
  ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
  MetricsReport r1 = run_experiment(cfg);

  KeyValueConfig kv2 = tiny_experiment_kv("spotter", 5, tmp.path / "b");
  MetricsReport r2 = run_experiment(ExperimentConfig::from_kv(kv2));
  CHECK(r1.values_equal(r2));

  const auto dir = run_directory(cfg);
  for (const char* name :
       {"config.resolved", "metrics.json", "original_metrics.json",
        "unlearn_run.json", "alpha_table.csv", "eval_tube_pgd.json",
        "eval_tube_gaussian.json"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  CHECK(std::filesystem::exists(dir / "teacher" / "params.npy"));
  CHECK(std::filesystem::exists(dir / "student" / "params.npy"));

  MetricsReport loaded = load_report(dir / "metrics.json");
  CHECK(loaded.values_equal(r1));

  // evaluation and training perturbation streams must differ
  CHECK(r1.eval_perturb_stream != r1.train_perturb_stream);

  // retrain accounting: zero forget reads
  KeyValueConfig kv3 = tiny_experiment_kv("retrain", 5, tmp.path / "c");
  MetricsReport r3 = run_experiment(ExperimentConfig::from_kv(kv3));
  CHECK(r3.unlearn_accounting.forget_train_reads == 0);
  CHECK(r3.unlearn_accounting.retain_train_reads > 0);
}

TEST_CASE("a singleton sweep equals run_experiment") {
  TempDir tmp("spotter_sweep_test");
  KeyValueConfig kv = tiny_experiment_kv("neggrad", 6, tmp.path / "direct");
  MetricsReport direct = run_experiment(ExperimentConfig::from_kv(kv));

  auto points = sweep(kv, {{"unlearn.lambda1", {"1"}}}, tmp.path / "swept");
  REQUIRE(points.size() == 1);
  REQUIRE(points[0].report.has_value());
  const MetricsReport& swept = *points[0].report;
  // identical semantics up to the output directory
  CHECK(swept.method == direct.method);
  CHECK(swept.acc_f == direct.acc_f);
  CHECK(swept.ou_eps == direct.ou_eps);
  CHECK(swept.proto_acc_f == direct.proto_acc_f);
  CHECK(std::filesystem::exists(tmp.path / "swept" / "sweep_summary.csv"));
}

TEST_CASE("sweep records per-point failures and continues") {
  TempDir tmp("spotter_sweep_fail_test");
  KeyValueConfig kv = tiny_experiment_kv("spotter", 7, tmp.path / "x");
  auto points = sweep(kv, {{"unlearn.lambda1", {"2.0", "1.0"}}},
                      tmp.path / "swept");
  REQUIRE(points.size() == 2);
  CHECK_FALSE(points[0].report.has_value());
  CHECK_FALSE(points[0].error.empty());
  CHECK(points[1].report.has_value());
}
