#include "spotter/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "spotter/checkpoint.hpp"
#include "spotter/svg.hpp"

namespace spotter {

namespace {

std::optional<double> class_restricted_accuracy(const Classifier<float>& model,
                                                const Matrix<float>& xs,
                                                const std::vector<int>& ys,
                                                const ForgetSpec& forget,
                                                bool want_forget) {
  std::vector<i64> idx;
  for (i64 i = 0; i < static_cast<i64>(ys.size()); ++i)
    if (forget.class_is_forgotten(ys[i]) == want_forget) idx.push_back(i);
  if (idx.empty()) return std::nullopt;
  return subset_accuracy(model, xs, ys, idx);
}

nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> opt_from_json(const nlohmann::json& j,
                                    const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

bool opt_equal(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a.has_value() || *a == *b;
}

std::string fmt_cell(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

}  // namespace

Accuracies evaluate_accuracies(const Classifier<float>& model,
                               const Dataset& data, const ForgetSpec& forget) {
  Accuracies acc;
  acc.acc_f = class_restricted_accuracy(model, data.x_train, data.y_train,
                                        forget, true);
  acc.acc_r = class_restricted_accuracy(model, data.x_train, data.y_train,
                                        forget, false);
  acc.acc_ft =
      class_restricted_accuracy(model, data.x_test, data.y_test, forget, true);
  acc.acc_rt = class_restricted_accuracy(model, data.x_test, data.y_test,
                                         forget, false);
  return acc;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json alpha = nlohmann::json::array();
  for (const auto& rec : alpha_table) {
    alpha.push_back({{"alpha", rec.alpha},
                     {"proto_acc_f", rec.proto_acc_f},
                     {"acc_r_star", rec.acc_r_star},
                     {"feasible", rec.feasible}});
  }
  return {
      {"format", "spotter-metrics-v1"},
      {"method", method},
      {"seed", seed},
      {"config_hash", config_hash},
      {"acc_f", opt_json(acc_f)},
      {"acc_r", opt_json(acc_r)},
      {"acc_ft", opt_json(acc_ft)},
      {"acc_rt", opt_json(acc_rt)},
      {"ou_eps", opt_json(ou_eps)},
      {"gaussian_ou", opt_json(gaussian_ou)},
      {"proto_acc_f", opt_json(proto_acc_f)},
      {"acc_r_star", opt_json(acc_r_star)},
      {"chosen_alpha", opt_json(chosen_alpha)},
      {"alpha_constraint_unsatisfied", alpha_constraint_unsatisfied},
      {"alpha_table", std::move(alpha)},
      {"accounting",
       {{"forget_train_reads", unlearn_accounting.forget_train_reads},
        {"retain_train_reads", unlearn_accounting.retain_train_reads}}},
      {"eval_perturb_stream", eval_perturb_stream},
      {"train_perturb_stream", train_perturb_stream},
      {"wall_time_sec", wall_time_sec},
  };
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  require(j.at("format") == "spotter-metrics-v1", ErrorKind::Io,
          "unknown metrics format");
  MetricsReport r;
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<u64>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.acc_f = opt_from_json(j, "acc_f");
  r.acc_r = opt_from_json(j, "acc_r");
  r.acc_ft = opt_from_json(j, "acc_ft");
  r.acc_rt = opt_from_json(j, "acc_rt");
  r.ou_eps = opt_from_json(j, "ou_eps");
  r.gaussian_ou = opt_from_json(j, "gaussian_ou");
  r.proto_acc_f = opt_from_json(j, "proto_acc_f");
  r.acc_r_star = opt_from_json(j, "acc_r_star");
  r.chosen_alpha = opt_from_json(j, "chosen_alpha");
  r.alpha_constraint_unsatisfied =
      j.at("alpha_constraint_unsatisfied").get<bool>();
  for (const auto& rec : j.at("alpha_table")) {
    r.alpha_table.push_back({rec.at("alpha").get<double>(),
                             rec.at("proto_acc_f").get<double>(),
                             rec.at("acc_r_star").get<double>(),
                             rec.at("feasible").get<bool>()});
  }
  r.unlearn_accounting.forget_train_reads =
      j.at("accounting").at("forget_train_reads").get<i64>();
  r.unlearn_accounting.retain_train_reads =
      j.at("accounting").at("retain_train_reads").get<i64>();
  r.eval_perturb_stream = j.at("eval_perturb_stream").get<u64>();
  r.train_perturb_stream = j.at("train_perturb_stream").get<u64>();
  r.wall_time_sec = j.at("wall_time_sec").get<double>();
  return r;
}

bool MetricsReport::values_equal(const MetricsReport& other) const {
  if (method != other.method || seed != other.seed ||
      config_hash != other.config_hash)
    return false;
  if (!opt_equal(acc_f, other.acc_f) || !opt_equal(acc_r, other.acc_r) ||
      !opt_equal(acc_ft, other.acc_ft) || !opt_equal(acc_rt, other.acc_rt) ||
      !opt_equal(ou_eps, other.ou_eps) ||
      !opt_equal(gaussian_ou, other.gaussian_ou) ||
      !opt_equal(proto_acc_f, other.proto_acc_f) ||
      !opt_equal(acc_r_star, other.acc_r_star) ||
      !opt_equal(chosen_alpha, other.chosen_alpha))
    return false;
  if (alpha_constraint_unsatisfied != other.alpha_constraint_unsatisfied)
    return false;
  if (alpha_table.size() != other.alpha_table.size()) return false;
  for (std::size_t i = 0; i < alpha_table.size(); ++i) {
    const auto& a = alpha_table[i];
    const auto& b = other.alpha_table[i];
    if (a.alpha != b.alpha || a.proto_acc_f != b.proto_acc_f ||
        a.acc_r_star != b.acc_r_star || a.feasible != b.feasible)
      return false;
  }
  if (unlearn_accounting.forget_train_reads !=
          other.unlearn_accounting.forget_train_reads ||
      unlearn_accounting.retain_train_reads !=
          other.unlearn_accounting.retain_train_reads)
    return false;
  return eval_perturb_stream == other.eval_perturb_stream &&
         train_perturb_stream == other.train_perturb_stream;
}

Classifier<float> train_original(const Dataset& data,
                                 std::shared_ptr<const FeatureArch<float>> arch,
                                 const OptimConfig& optim, u64 seed,
                                 std::vector<double>* per_class_train_acc) {
  Classifier<float> model(std::move(arch), data.num_classes);
  Rng init_rng(substream(seed, kStreamInit, 0));
  model.init(init_rng);
  if (optim.epochs > 0) {
    std::vector<i64> all(data.x_train.rows);
    for (i64 i = 0; i < data.x_train.rows; ++i) all[i] = i;
    ForgetSpec none;  // accounting disabled for original training
    none.is_forget.assign(data.x_train.rows, 0);
    fit_cross_entropy(model, data, none, all, optim, seed, nullptr);
  }
  if (per_class_train_acc != nullptr) {
    per_class_train_acc->assign(data.num_classes, 0.0);
    for (int c = 0; c < data.num_classes; ++c) {
      std::vector<i64> idx;
      for (i64 i = 0; i < static_cast<i64>(data.y_train.size()); ++i)
        if (data.y_train[i] == c) idx.push_back(i);
      (*per_class_train_acc)[c] =
          idx.empty() ? 0.0
                      : subset_accuracy(model, data.x_train, data.y_train, idx);
    }
  }
  return model;
}

std::filesystem::path run_directory(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) /
         (std::string(to_string(cfg.method)) + "-seed" +
          std::to_string(cfg.seed) + "-" + cfg.hash_string().substr(0, 8));
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

nlohmann::json trajectory_json(const UnlearnRun& run) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& s : run.trajectory) {
    epochs.push_back({{"epoch", s.epoch},
                      {"mean_total", s.mean_total},
                      {"mean_base", s.mean_base},
                      {"mean_over", s.mean_over},
                      {"mean_sim", s.mean_sim},
                      {"forget_train_acc", s.forget_train_acc}});
  }
  return epochs;
}

void write_alpha_csv(const std::filesystem::path& path,
                     std::span<const AlphaRecord> records) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << "alpha,proto_acc_f,acc_r_star,feasible\n";
  for (const auto& r : records) {
    out << r.alpha << "," << r.proto_acc_f << "," << r.acc_r_star << ","
        << (r.feasible ? 1 : 0) << "\n";
  }
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.threads != 0) par::set_max_threads(cfg.threads);

  const std::filesystem::path dir = run_directory(cfg);
  std::filesystem::create_directories(dir);
  cfg.to_kv().write(dir / "config.resolved");

  Dataset data = cfg.make_dataset();
  ForgetSpec forget = forget_by_classes(data, cfg.forget_classes);

  // teacher
  Classifier<float> teacher = [&] {
    if (!cfg.teacher_dir.empty()) {
      Classifier<float> m = load_checkpoint<float>(cfg.teacher_dir);
      require(m.input_dim() == data.input_dim &&
                  m.num_classes() == data.num_classes,
              ErrorKind::ShapeMismatch, "teacher checkpoint does not match dataset");
      return m;
    }
    std::vector<double> per_class;
    Classifier<float> m =
        train_original(data, cfg.make_arch(data), cfg.train_optim, cfg.seed,
                       &per_class);
    write_json(dir / "teacher_train_log.json",
               {{"per_class_train_acc", per_class}});
    return m;
  }();
  save_checkpoint(dir / "teacher", teacher,
                  {cfg.seed, cfg.hash_string()});

  // unlearn (or retrain)
  SpotterConfig ucfg = cfg.unlearn;
  ucfg.perturb.bound_lo = data.bound_lo;
  ucfg.perturb.bound_hi = data.bound_hi;
  ucfg.seed = cfg.seed;

  MetricsReport report;
  report.method = to_string(cfg.method);
  report.seed = cfg.seed;
  report.config_hash = cfg.hash_string();

  Classifier<float> student = teacher;
  if (cfg.method == MethodKind::Retrain) {
    DataAccounting acct;
    student = retrain_gold(data, forget, cfg.make_arch(data), cfg.unlearn.optim,
                           cfg.seed, &acct);
    report.unlearn_accounting = acct;
    write_json(dir / "unlearn_run.json",
               {{"method", "retrain"},
                {"accounting",
                 {{"forget_train_reads", acct.forget_train_reads},
                  {"retain_train_reads", acct.retain_train_reads}}}});
  } else {
    UnlearnRun run = run_unlearning(teacher, data, forget, ucfg);
    require(run.teacher_checksum_before == run.teacher_checksum_after,
            ErrorKind::Protocol, "teacher parameters changed during unlearning");
    report.unlearn_accounting = run.accounting;
    report.train_perturb_stream = run.train_perturb_stream;
    write_json(dir / "unlearn_run.json",
               {{"method", to_string(cfg.method)},
                {"lambda1", ucfg.lambda1},
                {"lambda2", ucfg.lambda2},
                {"divergence", to_string(ucfg.loss_divergence)},
                {"seed", cfg.seed},
                {"train_perturb_stream", run.train_perturb_stream},
                {"teacher_checksum", hex64(run.teacher_checksum_before)},
                {"over_batches_skipped", run.over_batches_skipped},
                {"accounting",
                 {{"forget_train_reads", run.accounting.forget_train_reads},
                  {"retain_train_reads", run.accounting.retain_train_reads}}},
                {"trajectory", trajectory_json(run)}});
    student = std::move(run.model_unlearned);
  }
  save_checkpoint(dir / "student", student, {cfg.seed, cfg.hash_string()});

  // accuracies
  Accuracies teacher_acc = evaluate_accuracies(teacher, data, forget);
  Accuracies student_acc = evaluate_accuracies(student, data, forget);
  report.acc_f = student_acc.acc_f;
  report.acc_r = student_acc.acc_r;
  report.acc_ft = student_acc.acc_ft;
  report.acc_rt = student_acc.acc_rt;

  // OU@eps via PGD tube, plus the Gaussian variant; both tubes are built
  // against the original model on the evaluation stream.
  PerturbConfig pgd_cfg = cfg.eval_perturb;
  pgd_cfg.method = PerturbMethod::PGD;
  pgd_cfg.bound_lo = data.bound_lo;
  pgd_cfg.bound_hi = data.bound_hi;
  PerturbedSet tube_pgd =
      epsilon_tube(teacher, data, forget, pgd_cfg, cfg.seed, kStreamEvalPerturb);
  save_perturbed_set(dir / "eval_tube_pgd.json", tube_pgd);
  if (!tube_pgd.items.empty()) {
    report.ou_eps = ou_at_eps(teacher, student, tube_pgd,
                              forget.forget_classes, cfg.eval_divergence)
                        .value;
  }
  PerturbConfig gauss_cfg = pgd_cfg;
  gauss_cfg.method = PerturbMethod::Gaussian;
  gauss_cfg.sigma = cfg.eval_gaussian_sigma;
  PerturbedSet tube_gauss = epsilon_tube(teacher, data, forget, gauss_cfg,
                                         cfg.seed, kStreamEvalPerturb);
  save_perturbed_set(dir / "eval_tube_gaussian.json", tube_gauss);
  if (!tube_gauss.items.empty()) {
    report.gaussian_ou = ou_at_eps(teacher, student, tube_gauss,
                                   forget.forget_classes, cfg.eval_divergence)
                             .value;
  }

  // prototypical relearning attack with alpha tuning (or a fixed alpha)
  std::map<int, Matrix<float>> support =
      draw_support(data, forget, cfg.attack.k, cfg.seed);
  if (cfg.fixed_alpha) {
    AttackConfig point = cfg.attack;
    point.alpha = *cfg.fixed_alpha;
    Classifier<float> patched = prototypical_attack(student, support, point);
    AlphaRecord rec;
    rec.alpha = point.alpha;
    rec.proto_acc_f = subset_accuracy(patched, data.x_train, data.y_train,
                                      forget.forget_indices);
    rec.acc_r_star = subset_accuracy(patched, data.x_train, data.y_train,
                                     forget.retain_indices);
    const double base_acc_r = subset_accuracy(student, data.x_train,
                                              data.y_train, forget.retain_indices);
    rec.feasible = rec.acc_r_star >= base_acc_r - cfg.attack_max_drop;
    report.chosen_alpha = rec.alpha;
    report.proto_acc_f = rec.proto_acc_f;
    report.acc_r_star = rec.acc_r_star;
    report.alpha_table = {rec};
  } else {
    AlphaTuneResult tuned =
        tune_alpha(student, support, data, forget, cfg.alpha_grid, cfg.attack,
                   cfg.attack_max_drop);
    report.chosen_alpha = tuned.chosen_alpha;
    report.alpha_constraint_unsatisfied = tuned.constraint_unsatisfied;
    report.alpha_table = tuned.records;
    for (const auto& rec : tuned.records) {
      if (rec.alpha == tuned.chosen_alpha) {
        report.proto_acc_f = rec.proto_acc_f;
        report.acc_r_star = rec.acc_r_star;
        break;
      }
    }
    if (!report.proto_acc_f) {
      // chosen alpha (0) was not on the grid: evaluate it directly
      AttackConfig point = cfg.attack;
      point.alpha = 0.0;
      Classifier<float> patched = prototypical_attack(student, support, point);
      report.proto_acc_f = subset_accuracy(patched, data.x_train, data.y_train,
                                           forget.forget_indices);
      report.acc_r_star = subset_accuracy(patched, data.x_train, data.y_train,
                                          forget.retain_indices);
    }
  }
  write_alpha_csv(dir / "alpha_table.csv", report.alpha_table);

  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_json(dir / "metrics.json", report.to_json());

  // companion row for the original model ("-" entries stay unset)
  MetricsReport original;
  original.method = "original";
  original.seed = cfg.seed;
  original.config_hash = report.config_hash;
  original.acc_f = teacher_acc.acc_f;
  original.acc_r = teacher_acc.acc_r;
  original.acc_ft = teacher_acc.acc_ft;
  original.acc_rt = teacher_acc.acc_rt;
  write_json(dir / "original_metrics.json", original.to_json());

  return report;
}

std::vector<SweepPoint> sweep(
    const KeyValueConfig& base,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    const std::filesystem::path& out_dir) {
  require(!grid.empty(), ErrorKind::Config, "sweep grid is empty");
  for (const auto& [key, values] : grid)
    require(!values.empty(), ErrorKind::Config,
            "sweep grid key " + key + " has no values");

  std::filesystem::create_directories(out_dir);
  std::vector<SweepPoint> points;
  std::vector<std::size_t> at(grid.size(), 0);
  int point_index = 0;
  for (;;) {
    SweepPoint point;
    KeyValueConfig kv = base;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      kv.set(grid[g].first, grid[g].second[at[g]]);
      point.coords[grid[g].first] = grid[g].second[at[g]];
    }
    kv.set("out", (out_dir / ("point-" + std::to_string(point_index))).string());
    try {
      ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
      point.report = run_experiment(cfg);
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    points.push_back(std::move(point));
    ++point_index;

    std::size_t g = 0;
    for (; g < grid.size(); ++g) {
      if (++at[g] < grid[g].second.size()) break;
      at[g] = 0;
    }
    if (g == grid.size()) break;
  }

  // aggregate CSV
  {
    std::ofstream out(out_dir / "sweep_summary.csv");
    require(out.good(), ErrorKind::Io, "cannot write sweep summary");
    out << "point";
    for (const auto& [key, _] : grid) out << "," << key;
    out << ",method,seed,acc_f,acc_r,acc_ft,acc_rt,ou_eps,gaussian_ou,"
           "proto_acc_f,acc_r_star,chosen_alpha,error\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      out << i;
      for (const auto& [key, _] : grid) out << "," << p.coords.at(key);
      if (p.report) {
        const auto& r = *p.report;
        auto cell = [](const std::optional<double>& v) {
          return v ? std::to_string(*v) : std::string("");
        };
        out << "," << r.method << "," << r.seed << "," << cell(r.acc_f) << ","
            << cell(r.acc_r) << "," << cell(r.acc_ft) << "," << cell(r.acc_rt)
            << "," << cell(r.ou_eps) << "," << cell(r.gaussian_ou) << ","
            << cell(r.proto_acc_f) << "," << cell(r.acc_r_star) << ","
            << cell(r.chosen_alpha) << ",";
      } else {
        out << ",,,,,,,,,,,," << "\"" << p.error << "\"";
      }
      out << "\n";
    }
  }

  // line plots over the first numeric axis, one series per remaining coord
  auto numeric = [](const std::string& s) {
    try {
      std::size_t used = 0;
      std::stod(s, &used);
      return used == s.size();
    } catch (...) {
      return false;
    }
  };
  std::string x_key;
  for (const auto& [key, values] : grid) {
    if (values.size() >= 2 &&
        std::all_of(values.begin(), values.end(), numeric)) {
      x_key = key;
      break;
    }
  }
  if (!x_key.empty()) {
    auto plot_metric = [&](const std::string& name, auto getter) {
      std::map<std::string, svg::Series> series;
      for (const auto& p : points) {
        if (!p.report) continue;
        std::optional<double> y = getter(*p.report);
        if (!y) continue;
        std::string label;
        for (const auto& [k, v] : p.coords)
          if (k != x_key) label += (label.empty() ? "" : " ") + k + "=" + v;
        if (label.empty()) label = p.report->method;
        auto& s = series[label];
        s.label = label;
        s.x.push_back(std::stod(p.coords.at(x_key)));
        s.y.push_back(*y);
      }
      if (series.empty()) return;
      std::vector<svg::Series> list;
      for (auto& [_, s] : series) list.push_back(std::move(s));
      svg::write_line_plot(out_dir / ("sweep_" + name + ".svg"), list, x_key,
                           name, name + " vs " + x_key);
    };
    plot_metric("ou_eps", [](const MetricsReport& r) { return r.ou_eps; });
    plot_metric("proto_acc_f",
                [](const MetricsReport& r) { return r.proto_acc_f; });
    plot_metric("acc_rt", [](const MetricsReport& r) { return r.acc_rt; });
  }
  return points;
}

void write_report_table(std::span<const MetricsReport> reports,
                        const std::filesystem::path& txt_path,
                        const std::filesystem::path& csv_path) {
  require(!reports.empty(), ErrorKind::EmptyData, "no reports to summarize");

  {
    std::ofstream csv(csv_path);
    require(csv.good(), ErrorKind::Io, "cannot write " + csv_path.string());
    csv << "method,seed,config_hash,acc_f,acc_r,acc_ft,acc_rt,ou_eps,"
           "gaussian_ou,proto_acc_f,acc_r_star,chosen_alpha\n";
    csv.precision(17);
    auto cell = [&csv](const std::optional<double>& v) {
      if (v) csv << *v;
    };
    for (const auto& r : reports) {
      csv << r.method << "," << r.seed << "," << r.config_hash << ",";
      cell(r.acc_f); csv << ",";
      cell(r.acc_r); csv << ",";
      cell(r.acc_ft); csv << ",";
      cell(r.acc_rt); csv << ",";
      cell(r.ou_eps); csv << ",";
      cell(r.gaussian_ou); csv << ",";
      cell(r.proto_acc_f); csv << ",";
      cell(r.acc_r_star); csv << ",";
      cell(r.chosen_alpha); csv << "\n";
    }
  }

  const std::vector<std::string> headers = {"Method",  "Acc_f",       "Acc_r",
                                            "Acc_ft",  "Acc_rt",      "OU@eps",
                                            "Proto-Acc_f", "Acc*_r"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.method, fmt_cell(r.acc_f), fmt_cell(r.acc_r),
                    fmt_cell(r.acc_ft), fmt_cell(r.acc_rt), fmt_cell(r.ou_eps),
                    fmt_cell(r.proto_acc_f), fmt_cell(r.acc_r_star)});
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ofstream txt(txt_path);
  require(txt.good(), ErrorKind::Io, "cannot write " + txt_path.string());
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      txt << std::left << std::setw(static_cast<int>(width[c]) + 2) << row[c];
    }
    txt << "\n";
  };
  emit(headers);
  for (const auto& row : rows) emit(row);
}

MetricsReport load_report(const std::filesystem::path& metrics_json) {
  std::ifstream in(metrics_json);
  require(in.good(), ErrorKind::Io, "cannot read " + metrics_json.string());
  return MetricsReport::from_json(nlohmann::json::parse(in));
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns
// eigenvalues and stores eigenvectors as columns of v.
void jacobi_eigen(Matrix<double>& a, Matrix<double>& v,
                  std::vector<double>& eigvals) {
  const i64 n = a.rows;
  v = Matrix<double>(n, n);
  for (i64 i = 0; i < n; ++i) v.at(i, i) = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (i64 p = 0; p < n; ++p)
      for (i64 q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-20) break;
    for (i64 p = 0; p < n; ++p) {
      for (i64 q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) < 1e-30) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (i64 k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (i64 k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (i64 k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eigvals.resize(n);
  for (i64 i = 0; i < n; ++i) eigvals[i] = a.at(i, i);
}

}  // namespace

ExportStats export_embeddings_2d(const Classifier<float>& model,
                                 const Dataset& data, const ForgetSpec& forget,
                                 const std::filesystem::path& out_prefix) {
  Matrix<float> emb = model.features(data.x_test);
  const i64 n = emb.rows;
  const i64 d = emb.cols;

  Matrix<double> proj(n, 2);
  if (d == 2) {
    for (i64 i = 0; i < n; ++i) {
      proj.at(i, 0) = emb.at(i, 0);
      proj.at(i, 1) = emb.at(i, 1);
    }
  } else {
    // PCA to the top two components (deterministic)
    std::vector<double> mean(d, 0.0);
    for (i64 i = 0; i < n; ++i)
      for (i64 k = 0; k < d; ++k) mean[k] += emb.at(i, k);
    for (auto& m : mean) m /= static_cast<double>(n);
    Matrix<double> cov(d, d);
    for (i64 i = 0; i < n; ++i) {
      for (i64 a = 0; a < d; ++a) {
        const double va = emb.at(i, a) - mean[a];
        for (i64 b = a; b < d; ++b)
          cov.at(a, b) += va * (emb.at(i, b) - mean[b]);
      }
    }
    for (i64 a = 0; a < d; ++a)
      for (i64 b = 0; b < a; ++b) cov.at(a, b) = cov.at(b, a);
    for (auto& v : cov.data) v /= static_cast<double>(n);

    Matrix<double> vecs;
    std::vector<double> vals;
    jacobi_eigen(cov, vecs, vals);
    i64 top1 = 0, top2 = 1;
    if (vals[top2] > vals[top1]) std::swap(top1, top2);
    for (i64 k = 2; k < d; ++k) {
      if (vals[k] > vals[top1]) {
        top2 = top1;
        top1 = k;
      } else if (vals[k] > vals[top2]) {
        top2 = k;
      }
    }
    for (i64 i = 0; i < n; ++i) {
      double p0 = 0.0, p1 = 0.0;
      for (i64 k = 0; k < d; ++k) {
        const double centered = emb.at(i, k) - mean[k];
        p0 += centered * vecs.at(k, top1);
        p1 += centered * vecs.at(k, top2);
      }
      proj.at(i, 0) = p0;
      proj.at(i, 1) = p1;
    }
  }

  std::ofstream csv(out_prefix.string() + ".csv");
  require(csv.good(), ErrorKind::Io, "cannot write embedding csv");
  csv.precision(10);
  csv << "x,y,class,is_forget\n";
  std::vector<svg::ScatterPoint> points(n);
  for (i64 i = 0; i < n; ++i) {
    const bool is_forget = forget.class_is_forgotten(data.y_test[i]);
    csv << proj.at(i, 0) << "," << proj.at(i, 1) << "," << data.y_test[i]
        << "," << (is_forget ? 1 : 0) << "\n";
    points[i] = {proj.at(i, 0), proj.at(i, 1), is_forget};
  }
  svg::write_scatter(out_prefix.string() + ".svg", points,
                     "embedding projection (forget classes in red)");

  ExportStats stats;
  stats.points = n;
  stats.forget_mean_cosine = dispersion_from_embeddings<float>(
      emb, data.y_test, forget.forget_classes);
  return stats;
}

}  // namespace spotter
