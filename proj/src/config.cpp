#include "spotter/config.hpp"

#include <fstream>
#include <sstream>

namespace spotter {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    require(used == v.size(), ErrorKind::Config,
            "bad numeric value for " + key + ": " + v);
    return d;
  } catch (const Error&) {
    throw;
  } catch (...) {
    raise(ErrorKind::Config, "bad numeric value for " + key + ": " + v);
  }
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

KeyValueConfig KeyValueConfig::from_text(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Config,
            "config line " + std::to_string(lineno) + " has no '='");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorKind::Config,
            "config line " + std::to_string(lineno) + " has an empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

std::string KeyValueConfig::get_str(const std::string& key,
                                    const std::string& dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : parse_double(key, it->second);
}

int KeyValueConfig::get_int(const std::string& key, int dflt) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  double d = parse_double(key, it->second);
  int i = static_cast<int>(d);
  require(static_cast<double>(i) == d, ErrorKind::Config,
          key + " must be an integer");
  return i;
}

u64 KeyValueConfig::get_u64(const std::string& key, u64 dflt) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  try {
    return std::stoull(it->second);
  } catch (...) {
    raise(ErrorKind::Config, "bad integer value for " + key);
  }
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key, const std::vector<double>& dflt) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_double(key, tok));
  }
  require(!out.empty(), ErrorKind::Config, key + " list is empty");
  return out;
}

std::vector<int> KeyValueConfig::get_int_list(
    const std::string& key, const std::vector<int>& dflt) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  std::vector<int> out;
  for (double d : get_double_list(key, {})) {
    int i = static_cast<int>(d);
    require(static_cast<double>(i) == d, ErrorKind::Config,
            key + " must list integers");
    out.push_back(i);
  }
  return out;
}

std::string KeyValueConfig::resolved_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
  return os.str();
}

void KeyValueConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write config " + path.string());
  out << resolved_text();
}

u64 KeyValueConfig::semantic_hash() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) {
    if (k == "out" || k == "threads") continue;
    os << k << "=" << v << "\n";
  }
  return fnv1a64(os.str());
}

const char* to_string(MethodKind m) {
  switch (m) {
    case MethodKind::Spotter: return "spotter";
    case MethodKind::RandomLabel: return "random-label";
    case MethodKind::NegGrad: return "neggrad";
    case MethodKind::Retrain: return "retrain";
  }
  return "?";
}

MethodKind method_from_string(const std::string& s) {
  if (s == "spotter") return MethodKind::Spotter;
  if (s == "random-label") return MethodKind::RandomLabel;
  if (s == "neggrad") return MethodKind::NegGrad;
  if (s == "retrain") return MethodKind::Retrain;
  raise(ErrorKind::Config, "unknown method: " + s);
}

namespace {

DivergenceKind divergence_from_string(const std::string& s) {
  if (s == "kl") return DivergenceKind::KL;
  if (s == "js") return DivergenceKind::JS;
  raise(ErrorKind::Config, "unknown divergence: " + s);
}

PerturbConfig perturb_from_kv(const KeyValueConfig& kv,
                              const std::string& prefix, double default_eps,
                              PerturbMethod default_method) {
  PerturbConfig p;
  p.epsilon = kv.get_double(prefix + ".eps", default_eps);
  p.steps = kv.get_int(prefix + ".steps", 3);
  p.step_size = kv.get_double(prefix + ".step_size", 0.0);
  p.method = perturb_method_from_string(
      kv.get_str(prefix + ".method", to_string(default_method)));
  p.sigma = kv.get_double(prefix + ".sigma", 0.1);
  p.boundary_buffer = kv.get_double(
      prefix + ".beta", std::numeric_limits<double>::infinity());
  return p;
}

void perturb_to_kv(KeyValueConfig& kv, const std::string& prefix,
                   const PerturbConfig& p) {
  kv.set(prefix + ".eps", format_double(p.epsilon));
  kv.set(prefix + ".steps", std::to_string(p.steps));
  kv.set(prefix + ".step_size", format_double(p.step_size));
  kv.set(prefix + ".method", to_string(p.method));
  kv.set(prefix + ".sigma", format_double(p.sigma));
  kv.set(prefix + ".beta", format_double(p.boundary_buffer));
}

OptimConfig optim_from_kv(const KeyValueConfig& kv, const std::string& prefix,
                          const OptimConfig& dflt) {
  OptimConfig o = dflt;
  o.kind = optimizer_from_string(
      kv.get_str(prefix + ".optimizer", to_string(dflt.kind)));
  o.lr = kv.get_double(prefix + ".lr", dflt.lr);
  o.epochs = kv.get_int(prefix + ".epochs", dflt.epochs);
  o.batch = kv.get_int(prefix + ".batch", static_cast<int>(dflt.batch));
  return o;
}

void optim_to_kv(KeyValueConfig& kv, const std::string& prefix,
                 const OptimConfig& o) {
  kv.set(prefix + ".optimizer", to_string(o.kind));
  kv.set(prefix + ".lr", format_double(o.lr));
  kv.set(prefix + ".epochs", std::to_string(o.epochs));
  kv.set(prefix + ".batch", std::to_string(o.batch));
}

std::string join_doubles(std::span<const double> v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << format_double(v[i]);
  }
  return os.str();
}

std::string join_ints(std::span<const int> v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  ExperimentConfig c;
  c.seed = kv.get_u64("seed", 1);
  c.out_dir = kv.get_str("out", "runs");
  c.threads = kv.get_int("threads", 0);
  c.method = method_from_string(kv.get_str("method", "spotter"));

  const std::string dk = kv.get_str("dataset", "blobs");
  if (dk == "blobs") {
    c.dataset_kind = DatasetKind::Blobs;
  } else if (dk == "images") {
    c.dataset_kind = DatasetKind::Images;
  } else {
    raise(ErrorKind::Config, "unknown dataset kind: " + dk);
  }
  c.blobs.classes = kv.get_int("dataset.classes", c.blobs.classes);
  c.blobs.train_per_class =
      kv.get_int("dataset.train_per_class", c.blobs.train_per_class);
  c.blobs.test_per_class =
      kv.get_int("dataset.test_per_class", c.blobs.test_per_class);
  c.blobs.dim = kv.get_int("dataset.dim", c.blobs.dim);
  c.blobs.separation = kv.get_double("dataset.separation", c.blobs.separation);
  c.images.classes = kv.get_int("dataset.classes", c.images.classes);
  c.images.train_per_class =
      kv.get_int("dataset.train_per_class", c.images.train_per_class);
  c.images.test_per_class =
      kv.get_int("dataset.test_per_class", c.images.test_per_class);
  c.images.size = kv.get_int("dataset.image_size", c.images.size);
  c.images.noise = kv.get_double("dataset.noise", c.images.noise);

  c.arch = kv.get_str("arch", c.dataset_kind == DatasetKind::Images ? "conv2"
                                                                    : "mlp");
  c.mlp_hidden = kv.get_int("arch.hidden", c.mlp_hidden);
  c.conv_c1 = kv.get_int("arch.conv_c1", c.conv_c1);
  c.conv_c2 = kv.get_int("arch.conv_c2", c.conv_c2);

  c.forget_classes = kv.get_int_list("forget.classes", c.forget_classes);

  c.train_optim = optim_from_kv(kv, "train", {OptimizerKind::Adam, 1e-3, 30, 64});
  c.teacher_dir = kv.get_str("teacher.dir", "");

  // lambda defaults depend on the method: pure baselines run their own loss
  // alone (lambda1 = 1, lambda2 = 0); explicit keys compose them with the
  // over/dispersion terms.
  const bool pure_baseline = c.method == MethodKind::RandomLabel ||
                             c.method == MethodKind::NegGrad;
  c.unlearn.lambda1 = kv.get_double("unlearn.lambda1",
                                    pure_baseline ? 1.0 : 0.7);
  c.unlearn.lambda2 = kv.get_double("unlearn.lambda2",
                                    pure_baseline ? 0.0 : 1.0);
  c.unlearn.loss_divergence =
      divergence_from_string(kv.get_str("unlearn.divergence", "kl"));
  c.unlearn.perturb =
      perturb_from_kv(kv, "unlearn.perturb", 0.03, PerturbMethod::PGD);
  c.unlearn.optim =
      optim_from_kv(kv, "unlearn", {OptimizerKind::Adam, 1e-3, 10, 64});
  c.unlearn.seed = c.seed;
  switch (c.method) {
    case MethodKind::Spotter: c.unlearn.base_loss = BaseLossKind::Spotter; break;
    case MethodKind::RandomLabel:
      c.unlearn.base_loss = BaseLossKind::RandomLabel;
      break;
    case MethodKind::NegGrad: c.unlearn.base_loss = BaseLossKind::NegGrad; break;
    case MethodKind::Retrain: break;  // no unlearning loop
  }

  c.eval_perturb = perturb_from_kv(kv, "eval.perturb", 0.03, PerturbMethod::PGD);
  c.eval_gaussian_sigma = kv.get_double("eval.gaussian_sigma", 0.1);
  c.eval_divergence = divergence_from_string(kv.get_str("eval.divergence", "js"));

  c.attack.k = kv.get_int("attack.k", 5);
  c.attack.metric =
      proto_metric_from_string(kv.get_str("attack.metric", "cosine"));
  c.attack.seed = c.seed;
  c.alpha_grid = kv.get_double_list(
      "attack.alpha_grid",
      {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0});
  if (kv.has("attack.alpha"))
    c.fixed_alpha = kv.get_double("attack.alpha", 1.0);
  c.attack_max_drop = kv.get_double("attack.max_drop", 1.0);

  c.relearn_samples = kv.get_int("relearn.samples", 5);
  c.relearn_epochs = kv.get_int("relearn.epochs", 1);
  return c;
}

KeyValueConfig ExperimentConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("seed", std::to_string(seed));
  kv.set("out", out_dir);
  kv.set("threads", std::to_string(threads));
  kv.set("method", to_string(method));

  kv.set("dataset", dataset_kind == DatasetKind::Blobs ? "blobs" : "images");
  if (dataset_kind == DatasetKind::Blobs) {
    kv.set("dataset.classes", std::to_string(blobs.classes));
    kv.set("dataset.train_per_class", std::to_string(blobs.train_per_class));
    kv.set("dataset.test_per_class", std::to_string(blobs.test_per_class));
    kv.set("dataset.dim", std::to_string(blobs.dim));
    kv.set("dataset.separation", format_double(blobs.separation));
  } else {
    kv.set("dataset.classes", std::to_string(images.classes));
    kv.set("dataset.train_per_class", std::to_string(images.train_per_class));
    kv.set("dataset.test_per_class", std::to_string(images.test_per_class));
    kv.set("dataset.image_size", std::to_string(images.size));
    kv.set("dataset.noise", format_double(images.noise));
  }

  kv.set("arch", arch);
  if (arch == "mlp") kv.set("arch.hidden", std::to_string(mlp_hidden));
  if (arch == "conv2") {
    kv.set("arch.conv_c1", std::to_string(conv_c1));
    kv.set("arch.conv_c2", std::to_string(conv_c2));
  }

  kv.set("forget.classes", join_ints(forget_classes));
  optim_to_kv(kv, "train", train_optim);
  if (!teacher_dir.empty()) kv.set("teacher.dir", teacher_dir);

  kv.set("unlearn.lambda1", format_double(unlearn.lambda1));
  kv.set("unlearn.lambda2", format_double(unlearn.lambda2));
  kv.set("unlearn.divergence", to_string(unlearn.loss_divergence));
  perturb_to_kv(kv, "unlearn.perturb", unlearn.perturb);
  optim_to_kv(kv, "unlearn", unlearn.optim);

  perturb_to_kv(kv, "eval.perturb", eval_perturb);
  kv.set("eval.gaussian_sigma", format_double(eval_gaussian_sigma));
  kv.set("eval.divergence", to_string(eval_divergence));

  kv.set("attack.k", std::to_string(attack.k));
  kv.set("attack.metric", to_string(attack.metric));
  kv.set("attack.alpha_grid", join_doubles(alpha_grid));
  if (fixed_alpha) kv.set("attack.alpha", format_double(*fixed_alpha));
  kv.set("attack.max_drop", format_double(attack_max_drop));

  kv.set("relearn.samples", std::to_string(relearn_samples));
  kv.set("relearn.epochs", std::to_string(relearn_epochs));
  return kv;
}

Dataset ExperimentConfig::make_dataset() const {
  return dataset_kind == DatasetKind::Blobs ? make_blobs(blobs, seed)
                                            : make_pattern_images(images, seed);
}

std::shared_ptr<const FeatureArch<float>> ExperimentConfig::make_arch(
    const Dataset& d) const {
  if (arch == "mlp")
    return std::make_shared<MlpFeatures<float>>(d.input_dim, mlp_hidden);
  if (arch == "conv2") {
    require(d.image_size > 0, ErrorKind::Config,
            "conv2 architecture needs image data");
    return std::make_shared<ConvFeatures<float>>(d.image_channels,
                                                 d.image_size, conv_c1,
                                                 conv_c2);
  }
  raise(ErrorKind::Config, "unknown architecture: " + arch);
}

std::string ExperimentConfig::hash_string() const {
  return hex64(to_kv().semantic_hash());
}

}  // namespace spotter
