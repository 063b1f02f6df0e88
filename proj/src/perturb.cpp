#include "spotter/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "spotter/divergence.hpp"
#include "spotter/parallel.hpp"

namespace spotter {

const char* to_string(PerturbMethod m) {
  return m == PerturbMethod::PGD ? "pgd" : "gaussian";
}

PerturbMethod perturb_method_from_string(const std::string& s) {
  if (s == "pgd") return PerturbMethod::PGD;
  if (s == "gaussian") return PerturbMethod::Gaussian;
  raise(ErrorKind::Config, "unknown perturbation method: " + s);
}

void PerturbConfig::validate() const {
  require(epsilon >= 0.0, ErrorKind::Config, "epsilon must be nonnegative");
  require(steps >= 1, ErrorKind::Config, "PGD needs at least one step");
  require(step_size >= 0.0, ErrorKind::Config, "step size must be nonnegative");
  require(sigma >= 0.0, ErrorKind::Config, "sigma must be nonnegative");
  require(boundary_buffer > 0.0, ErrorKind::Config,
          "boundary buffer must be positive");
  require(bound_lo <= bound_hi, ErrorKind::Config, "invalid input bounds");
}

namespace {

inline float signf(float g) { return g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f); }

}  // namespace

std::vector<float> pgd_perturb(const Classifier<float>& model,
                               std::span<const float> x, int y,
                               const PerturbConfig& cfg) {
  cfg.validate();
  require(cfg.method == PerturbMethod::PGD, ErrorKind::Config,
          "pgd_perturb called with non-PGD config");
  require(static_cast<int>(x.size()) == model.input_dim(),
          ErrorKind::ShapeMismatch, "input dimension mismatch");
  std::vector<float> xp(x.begin(), x.end());
  if (cfg.epsilon == 0.0) return xp;

  const int d = model.input_dim();
  const int c = model.num_classes();
  const float eps = static_cast<float>(cfg.epsilon);
  const float step = static_cast<float>(cfg.effective_step());
  std::vector<float> gx(d);
  Matrix<float> glogits(1, c);

  for (int s = 0; s < cfg.steps; ++s) {
    ForwardPass<float> fp = model.forward(xp.data(), 1, true);
    for (float v : fp.logits.data)
      require(std::isfinite(v), ErrorKind::Config,
              "non-finite logits during PGD");
    // d CE / d z = softmax(z) - onehot(y)
    std::vector<float> p = softmax<float>(fp.logits.row_span(0));
    for (int k = 0; k < c; ++k) glogits.at(0, k) = p[k] - (k == y ? 1.0f : 0.0f);
    model.backward(xp.data(), 1, fp, glogits, nullptr, {}, gx.data());

    for (int i = 0; i < d; ++i) {
      float v = xp[i] + step * signf(gx[i]);
      v = std::clamp(v, x[i] - eps, x[i] + eps);
      v = std::clamp(v, static_cast<float>(cfg.bound_lo),
                     static_cast<float>(cfg.bound_hi));
      xp[i] = v;
    }
  }
  return xp;
}

std::vector<float> gaussian_perturb(std::span<const float> x,
                                    const PerturbConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<float> xp(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    float v = x[i] + static_cast<float>(cfg.sigma * rng.normal());
    xp[i] = std::clamp(v, static_cast<float>(cfg.bound_lo),
                       static_cast<float>(cfg.bound_hi));
  }
  return xp;
}

PerturbedSet epsilon_tube(const Classifier<float>& model_orig,
                          const Dataset& data, const ForgetSpec& forget,
                          const PerturbConfig& cfg, u64 seed, u64 stream_id) {
  cfg.validate();
  require(!forget.forget_indices.empty(), ErrorKind::Config,
          "forget index set is empty");

  const i64 n = static_cast<i64>(forget.forget_indices.size());
  std::vector<PerturbedItem> all(n);
  par::parallel_for(n, [&](i64 i) {
    const i64 src = forget.forget_indices[i];
    std::span<const float> x{data.x_train.row(src),
                             static_cast<std::size_t>(data.input_dim)};
    const int label = data.y_train[src];
    PerturbedItem item;
    item.origin_index = src;
    item.method = cfg.method;
    if (cfg.method == PerturbMethod::PGD) {
      item.x_p = pgd_perturb(model_orig, x, label, cfg);
    } else {
      Rng rng(substream(seed, stream_id, static_cast<u64>(i)));
      item.x_p = gaussian_perturb(x, cfg, rng);
    }
    float dinf = 0.0f;
    for (i64 d = 0; d < data.input_dim; ++d)
      dinf = std::max(dinf, std::abs(item.x_p[d] - x[d]));
    item.delta_inf_norm = dinf;
    std::vector<float> z = model_orig.logits_one(item.x_p);
    item.margin_at_xp = logit_margin<float>(z, label);
    all[i] = std::move(item);
  });

  PerturbedSet set;
  set.config = cfg;
  set.seed = seed;
  set.stream_id = stream_id;
  set.total_candidates = n;
  for (auto& item : all) {
    if (std::isfinite(cfg.boundary_buffer) &&
        std::abs(item.margin_at_xp) > cfg.boundary_buffer)
      continue;
    set.items.push_back(std::move(item));
  }
  return set;
}

namespace {

nlohmann::json config_to_json(const PerturbConfig& cfg) {
  auto optval = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  return {{"epsilon", cfg.epsilon},
          {"steps", cfg.steps},
          {"step_size", cfg.step_size},
          {"method", to_string(cfg.method)},
          {"sigma", cfg.sigma},
          {"boundary_buffer", optval(cfg.boundary_buffer)},
          {"bound_lo", optval(cfg.bound_lo)},
          {"bound_hi", optval(cfg.bound_hi)}};
}

double json_to_bound(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j == "inf") return std::numeric_limits<double>::infinity();
    if (j == "-inf") return -std::numeric_limits<double>::infinity();
    raise(ErrorKind::Io, "bad bound value in perturbed-set file");
  }
  return j.get<double>();
}

PerturbConfig config_from_json(const nlohmann::json& j) {
  PerturbConfig cfg;
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.steps = j.at("steps").get<int>();
  cfg.step_size = j.at("step_size").get<double>();
  cfg.method = perturb_method_from_string(j.at("method").get<std::string>());
  cfg.sigma = j.at("sigma").get<double>();
  cfg.boundary_buffer = json_to_bound(j.at("boundary_buffer"));
  cfg.bound_lo = json_to_bound(j.at("bound_lo"));
  cfg.bound_hi = json_to_bound(j.at("bound_hi"));
  return cfg;
}

}  // namespace

void save_perturbed_set(const std::filesystem::path& path,
                        const PerturbedSet& set) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : set.items) {
    items.push_back({{"x_p", item.x_p},
                     {"origin_index", item.origin_index},
                     {"method", to_string(item.method)},
                     {"delta_inf_norm", item.delta_inf_norm},
                     {"margin_at_xp", item.margin_at_xp}});
  }
  nlohmann::json j{{"format", "spotter-perturbed-set-v1"},
                   {"config", config_to_json(set.config)},
                   {"seed", set.seed},
                   {"stream_id", set.stream_id},
                   {"total_candidates", set.total_candidates},
                   {"items", std::move(items)}};
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump() << "\n";
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

PerturbedSet load_perturbed_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  require(j.at("format") == "spotter-perturbed-set-v1", ErrorKind::Io,
          "unknown perturbed-set format");
  PerturbedSet set;
  set.config = config_from_json(j.at("config"));
  set.seed = j.at("seed").get<u64>();
  set.stream_id = j.at("stream_id").get<u64>();
  set.total_candidates = j.at("total_candidates").get<i64>();
  for (const auto& ji : j.at("items")) {
    PerturbedItem item;
    item.x_p = ji.at("x_p").get<std::vector<float>>();
    item.origin_index = ji.at("origin_index").get<i64>();
    item.method = perturb_method_from_string(ji.at("method").get<std::string>());
    item.delta_inf_norm = ji.at("delta_inf_norm").get<float>();
    item.margin_at_xp = ji.at("margin_at_xp").get<float>();
    set.items.push_back(std::move(item));
  }
  return set;
}

}  // namespace spotter
