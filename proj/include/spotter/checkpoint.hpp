#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "spotter/model.hpp"
#include "spotter/npy.hpp"

// Checkpoint directory layout:
//   <dir>/metadata.json   architecture, class count, dtype, provenance
//   <dir>/params.npy      flat parameter vector, round-trips bit-exactly

namespace spotter {

struct CheckpointMeta {
  u64 seed = 0;
  std::string config_hash;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& dir,
                     const Classifier<T>& model,
                     const CheckpointMeta& meta = {}) {
  std::filesystem::create_directories(dir);
  nlohmann::json j{
      {"format", "spotter-checkpoint-v1"},
      {"arch", model.arch().to_json()},
      {"num_classes", model.num_classes()},
      {"embed_dim", model.embed_dim()},
      {"input_dim", model.input_dim()},
      {"dtype", npy::dtype_str<T>()},
      {"seed", meta.seed},
      {"config_hash", meta.config_hash},
      {"params_checksum", hex64(model.params_checksum())},
  };
  std::ofstream out(dir / "metadata.json");
  require(out.good(), ErrorKind::Io, "cannot write checkpoint metadata");
  out << j.dump(2) << "\n";
  npy::save<T>(dir / "params.npy",
               {model.params().data(), model.params().size()});
}

template <typename T>
Classifier<T> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "metadata.json");
  require(in.good(), ErrorKind::Io,
          "cannot read checkpoint metadata in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(in);
  require(j.at("format") == "spotter-checkpoint-v1", ErrorKind::Io,
          "unknown checkpoint format");
  auto arch = arch_from_json<T>(j.at("arch"));
  Classifier<T> model(arch, j.at("num_classes").get<int>());
  std::vector<T> params = npy::load<T>(dir / "params.npy");
  require(static_cast<i64>(params.size()) == model.param_count(),
          ErrorKind::Io, "checkpoint parameter count mismatch");
  model.params() = std::move(params);
  if (j.contains("params_checksum")) {
    require(hex64(model.params_checksum()) == j.at("params_checksum"),
            ErrorKind::Io, "checkpoint parameter checksum mismatch");
  }
  return model;
}

}  // namespace spotter
