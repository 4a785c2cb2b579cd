#include "dgseq/diffcore/checkpoint.hpp"

#include <fstream>

namespace dgseq {

namespace {

nlohmann::json tensor_to_json(const TensorD& t) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < t.size(); ++i) values.push_back(t.data()[i]);
  return {{"shape", {t.rows(), t.cols()}}, {"values", std::move(values)}};
}

TensorD tensor_from_json(const nlohmann::json& j, const std::string& what) {
  const auto& shape = j.at("shape");
  if (!shape.is_array() || shape.size() != 2) throw DataError("checkpoint: bad shape for " + what);
  const auto rows = shape[0].get<Eigen::Index>();
  const auto cols = shape[1].get<Eigen::Index>();
  const auto& values = j.at("values");
  if (rows < 1 || cols < 1 || values.size() != static_cast<std::size_t>(rows * cols)) {
    throw DataError("checkpoint: value count does not match shape for " + what);
  }
  TensorD t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = values[static_cast<std::size_t>(i)].get<double>();
  return t;
}

}  // namespace

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, slot] : ckpt.params.slots()) {
    auto entry = tensor_to_json(slot.value);
    entry["adam_m"] = tensor_to_json(slot.m)["values"];
    entry["adam_v"] = tensor_to_json(slot.v)["values"];
    params[name] = std::move(entry);
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"config", ckpt.config},
          {"step", ckpt.params.step()},
          {"params", std::move(params)}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw DataError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.config = j.at("config");
    for (const auto& [name, entry] : j.at("params").items()) {
      TensorD value = tensor_from_json(entry, name);
      ckpt.params.add(name, value);
      auto& slot = ckpt.params.slot(name);
      if (entry.contains("adam_m")) {
        slot.m = tensor_from_json({{"shape", entry.at("shape")}, {"values", entry.at("adam_m")}}, name);
        slot.v = tensor_from_json({{"shape", entry.at("shape")}, {"values", entry.at("adam_v")}}, name);
      }
    }
    ckpt.params.set_step(j.value("step", std::uint64_t{0}));
    ckpt.params.freeze();
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed document: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace dgseq
