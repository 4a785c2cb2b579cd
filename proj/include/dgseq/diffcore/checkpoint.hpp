#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dgseq/diffcore/param_store.hpp"

namespace dgseq {

inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint container: format version, an opaque model configuration, the
/// optimizer step and every parameter as (shape, row-major values). Adam
/// moments are stored alongside so training can resume exactly.
struct Checkpoint {
  nlohmann::json config;
  ParamStore<double> params;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dgseq
