#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dgseq/diffcore/param_store.hpp"
#include "dgseq/graphdata.hpp"

namespace dgseq {

using VarD = Var<double>;
using Binding = ParamBinding<double>;
using Params = ParamStore<double>;

/// Which input reduction feeds the shared decoder.
enum class ModelMode { dynamic, static_aggregate, sequence_only };
enum class Pooling { max_pool, node_attention };

std::string_view to_string(ModelMode m);
std::string_view to_string(Pooling p);
ModelMode parse_model_mode(std::string_view s);
Pooling parse_pooling(std::string_view s);

struct EncoderConfig {
  int hops = 2;
  int hidden = 16;  // per direction; node embeddings are 2 * hidden wide
  Pooling pooling = Pooling::node_attention;
  int feature_dim = 9;
  int num_nodes = 10;

  [[nodiscard]] int embedding_width() const { return 2 * hidden; }
};

struct ModelConfig {
  ModelMode mode = ModelMode::dynamic;
  EncoderConfig encoder;
  bool graph_attention = true;
  int vocab_size = StageVocabulary::kSize;
  int max_len = 12;

  /// Recurrent state width shared by encoder and decoder (= 2 * hidden).
  [[nodiscard]] int state_width() const { return encoder.embedding_width(); }
};

void validate(const ModelConfig& config);
/// Throws DataError unless `tokens` lists the stage vocabulary in id order.
void check_vocabulary(const nlohmann::json& tokens);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Creates every learnable slot the configuration needs, Glorot-uniform
/// initialised from `seed`, and freezes the name set.
Params init_params(const ModelConfig& config, std::uint64_t seed);

}  // namespace dgseq
