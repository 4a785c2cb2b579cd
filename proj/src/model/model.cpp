#include "dgseq/model.hpp"

#include <algorithm>
#include <random>

#include "dgseq/errors.hpp"

namespace dgseq {

std::string_view to_string(ModelMode m) {
  switch (m) {
    case ModelMode::dynamic: return "dynamic";
    case ModelMode::static_aggregate: return "static_aggregate";
    case ModelMode::sequence_only: return "sequence_only";
  }
  return "?";
}

std::string_view to_string(Pooling p) { return p == Pooling::max_pool ? "max" : "attention"; }

ModelMode parse_model_mode(std::string_view s) {
  if (s == "dynamic") return ModelMode::dynamic;
  if (s == "static_aggregate") return ModelMode::static_aggregate;
  if (s == "sequence_only") return ModelMode::sequence_only;
  throw ConfigError("mode: expected dynamic|static_aggregate|sequence_only, got '" + std::string(s) + "'");
}

Pooling parse_pooling(std::string_view s) {
  if (s == "max" || s == "max_pool") return Pooling::max_pool;
  if (s == "attention" || s == "node_attention") return Pooling::node_attention;
  throw ConfigError("pooling: expected max|attention, got '" + std::string(s) + "'");
}

void check_vocabulary(const nlohmann::json& tokens) {
  const auto vocab = tokens.get<std::vector<std::string>>();
  if (vocab.size() != StageVocabulary::kTokens.size() ||
      !std::equal(vocab.begin(), vocab.end(), StageVocabulary::kTokens.begin())) {
    throw DataError("vocabulary does not match the stage vocabulary");
  }
}

void validate(const ModelConfig& c) {
  if (c.encoder.hops < 1) throw ConfigError("hops must be >= 1");
  if (c.encoder.hidden < 1) throw ConfigError("hidden must be >= 1");
  if (c.encoder.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (c.encoder.num_nodes < 1) throw ConfigError("num_nodes must be >= 1");
  if (c.vocab_size != StageVocabulary::kSize) {
    throw ConfigError("vocab_size must be " + std::to_string(StageVocabulary::kSize));
  }
  if (c.max_len < 1) throw ConfigError("max_len must be >= 1");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"hops", c.encoder.hops},
          {"hidden", c.encoder.hidden},
          {"pooling", to_string(c.encoder.pooling)},
          {"feature_dim", c.encoder.feature_dim},
          {"num_nodes", c.encoder.num_nodes},
          {"graph_attention", c.graph_attention},
          {"vocab_size", c.vocab_size},
          {"vocabulary", StageVocabulary::kTokens},
          {"max_len", c.max_len}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.mode = parse_model_mode(j.at("mode").get<std::string>());
    c.encoder.hops = j.at("hops").get<int>();
    c.encoder.hidden = j.at("hidden").get<int>();
    c.encoder.pooling = parse_pooling(j.at("pooling").get<std::string>());
    c.encoder.feature_dim = j.at("feature_dim").get<int>();
    c.encoder.num_nodes = j.at("num_nodes").get<int>();
    c.graph_attention = j.at("graph_attention").get<bool>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_len = j.at("max_len").get<int>();
    if (j.contains("vocabulary")) check_vocabulary(j.at("vocabulary"));
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

Params init_params(const ModelConfig& c, std::uint64_t seed) {
  validate(c);
  std::mt19937_64 rng(seed);
  Params p;
  auto add = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    p.add(name, glorot_uniform<double>(rows, cols, rng));
  };
  const int d = c.encoder.hidden;
  const int w = c.encoder.embedding_width();
  const int h = c.state_width();
  const int v = c.vocab_size;

  if (c.mode == ModelMode::sequence_only) {
    add("enc.embed", c.encoder.num_nodes, w);
  } else {
    for (int hop = 1; hop <= c.encoder.hops; ++hop) {
      const int in = hop == 1 ? c.encoder.feature_dim : w;
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string prefix = "enc.conv" + std::to_string(hop) + "." + dir;
        add(prefix + ".W", in, d);
        add(prefix + ".b", 1, d);
      }
    }
    if (c.encoder.pooling == Pooling::max_pool) {
      add("enc.pool.W", w, w);
      add("enc.pool.b", 1, w);
    } else {
      add("enc.att.W1", w, w);
      add("enc.att.b1", 1, w);
      add("enc.att.w2", w, 1);
    }
  }
  add("enc.lstm.Wx", w, 4 * h);
  add("enc.lstm.Wh", h, 4 * h);
  add("enc.lstm.b", 1, 4 * h);

  add("dec.embed", v, h);
  add("dec.lstm.Wx", h, 4 * h);
  add("dec.lstm.Wh", h, 4 * h);
  add("dec.lstm.b", 1, 4 * h);
  if (c.graph_attention) add("dec.att.W", h, h);
  add("dec.combine.W", c.graph_attention ? 2 * h : h, h);
  add("dec.combine.b", 1, h);
  add("dec.out.W", h, v);
  add("dec.out.b", 1, v);
  p.freeze();
  return p;
}

}  // namespace dgseq
