#include "dgseq/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "dgseq/errors.hpp"

namespace dgseq {

void validate(const TrainConfig& c) {
  validate(c.model);
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (c.patience < 0) throw ConfigError("patience must be >= 0");
  if (!(c.clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  auto j = to_json(c.model);
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["clip_norm"] = c.clip_norm;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "mode") c.model.mode = parse_model_mode(value.get<std::string>());
      else if (key == "hops") c.model.encoder.hops = value.get<int>();
      else if (key == "hidden") c.model.encoder.hidden = value.get<int>();
      else if (key == "pooling") c.model.encoder.pooling = parse_pooling(value.get<std::string>());
      else if (key == "feature_dim") c.model.encoder.feature_dim = value.get<int>();
      else if (key == "num_nodes") c.model.encoder.num_nodes = value.get<int>();
      else if (key == "graph_attention") c.model.graph_attention = value.get<bool>();
      else if (key == "vocab_size") c.model.vocab_size = value.get<int>();
      else if (key == "vocabulary") check_vocabulary(value);
      else if (key == "max_len") c.model.max_len = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "max_epochs") c.max_epochs = value.get<int>();
      else if (key == "patience") c.patience = value.get<int>();
      else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown config field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field '" + key + "' has the wrong type");
    }
  }
  validate(c);
  return c;
}

void write_run_log(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write run log " + path.string());
  for (const auto& e : log.epochs) {
    out << nlohmann::json{{"epoch", e.epoch}, {"loss", e.loss}, {"val_bleu1", e.val_bleu1}}.dump() << '\n';
  }
}

std::vector<TokenSeq> decode_corpus(const Params& params, const ModelConfig& config,
                                    std::span<const DynGraphSample> samples) {
  std::vector<TokenSeq> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(predict(params, config, s).tokens);
  return out;
}

std::vector<TokenSeq> references(std::span<const DynGraphSample> samples) {
  std::vector<TokenSeq> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.target);
  return out;
}

double validation_bleu1(const Params& params, const ModelConfig& config, std::span<const DynGraphSample> samples) {
  const auto cands = decode_corpus(params, config, samples);
  const auto refs = references(samples);
  return bleu(cands, refs, 1);
}

double teacher_forced_accuracy(const Params& params, const ModelConfig& config,
                               std::span<const DynGraphSample> samples) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& s : samples) {
    const auto [h, t] = teacher_forced_hits(params, config, s);
    hits += h;
    total += t;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

TrainResult train(std::span<const DynGraphSample> train_set, std::span<const DynGraphSample> validation,
                  const TrainConfig& config, const Params* resume, const EpochCallback& on_epoch) {
  validate(config);
  if (train_set.empty()) throw DataError("train: empty training split");
  if (validation.empty()) throw DataError("train: empty validation split");
  const auto start = std::chrono::steady_clock::now();

  Params params = resume ? *resume : init_params(config.model, config.seed);
  params.zero_grad();
  const AdamOptions adam{config.learning_rate, 0.9, 0.999, 1e-8};
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5f3759dfULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{params, params, {}};
  double best_bleu = -1.0;
  int since_best = 0;
  std::size_t batch_index = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      std::vector<const DynGraphSample*> batch;
      for (std::size_t k = lo; k < hi; ++k) batch.push_back(&train_set[order[k]]);

      Tape<double> tape;
      Binding bind(tape, params, true);
      const auto losses = batch_losses(bind, config.model, batch);
      const VarD objective = scale(sum(concat_cols(losses)), 1.0 / static_cast<double>(batch.size()));
      const double value = objective.value()(0, 0);
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss in batch " + std::to_string(batch_index) + " (epoch " +
                           std::to_string(epoch) + ")");
      }
      loss_sum += value * static_cast<double>(batch.size());
      tape.backward(objective);
      bind.accumulate_into(params);
      params.clip_grad_norm(config.clip_norm);
      adam_step(params, adam);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                    validation_bleu1(params, config.model, validation)};
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_bleu1 > best_bleu) {
      best_bleu = rec.val_bleu1;
      result.best = params;
      result.log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > config.patience) {
      break;
    }
  }
  result.last = std::move(params);
  result.log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

EvalReport evaluate_checkpoint(const Params& params, const ModelConfig& config,
                               std::span<const DynGraphSample> test, int runs) {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (test.empty()) throw DataError("evaluate: empty test split");
  EvalReport report;
  const auto refs = references(test);
  for (int r = 0; r < runs; ++r) {
    const auto cands = decode_corpus(params, config, test);
    report.add_run(cands, refs);
  }
  return report;
}

EvaluationOutcome evaluate_runs(const DatasetSplit& split, const TrainConfig& config,
                                std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("runs must be >= 1");
  if (split.test.empty()) throw DataError("evaluate: empty test split");
  EvaluationOutcome out;
  const auto refs = references(split.test);
  for (auto seed : seeds) {
    TrainConfig run = config;
    run.seed = seed;
    auto trained = train(split.train, split.validation, run);
    out.report.add_run(decode_corpus(trained.best, config.model, split.test), refs);
    out.logs.push_back(std::move(trained.log));
  }
  return out;
}

}  // namespace dgseq
