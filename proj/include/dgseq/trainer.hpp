#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dgseq/decoder.hpp"
#include "dgseq/diffcore/adam.hpp"
#include "dgseq/metrics.hpp"

namespace dgseq {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  int batch_size = 50;
  int max_epochs = 300;
  int patience = 20;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_bleu1 = 0.0;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double seconds = 0.0;
};

void write_run_log(const RunLog& log, const std::filesystem::path& path);

struct TrainResult {
  Params best;   // highest validation BLEU-1
  Params last;   // parameters after the final epoch, with optimizer state
  RunLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the teacher-forced loss with validation-BLEU-1 model
/// selection and patience-based early stopping. `resume` continues from
/// existing parameters and optimizer moments instead of a fresh init.
TrainResult train(std::span<const DynGraphSample> train_set, std::span<const DynGraphSample> validation,
                  const TrainConfig& config, const Params* resume = nullptr, const EpochCallback& on_epoch = {});

/// Greedy decodes of every sample, EOS excluded.
std::vector<TokenSeq> decode_corpus(const Params& params, const ModelConfig& config,
                                    std::span<const DynGraphSample> samples);
std::vector<TokenSeq> references(std::span<const DynGraphSample> samples);

double validation_bleu1(const Params& params, const ModelConfig& config, std::span<const DynGraphSample> samples);

/// Pooled teacher-forced token accuracy (EOS positions included).
double teacher_forced_accuracy(const Params& params, const ModelConfig& config,
                               std::span<const DynGraphSample> samples);

/// Evaluate-only protocol: scores one fixed model `runs` times.
EvalReport evaluate_checkpoint(const Params& params, const ModelConfig& config,
                               std::span<const DynGraphSample> test, int runs);

struct EvaluationOutcome {
  EvalReport report;
  std::vector<RunLog> logs;
};

/// Train-and-evaluate protocol: one training run per seed on a fixed split.
EvaluationOutcome evaluate_runs(const DatasetSplit& split, const TrainConfig& config,
                                std::span<const std::uint64_t> seeds);

}  // namespace dgseq
