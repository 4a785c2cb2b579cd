#include <doctest.h>

#include <filesystem>
#include <random>

#include "dgseq/diffcore/checkpoint.hpp"
#include "dgseq/errors.hpp"
#include "dgseq/trainer.hpp"
#include "test_util.hpp"

using namespace dgseq;

namespace {

struct Fixture {
  std::vector<DynGraphSample> train;
  std::vector<DynGraphSample> validation;
  TrainConfig config;

  Fixture() {
    SyntheticConfig data;
    data.num_users = 24;
    data.num_subforums = 6;
    data.feature_dim = 4;
    data.max_windows = 4;
    data.seed = 3;
    auto ds = generate_synthetic(data);
    train.assign(ds.samples.begin(), ds.samples.begin() + 16);
    validation.assign(ds.samples.begin() + 16, ds.samples.end());
    config.model.encoder.hidden = 3;
    config.model.encoder.num_nodes = 6;
    config.model.encoder.feature_dim = 4;
    config.batch_size = 5;
    config.max_epochs = 3;
    config.learning_rate = 1e-2;
    config.seed = 17;
  }
};

}  // namespace

TEST_CASE("train: patience 0 with a single epoch returns the epoch-1 parameters") {
  Fixture f;
  f.config.max_epochs = 1;
  f.config.patience = 0;
  const auto r = train(f.train, f.validation, f.config);
  REQUIRE(r.log.epochs.size() == 1);
  CHECK(r.log.best_epoch == 1);
  for (const auto& name : r.best.names()) CHECK(r.best.value(name) == r.last.value(name));
  CHECK(r.last.step() == 4);  // ceil(16 / 5) batches
  CHECK(r.log.seconds >= 0.0);
}

TEST_CASE("train: same seed and config give bit-identical logs and parameters") {
  Fixture f;
  const auto a = train(f.train, f.validation, f.config);
  const auto b = train(f.train, f.validation, f.config);
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    CHECK(a.log.epochs[e].loss == b.log.epochs[e].loss);
    CHECK(a.log.epochs[e].val_bleu1 == b.log.epochs[e].val_bleu1);
  }
  for (const auto& name : a.last.names()) CHECK(a.last.value(name) == b.last.value(name));

  f.config.seed = 18;
  const auto c = train(f.train, f.validation, f.config);
  CHECK(c.log.epochs[0].loss != a.log.epochs[0].loss);
}

TEST_CASE("train: epoch callback, early stopping and best-epoch bookkeeping") {
  Fixture f;
  f.config.max_epochs = 40;
  f.config.patience = 2;
  int calls = 0;
  const auto r = train(f.train, f.validation, f.config, nullptr, [&](const EpochRecord& e) {
    ++calls;
    CHECK(e.epoch == calls);
  });
  CHECK(calls == static_cast<int>(r.log.epochs.size()));
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : r.log.epochs) {
    if (e.val_bleu1 > best) {
      best = e.val_bleu1;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.log.best_epoch == best_epoch);
  if (r.log.epochs.size() < 40) CHECK(static_cast<int>(r.log.epochs.size()) - best_epoch == f.config.patience + 1);
  CHECK(validation_bleu1(r.best, f.config.model, f.validation) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("train: resuming continues from the stored optimizer state") {
  Fixture f;
  f.config.max_epochs = 2;
  const auto first = train(f.train, f.validation, f.config);
  f.config.max_epochs = 1;
  const auto resumed = train(f.train, f.validation, f.config, &first.last);
  CHECK(resumed.last.step() == first.last.step() + 4);
}

TEST_CASE("train: argument errors") {
  Fixture f;
  CHECK_THROWS_AS(train({}, f.validation, f.config), DataError);
  CHECK_THROWS_AS(train(f.train, {}, f.config), DataError);
  auto bad = f.config;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(f.train, f.validation, bad), ConfigError);
  bad = f.config;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(f.train, f.validation, bad), ConfigError);
}

TEST_CASE("train: a non-finite loss aborts with the batch index") {
  Fixture f;
  f.train[3].snapshots[0].features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  f.config.batch_size = 50;
  try {
    train(f.train, f.validation, f.config);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }
}

TEST_CASE("evaluate_checkpoint: repeated runs of one model have zero spread") {
  Fixture f;
  const auto params = init_params(f.config.model, 1);
  const auto once = evaluate_checkpoint(params, f.config.model, f.validation, 1);
  CHECK(once.summary("BLEU-1").sd == 0.0);
  const auto thrice = evaluate_checkpoint(params, f.config.model, f.validation, 3);
  CHECK(thrice.run_count() == 3);
  for (const char* m : EvalReport::kColumns) {
    CHECK(thrice.summary(m).sd == 0.0);
    CHECK(thrice.summary(m).mean == once.summary(m).mean);
  }
  CHECK_THROWS_AS(evaluate_checkpoint(params, f.config.model, {}, 1), DataError);
  CHECK_THROWS_AS(evaluate_checkpoint(params, f.config.model, f.validation, 0), ConfigError);
}

TEST_CASE("evaluate_runs: one training run per seed") {
  Fixture f;
  f.config.max_epochs = 2;
  DatasetSplit split{f.train, f.validation, f.validation};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto out = evaluate_runs(split, f.config, seeds);
  CHECK(out.report.run_count() == 2);
  CHECK(out.logs.size() == 2);
  CHECK_THROWS_AS(evaluate_runs(DatasetSplit{f.train, f.validation, {}}, f.config, seeds), DataError);
}

TEST_CASE("checkpoint round-trip reproduces validation BLEU-1 and optimizer state") {
  Fixture f;
  f.config.max_epochs = 2;
  const auto r = train(f.train, f.validation, f.config);
  const auto path = std::filesystem::temp_directory_path() / "dgseq_trainer_ckpt.json";
  save_checkpoint({to_json(f.config), r.last}, path);
  const auto loaded = load_checkpoint(path);
  const auto config = train_config_from_json(loaded.config);
  CHECK(validation_bleu1(loaded.params, config.model, f.validation) ==
        validation_bleu1(r.last, f.config.model, f.validation));
  CHECK(loaded.params.step() == r.last.step());
  for (const auto& name : r.last.names()) {
    CHECK(loaded.params.value(name) == r.last.value(name));
    CHECK(loaded.params.slot(name).m == r.last.slot(name).m);
    CHECK(loaded.params.slot(name).v == r.last.slot(name).v);
  }
}

TEST_CASE("train config JSON") {
  TrainConfig c;
  c.model.mode = ModelMode::sequence_only;
  c.model.encoder.pooling = Pooling::max_pool;
  c.model.graph_attention = false;
  c.batch_size = 7;
  c.seed = 99;
  const auto back = train_config_from_json(to_json(c));
  CHECK(back.model.mode == ModelMode::sequence_only);
  CHECK(back.model.encoder.pooling == Pooling::max_pool);
  CHECK_FALSE(back.model.graph_attention);
  CHECK(back.batch_size == 7);
  CHECK(back.seed == 99);

  CHECK(train_config_from_json(nlohmann::json::object()).learning_rate == 1e-3);
  CHECK_THROWS_AS(train_config_from_json({{"learnig_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"batch_size", "ten"}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"batch_size", 0}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"mode", "graph"}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"vocabulary", {"Dx", "Chemo"}}}), DataError);
}
