#include <doctest.h>

#include <cmath>
#include <random>

#include "dgseq/decoder.hpp"
#include "dgseq/diffcore/grad_check.hpp"
#include "dgseq/errors.hpp"
#include "test_util.hpp"

using namespace dgseq;
using test::mat;
using test::random_matrix;

namespace {

EncoderTrace random_trace(Eigen::Index steps, Eigen::Index width, std::mt19937_64& rng) {
  EncoderTrace tr;
  tr.encoder_hiddens = random_matrix(steps, width, rng);
  tr.final_cell = random_matrix(1, width, rng);
  return tr;
}

Params zero_params(const ModelConfig& config) {
  auto p = init_params(config, 0);
  for (const auto& name : p.names()) p.slot(name).value.setZero();
  return p;
}

// Output layer that always prefers `token`, regardless of the hidden state.
void rig_output(Params& p, int token) {
  p.slot("dec.out.W").value.setZero();
  p.slot("dec.out.b").value.setZero();
  p.slot("dec.out.b").value(0, token) = 10.0;
}

}  // namespace

TEST_CASE("graph_to_seq_attend") {
  std::mt19937_64 rng(1);
  const auto config = test::tiny_config();
  auto params = init_params(config, 3);
  Tape<double> tape;
  Binding bind(tape, params, false);

  const VarD s = tape.constant(random_matrix(1, 4, rng));
  const VarD o1 = tape.constant(random_matrix(1, 4, rng));
  const auto single = graph_to_seq_attend(bind, s, o1);
  CHECK(single.weights.value() == mat({{1.0}}));
  CHECK(single.context.value() == o1.value());

  TensorD same(5, 4);
  for (int t = 0; t < 5; ++t) same.row(t) = o1.value();
  const auto uniform = graph_to_seq_attend(bind, s, tape.constant(same));
  for (int t = 0; t < 5; ++t) CHECK(uniform.weights.value()(0, t) == doctest::Approx(0.2).epsilon(1e-15));

  // W_a = 100 I and o_t = e_t scaled: score_t = 100 * s_t, so the largest
  // component of s picks the step.
  Params crafted = params;
  crafted.slot("dec.att.W").value = 100.0 * TensorD::Identity(4, 4);
  Tape<double> t2;
  Binding b2(t2, crafted, false);
  const VarD outputs = t2.constant(TensorD::Identity(4, 4));
  const auto peaked = graph_to_seq_attend(b2, t2.constant(mat({{0.1, -0.2, 0.3, 0.05}})), outputs);
  Eigen::Index best = 0;
  peaked.weights.value().row(0).maxCoeff(&best);
  CHECK(best == 2);  // third step
  CHECK(peaked.weights.value()(0, 2) > 0.99);

  for (int trial = 0; trial < 100; ++trial) {
    const auto a = graph_to_seq_attend(bind, tape.constant(random_matrix(1, 4, rng) * 4.0),
                                       tape.constant(random_matrix(1 + trial % 6, 4, rng)));
    CHECK(std::abs(a.weights.value().sum() - 1.0) < 1e-9);
    CHECK(a.weights.value().minCoeff() >= 0.0);
  }
}

TEST_CASE("decode_step: zero weights give zero logits and uniform attention") {
  std::mt19937_64 rng(2);
  const auto config = test::tiny_config();
  const auto params = zero_params(config);
  Tape<double> tape;
  Binding bind(tape, params, false);
  const auto tr = random_trace(3, 4, rng);
  const auto out =
      decode_step(bind, config, initial_state(tape, tape.constant(tr.final_cell)), tape.constant(tr.encoder_hiddens));
  CHECK(out.logits.value().isZero(0.0));
  REQUIRE(out.attention.has_value());
  for (int t = 0; t < 3; ++t) CHECK(out.attention->value()(0, t) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("decode_step: pure and rejects invalid tokens") {
  std::mt19937_64 rng(3);
  const auto config = test::tiny_config();
  const auto params = init_params(config, 5);
  const auto tr = random_trace(2, 4, rng);
  auto run = [&](int token) {
    Tape<double> tape;
    Binding bind(tape, params, false);
    auto state = initial_state(tape, tape.constant(tr.final_cell));
    state.previous_token = token;
    return decode_step(bind, config, state, tape.constant(tr.encoder_hiddens)).logits.value();
  };
  CHECK(run(3) == run(3));
  CHECK_THROWS_AS(run(9), DataError);
  CHECK_THROWS_AS(run(-1), DataError);
}

TEST_CASE("decode_step: cross-entropy gradient matches finite differences") {
  std::mt19937_64 rng(4);
  for (bool attention : {true, false}) {
    auto config = test::tiny_config();
    config.graph_attention = attention;
    auto params = init_params(config, 6);
    const auto tr = random_trace(3, 4, rng);
    const TapedLoss<double> f = [&](Binding& p) {
      auto& tape = p.tape();
      auto state = initial_state(tape, tape.constant(tr.final_cell));
      state.previous_token = 2;
      return cross_entropy(decode_step(p, config, state, tape.constant(tr.encoder_hiddens)).logits, 4);
    };
    const auto report = grad_check(f, params, 1e-5, 1e-5);
    CHECK_MESSAGE(report.passed(), "worst " << report.worst());
  }
}

TEST_CASE("greedy_decode: immediate EOS and the length cap") {
  std::mt19937_64 rng(5);
  const auto config = test::tiny_config();
  const auto tr = random_trace(4, 4, rng);
  auto params = init_params(config, 7);

  rig_output(params, StageVocabulary::kEos);
  const auto empty = greedy_decode(tr, params, config, 12);
  CHECK(empty.tokens.empty());
  CHECK(empty.graph_attention.rows() == 0);
  CHECK(empty.graph_attention.cols() == 4);

  rig_output(params, 2);
  const auto capped = greedy_decode(tr, params, config, 12);
  CHECK(capped.tokens == std::vector<int>(12, 2));
  CHECK(capped.graph_attention.rows() == 12);
  CHECK(greedy_decode(tr, params, config, 3).tokens.size() == 3);
  CHECK_THROWS_AS(greedy_decode(tr, params, config, 0), DomainError);
}

TEST_CASE("greedy_decode: ties go to the lowest token id") {
  CHECK(argmax(mat({{0.0, 1.0, 1.0, 0.5}})) == 1);
  CHECK(argmax(mat({{2.0, 2.0}})) == 0);
  std::mt19937_64 rng(6);
  const auto config = test::tiny_config();
  const auto tr = random_trace(2, 4, rng);
  const auto zeros = greedy_decode(tr, zero_params(config), config, 5);
  CHECK(zeros.tokens == std::vector<int>(5, 0));
}

TEST_CASE("greedy_decode: deterministic, simplex rows, depends only on encoder outputs and cell") {
  std::mt19937_64 rng(7);
  const auto config = test::tiny_config();
  for (int trial = 0; trial < 20; ++trial) {
    const auto params = init_params(config, static_cast<std::uint64_t>(trial));
    const auto sample = test::random_sample(3, 2, 1 + trial % 5, 2, rng);
    const auto a = predict(params, config, sample);
    const auto b = predict(params, config, sample);
    CHECK(a.tokens == b.tokens);
    CHECK(a.graph_attention == b.graph_attention);
    CHECK(a.tokens.size() <= 12);
    CHECK(a.graph_attention.rows() == static_cast<Eigen::Index>(a.tokens.size()));
    for (Eigen::Index r = 0; r < a.graph_attention.rows(); ++r) {
      CHECK(std::abs(a.graph_attention.row(r).sum() - 1.0) < 1e-9);
      CHECK(a.graph_attention.row(r).minCoeff() >= 0.0);
    }

    auto trace = encode_trace(params, config, sample);
    auto scrambled = trace;
    for (auto& h : scrambled.node_embeddings) h = random_matrix(h.rows(), h.cols(), rng);
    for (auto& alpha : scrambled.node_attention) alpha.setConstant(0.25);
    scrambled.graph_embeddings = random_matrix(trace.graph_embeddings.rows(), trace.graph_embeddings.cols(), rng);
    const auto c = greedy_decode(scrambled, params, config, config.max_len);
    CHECK(c.tokens == a.tokens);
    CHECK(c.graph_attention == a.graph_attention);
  }
}

TEST_CASE("teacher_forced_loss") {
  std::mt19937_64 rng(8);
  const auto config = test::tiny_config();
  auto sample = test::random_sample(3, 2, 3, 3, rng);

  {
    const auto params = zero_params(config);
    Tape<double> tape;
    Binding bind(tape, params, false);
    CHECK(teacher_forced_loss(bind, config, sample).value()(0, 0) == doctest::Approx(std::log(9.0)).epsilon(1e-14));
  }
  {
    // A peaked output that tracks the previous token through the embedding,
    // for the target sequence 0 -> 1 -> 2 -> EOS.
    sample.target = {0, 1, 2};
    auto params = zero_params(config);
    auto& embed = params.slot("dec.embed").value;
    auto& wx = params.slot("dec.lstm.Wx").value;
    auto& bias = params.slot("dec.lstm.b").value;
    auto& out = params.slot("dec.out.W").value;
    // gates [i f g o] over width 4; open input and output gates, g = tanh(x)
    bias.block(0, 0, 1, 4).setConstant(30.0);
    bias.block(0, 12, 1, 4).setConstant(30.0);
    bias.block(0, 4, 1, 4).setConstant(-30.0);
    wx.block(0, 8, 4, 4) = TensorD::Identity(4, 4) * 3.0;
    params.slot("dec.combine.W").value.topRows(4) = TensorD::Identity(4, 4) * 3.0;
    // previous token k gets embedding e_{next(k)}
    const std::vector<std::pair<int, int>> next{{StageVocabulary::kBos, 0}, {0, 1}, {1, 2}, {2, 3}};
    for (auto [prev, slot] : next) embed(prev, slot) = 1.0;
    const std::vector<int> emit{0, 1, 2, StageVocabulary::kEos};
    for (int k = 0; k < 4; ++k) out(k, emit[k]) = 1000.0;
    Tape<double> tape;
    Binding bind(tape, params, false);
    CHECK(teacher_forced_loss(bind, config, sample).value()(0, 0) < 1e-12);
  }

  auto params = init_params(config, 9);
  const TapedLoss<double> f = [&](Binding& p) { return teacher_forced_loss(p, config, sample); };
  const auto report = grad_check(f, params, 1e-5, 1e-5);
  CHECK_MESSAGE(report.passed(), "worst " << report.worst());

  Tape<double> tape;
  Binding bind(tape, params, false);
  auto long_sample = sample;
  long_sample.target.assign(13, 1);
  CHECK_THROWS_AS(teacher_forced_loss(bind, config, long_sample), DataError);
  long_sample.target.clear();
  CHECK_THROWS_AS(teacher_forced_loss(bind, config, long_sample), DataError);
}

TEST_CASE("batched losses equal unbatched losses despite padding") {
  std::mt19937_64 rng(9);
  for (ModelMode mode : {ModelMode::dynamic, ModelMode::static_aggregate, ModelMode::sequence_only}) {
    const auto config = test::tiny_config(mode);
    const auto params = init_params(config, 10);
    std::vector<DynGraphSample> samples;
    for (int i = 0; i < 5; ++i) samples.push_back(test::random_sample(3, 2, 1 + i, 1 + (i * 2) % 5, rng));
    std::vector<const DynGraphSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);

    Tape<double> tape;
    Binding bind(tape, params, false);
    const auto losses = batch_losses(bind, config, batch);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Tape<double> single;
      Binding b(single, params, false);
      const double expected = teacher_forced_loss(b, config, samples[i]).value()(0, 0);
      CHECK(std::abs(losses[i].value()(0, 0) - expected) <= 1e-10 * std::max(1.0, std::abs(expected)));
    }
  }
}
