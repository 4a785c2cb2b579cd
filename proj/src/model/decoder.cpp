#include "dgseq/decoder.hpp"

#include <algorithm>

#include "dgseq/errors.hpp"

namespace dgseq {

Attention graph_to_seq_attend(Binding& params, const VarD& decoder_hidden, const VarD& encoder_outputs) {
  if (encoder_outputs.rows() < 1) throw DomainError("graph_to_seq_attend: no encoder outputs");
  const VarD scores = matmul(matmul(decoder_hidden, params("dec.att.W")), transpose(encoder_outputs));
  const VarD beta = softmax(scores);
  return {matmul(beta, encoder_outputs), beta};
}

DecoderState initial_state(Tape<double>& tape, const VarD& final_cell) {
  return {{tape.constant(TensorD::Zero(1, final_cell.cols())), final_cell}, StageVocabulary::kBos};
}

StepOutput decode_step(Binding& params, const ModelConfig& config, const DecoderState& state,
                       const VarD& encoder_outputs) {
  if (state.previous_token < 0 || state.previous_token >= config.vocab_size) {
    throw DataError("decode_step: token id " + std::to_string(state.previous_token) + " outside vocabulary");
  }
  const VarD x = slice_rows(params("dec.embed"), state.previous_token, 1);
  const LstmWeights<double> w{params("dec.lstm.Wx"), params("dec.lstm.Wh"), params("dec.lstm.b")};
  const auto next = lstm_cell(x, state.recurrent, w);

  StepOutput out;
  VarD features = next.hidden;
  if (config.graph_attention) {
    auto att = graph_to_seq_attend(params, next.hidden, encoder_outputs);
    features = concat_cols<double>({next.hidden, att.context});
    out.attention = att.weights;
  }
  const VarD combined = tanh(affine(features, params("dec.combine.W"), params("dec.combine.b")));
  out.logits = affine(combined, params("dec.out.W"), params("dec.out.b"));
  out.state = {next, state.previous_token};
  return out;
}

int argmax(const TensorD& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row.data()[i] > row.data()[best]) best = i;
  }
  return static_cast<int>(best);
}

DecodeResult greedy_decode(const EncoderTrace& trace, const Params& params, const ModelConfig& config,
                           int max_len) {
  if (max_len < 1) throw DomainError("greedy_decode: max_len must be >= 1");
  Tape<double> tape;
  Binding bind(tape, params, false);
  const VarD outputs = tape.constant(trace.encoder_hiddens);
  DecoderState state = initial_state(tape, tape.constant(trace.final_cell));

  DecodeResult result;
  std::vector<TensorD> rows;
  for (int step = 0; step < max_len; ++step) {
    auto out = decode_step(bind, config, state, outputs);
    const int tok = argmax(out.logits.value());
    if (tok == StageVocabulary::kEos) break;
    result.tokens.push_back(tok);
    if (out.attention) rows.push_back(out.attention->value());
    state = out.state;
    state.previous_token = tok;
  }
  if (!rows.empty()) {
    result.graph_attention.resize(static_cast<Eigen::Index>(rows.size()), rows.front().cols());
    for (std::size_t i = 0; i < rows.size(); ++i) result.graph_attention.row(static_cast<Eigen::Index>(i)) = rows[i];
  } else {
    result.graph_attention.resize(0, config.graph_attention ? trace.encoder_hiddens.rows() : 0);
  }
  return result;
}

DecodeResult predict(const Params& params, const ModelConfig& config, const DynGraphSample& sample) {
  return greedy_decode(encode_trace(params, config, sample), params, config, config.max_len);
}

namespace {

void check_target(const ModelConfig& config, const DynGraphSample& sample) {
  if (sample.target.empty()) throw DataError("sample " + sample.user_id + ": empty target");
  if (static_cast<int>(sample.target.size()) > config.max_len) {
    throw DataError("sample " + sample.user_id + ": target length " + std::to_string(sample.target.size()) +
                    " exceeds max_len " + std::to_string(config.max_len));
  }
}

// Runs the teacher-forced decoder for `positions` steps; positions past the
// sample's M + 1 are fed PAD and excluded from the loss.
VarD decoder_loss(Binding& params, const ModelConfig& config, const DynGraphSample& sample,
                  const EncodedSample& enc, std::size_t positions) {
  auto& tape = params.tape();
  const std::size_t real = sample.target.size() + 1;
  DecoderState state = initial_state(tape, enc.final_cell);
  std::vector<VarD> terms;
  terms.reserve(real);
  for (std::size_t m = 0; m < std::max(positions, real); ++m) {
    const int target = m < sample.target.size() ? sample.target[m]
                       : m == sample.target.size() ? StageVocabulary::kEos
                                                   : StageVocabulary::kPad;
    auto out = decode_step(params, config, state, enc.outputs);
    if (target != StageVocabulary::kPad) terms.push_back(cross_entropy(out.logits, target));
    state = out.state;
    state.previous_token = m < sample.target.size() ? sample.target[m] : StageVocabulary::kPad;
  }
  return scale(sum(concat_cols(terms)), 1.0 / static_cast<double>(real));
}

}  // namespace

VarD teacher_forced_loss(Binding& params, const ModelConfig& config, const DynGraphSample& sample) {
  check_target(config, sample);
  const auto enc = encode(params, config, prepare_input(sample, config.mode));
  return decoder_loss(params, config, sample, enc, sample.target.size() + 1);
}

std::vector<VarD> batch_losses(Binding& params, const ModelConfig& config,
                               std::span<const DynGraphSample* const> batch) {
  std::vector<EncoderInput> inputs;
  std::size_t max_steps = 0;
  std::size_t max_positions = 0;
  for (const auto* s : batch) {
    check_target(config, *s);
    inputs.push_back(prepare_input(*s, config.mode));
    max_steps = std::max(max_steps, inputs.back().length);
    max_positions = std::max(max_positions, s->target.size() + 1);
  }
  std::vector<VarD> losses;
  losses.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto enc = encode(params, config, inputs[i], max_steps);
    losses.push_back(decoder_loss(params, config, *batch[i], enc, max_positions));
  }
  return losses;
}

std::pair<std::size_t, std::size_t> teacher_forced_hits(const Params& params, const ModelConfig& config,
                                                        const DynGraphSample& sample) {
  check_target(config, sample);
  Tape<double> tape;
  Binding bind(tape, params, false);
  const auto enc = encode(bind, config, prepare_input(sample, config.mode));
  DecoderState state = initial_state(tape, enc.final_cell);
  std::size_t hits = 0;
  const std::size_t positions = sample.target.size() + 1;
  for (std::size_t m = 0; m < positions; ++m) {
    const int target = m < sample.target.size() ? sample.target[m] : StageVocabulary::kEos;
    auto out = decode_step(bind, config, state, enc.outputs);
    hits += argmax(out.logits.value()) == target;
    state = out.state;
    state.previous_token = target;
  }
  return {hits, positions};
}

}  // namespace dgseq
