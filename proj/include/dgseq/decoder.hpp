#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dgseq/encoder.hpp"

namespace dgseq {

struct DecoderState {
  LstmState<double> recurrent;
  int previous_token = StageVocabulary::kBos;
};

/// Greedy decoding output. `graph_attention` has one row per emitted token
/// (EOS excluded) and one column per snapshot; empty when graph-to-sequence
/// attention is disabled.
struct DecodeResult {
  std::vector<int> tokens;
  TensorD graph_attention;
};

struct Attention {
  VarD context;  // 1 x h
  VarD weights;  // 1 x T
};

/// Bilinear ("general") attention: score_t = s W_a o_t', beta = softmax(score),
/// context = sum_t beta_t o_t.
Attention graph_to_seq_attend(Binding& params, const VarD& decoder_hidden, const VarD& encoder_outputs);

struct StepOutput {
  VarD logits;  // 1 x V
  DecoderState state;
  std::optional<VarD> attention;
};

/// Embeds the previous token, advances the decoder LSTM, attends over the
/// encoder outputs and projects tanh(W_c [s; context] + b_c) to vocabulary logits.
StepOutput decode_step(Binding& params, const ModelConfig& config, const DecoderState& state,
                       const VarD& encoder_outputs);

/// Initial decoder state: zero hidden, cell = C_T, previous token BOS.
DecoderState initial_state(Tape<double>& tape, const VarD& final_cell);

/// Argmax with ties resolved towards the lowest index.
int argmax(const TensorD& row);

DecodeResult greedy_decode(const EncoderTrace& trace, const Params& params, const ModelConfig& config,
                           int max_len);

/// Encodes then greedily decodes one sample with config.max_len.
DecodeResult predict(const Params& params, const ModelConfig& config, const DynGraphSample& sample);

/// Mean token cross-entropy over the M target tokens plus EOS.
VarD teacher_forced_loss(Binding& params, const ModelConfig& config, const DynGraphSample& sample);

/// Per-sample losses for a padded batch: encoder inputs padded to the longest
/// input, targets padded with PAD (masked). Each entry equals the sample's
/// unbatched teacher_forced_loss.
std::vector<VarD> batch_losses(Binding& params, const ModelConfig& config,
                               std::span<const DynGraphSample* const> batch);

/// Fraction of target positions (including EOS) whose teacher-forced argmax
/// equals the target token; returns (correct, total).
std::pair<std::size_t, std::size_t> teacher_forced_hits(const Params& params, const ModelConfig& config,
                                                        const DynGraphSample& sample);

}  // namespace dgseq
