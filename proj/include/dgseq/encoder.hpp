#pragma once

#include <optional>
#include <vector>

#include "dgseq/diffcore/ops.hpp"
#include "dgseq/model.hpp"

namespace dgseq {

/// Row-normalised neighbour indicator matrices. Row n of `forward` averages
/// over {u : A[n][u] > 0}, row n of `backward` over {u : A[u][n] > 0}. Rows of
/// nodes without neighbours in a direction are zero (empty mean = 0).
struct NeighbourMeans {
  TensorD forward;
  TensorD backward;
};

NeighbourMeans neighbour_means(const TensorD& adjacency);

/// Bidirectional k-hop graph convolution of one snapshot: N x 2d embeddings.
VarD encode_snapshot(Binding& params, const SnapshotGraph& graph, const EncoderConfig& config);

/// Element-wise max over nodes of the projected embeddings: 1 x 2d.
VarD pool_max(Binding& params, const VarD& node_embeddings);

struct AttentionPool {
  VarD graph;    // 1 x 2d
  VarD weights;  // N x 1, on the simplex
};

/// Feed-forward node-to-graph attention: e_n = w2' tanh(W1 h_n + b1),
/// alpha = softmax(e), g = sum_n alpha_n h_n.
AttentionPool pool_attention(Binding& params, const VarD& node_embeddings);

struct SequenceEncoding {
  std::vector<LstmState<double>> states;  // one per input step
};

/// Single-layer LSTM over the inputs from a zero initial state.
SequenceEncoding encode_sequence(Binding& params, const std::vector<VarD>& inputs);

/// Model-ready encoder input for one sample under a given mode.
struct EncoderInput {
  std::vector<SnapshotGraph> snapshots;  // graph modes
  std::vector<int> tokens;               // sequence_only mode
  std::size_t length = 0;                // true number of encoder steps
};

EncoderInput prepare_input(const DynGraphSample& sample, ModelMode mode);

/// Taped encoder pass. The input may be padded to `padded_length` steps (zero
/// snapshots or zero token vectors); only the first `input.length` steps are
/// exposed through `outputs` and `final_cell`.
struct EncodedSample {
  VarD outputs;     // length x h, o_1..o_T
  VarD final_cell;  // 1 x h, C_T
  std::vector<VarD> node_embeddings;
  std::vector<VarD> node_attention;
  std::vector<VarD> graph_embeddings;
};

EncodedSample encode(Binding& params, const ModelConfig& config, const EncoderInput& input,
                     std::size_t padded_length = 0);

/// Values of one encoder pass, for decoding and inspection.
struct EncoderTrace {
  std::vector<TensorD> node_embeddings;  // T x (N x 2d)
  std::vector<TensorD> node_attention;   // T x (N x 1), node_attention pooling only
  TensorD graph_embeddings;              // T x 2d
  TensorD encoder_hiddens;               // T x h
  TensorD final_cell;                    // 1 x h
};

EncoderTrace make_trace(const EncodedSample& encoded);
EncoderTrace encode_trace(const Params& params, const ModelConfig& config, const DynGraphSample& sample);

}  // namespace dgseq
