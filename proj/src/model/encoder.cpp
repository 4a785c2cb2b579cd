#include "dgseq/encoder.hpp"

#include "dgseq/errors.hpp"

namespace dgseq {

NeighbourMeans neighbour_means(const TensorD& adjacency) {
  const Eigen::Index n = adjacency.rows();
  NeighbourMeans m{TensorD::Zero(n, n), TensorD::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    int out_deg = 0;
    int in_deg = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      out_deg += adjacency(i, j) > 0.0;
      in_deg += adjacency(j, i) > 0.0;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adjacency(i, j) > 0.0) m.forward(i, j) = 1.0 / out_deg;
      if (adjacency(j, i) > 0.0) m.backward(i, j) = 1.0 / in_deg;
    }
  }
  return m;
}

VarD encode_snapshot(Binding& params, const SnapshotGraph& graph, const EncoderConfig& config) {
  if (graph.num_nodes() != config.num_nodes || graph.adjacency.cols() != config.num_nodes ||
      graph.features.rows() != config.num_nodes || graph.feature_dim() != config.feature_dim) {
    throw ConfigError("encode_snapshot: snapshot " + shape_string(graph.adjacency) + "/" +
                      shape_string(graph.features) + " does not match N=" + std::to_string(config.num_nodes) +
                      ", D=" + std::to_string(config.feature_dim));
  }
  auto& tape = params.tape();
  const auto means = neighbour_means(graph.adjacency);
  const VarD fwd_mean = tape.constant(means.forward);
  const VarD bwd_mean = tape.constant(means.backward);

  VarD x = tape.constant(graph.features);
  for (int hop = 1; hop <= config.hops; ++hop) {
    const std::string prefix = "enc.conv" + std::to_string(hop);
    const VarD fwd = matmul(fwd_mean, relu(affine(x, params(prefix + ".fwd.W"), params(prefix + ".fwd.b"))));
    const VarD bwd = matmul(bwd_mean, relu(affine(x, params(prefix + ".bwd.W"), params(prefix + ".bwd.b"))));
    x = concat_cols<double>({fwd, bwd});
  }
  return x;
}

VarD pool_max(Binding& params, const VarD& node_embeddings) {
  if (node_embeddings.rows() == 0) throw DomainError("pool_max: graph has no nodes");
  return max_rows(affine(node_embeddings, params("enc.pool.W"), params("enc.pool.b")));
}

AttentionPool pool_attention(Binding& params, const VarD& node_embeddings) {
  if (node_embeddings.rows() == 0) throw DomainError("pool_attention: graph has no nodes");
  const VarD scores =
      matmul(tanh(affine(node_embeddings, params("enc.att.W1"), params("enc.att.b1"))), params("enc.att.w2"));
  const VarD alpha = softmax(scores);
  return {matmul(transpose(alpha), node_embeddings), alpha};
}

SequenceEncoding encode_sequence(Binding& params, const std::vector<VarD>& inputs) {
  if (inputs.empty()) throw DomainError("encode_sequence: empty input sequence");
  const LstmWeights<double> w{params("enc.lstm.Wx"), params("enc.lstm.Wh"), params("enc.lstm.b")};
  const Eigen::Index h = w.recurrent.rows();
  auto& tape = params.tape();
  LstmState<double> state{tape.constant(TensorD::Zero(1, h)), tape.constant(TensorD::Zero(1, h))};
  SequenceEncoding out;
  out.states.reserve(inputs.size());
  for (const auto& x : inputs) {
    state = lstm_cell(x, state, w);
    out.states.push_back(state);
  }
  return out;
}

EncoderInput prepare_input(const DynGraphSample& sample, ModelMode mode) {
  EncoderInput in;
  switch (mode) {
    case ModelMode::dynamic:
      in.snapshots = sample.snapshots;
      in.length = in.snapshots.size();
      break;
    case ModelMode::static_aggregate:
      in.snapshots = {aggregate_static(sample)};
      in.length = 1;
      break;
    case ModelMode::sequence_only:
      in.tokens = flatten_to_sequence(sample);
      in.length = in.tokens.size();
      break;
  }
  if (in.length == 0) throw DataError("sample " + sample.user_id + ": no encoder input steps");
  return in;
}

EncodedSample encode(Binding& params, const ModelConfig& config, const EncoderInput& input,
                     std::size_t padded_length) {
  if (input.length == 0) throw DomainError("encode: empty input");
  const std::size_t steps = std::max(padded_length, input.length);
  auto& tape = params.tape();
  const auto& ec = config.encoder;
  EncodedSample enc;
  std::vector<VarD> inputs;
  inputs.reserve(steps);

  if (config.mode == ModelMode::sequence_only) {
    const VarD table = params("enc.embed");
    for (std::size_t t = 0; t < steps; ++t) {
      if (t < input.length) {
        const int tok = input.tokens[t];
        if (tok < 0 || tok >= ec.num_nodes) throw DataError("encode: subforum token out of range");
        inputs.push_back(slice_rows(table, tok, 1));
      } else {
        inputs.push_back(tape.constant(TensorD::Zero(1, ec.embedding_width())));
      }
    }
  } else {
    const auto zero = SnapshotGraph::zeros(ec.num_nodes, ec.feature_dim);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto& snap = t < input.length ? input.snapshots[t] : zero;
      VarD h = encode_snapshot(params, snap, ec);
      VarD g;
      if (ec.pooling == Pooling::max_pool) {
        g = pool_max(params, h);
      } else {
        auto pooled = pool_attention(params, h);
        g = pooled.graph;
        if (t < input.length) enc.node_attention.push_back(pooled.weights);
      }
      if (t < input.length) {
        enc.node_embeddings.push_back(h);
        enc.graph_embeddings.push_back(g);
      }
      inputs.push_back(g);
    }
  }

  const auto seq = encode_sequence(params, inputs);
  std::vector<VarD> hidden;
  hidden.reserve(input.length);
  for (std::size_t t = 0; t < input.length; ++t) hidden.push_back(seq.states[t].hidden);
  enc.outputs = concat_rows(hidden);
  enc.final_cell = seq.states[input.length - 1].cell;
  return enc;
}

EncoderTrace make_trace(const EncodedSample& encoded) {
  EncoderTrace tr;
  for (const auto& v : encoded.node_embeddings) tr.node_embeddings.push_back(v.value());
  for (const auto& v : encoded.node_attention) tr.node_attention.push_back(v.value());
  if (!encoded.graph_embeddings.empty()) {
    const auto& first = encoded.graph_embeddings.front().value();
    tr.graph_embeddings.resize(static_cast<Eigen::Index>(encoded.graph_embeddings.size()), first.cols());
    for (std::size_t t = 0; t < encoded.graph_embeddings.size(); ++t) {
      tr.graph_embeddings.row(static_cast<Eigen::Index>(t)) = encoded.graph_embeddings[t].value();
    }
  }
  tr.encoder_hiddens = encoded.outputs.value();
  tr.final_cell = encoded.final_cell.value();
  return tr;
}

EncoderTrace encode_trace(const Params& params, const ModelConfig& config, const DynGraphSample& sample) {
  Tape<double> tape;
  Binding bind(tape, params, false);
  return make_trace(encode(bind, config, prepare_input(sample, config.mode)));
}

}  // namespace dgseq
