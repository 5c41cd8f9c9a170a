#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xggm/param_store.hpp"
#include "xggm/rng.hpp"
#include "xggm/tape.hpp"

namespace xggm {

struct EncoderDims {
  std::size_t n_objects = 8;
  std::size_t d = 16;
  std::size_t n_k = 2;  // encoder iterations
  std::size_t n_l = 2;  // GCN layers per iteration
  bool tie_assembly = false;
};

namespace detail {

inline std::string layer_w(const std::string& prefix, std::size_t k, std::size_t l) {
  return prefix + ".k" + std::to_string(k) + ".l" + std::to_string(l) + ".w";
}
inline std::string layer_b(const std::string& prefix, std::size_t k, std::size_t l) {
  return prefix + ".k" + std::to_string(k) + ".l" + std::to_string(l) + ".b";
}
inline std::string assembly_w(const std::string& prefix, std::size_t k, bool tied) {
  return tied ? prefix + ".asm.w" : prefix + ".k" + std::to_string(k) + ".asm.w";
}
inline std::string assembly_b(const std::string& prefix, std::size_t k, bool tied) {
  return tied ? prefix + ".asm.b" : prefix + ".k" + std::to_string(k) + ".asm.b";
}

}  // namespace detail

/// Per-node weight stacks ((N_o*d) x d) drawn from N(0, 1/d); biases zero.
inline void init_encoder_params(ParamStore& store, Rng& rng, const EncoderDims& dims,
                                const std::string& prefix = "enc") {
  const double sd = 1.0 / std::sqrt(static_cast<double>(dims.d));
  const std::size_t stack_rows = dims.n_objects * dims.d;
  for (std::size_t k = 1; k <= dims.n_k; ++k) {
    for (std::size_t l = 0; l < dims.n_l; ++l) {
      store.insert(detail::layer_w(prefix, k, l),
                   gaussian_matrix(rng, stack_rows, dims.d, 0.0, sd));
      store.insert(detail::layer_b(prefix, k, l), Matrix(dims.n_objects, dims.d));
    }
    if (!dims.tie_assembly || k == 1) {
      store.insert(detail::assembly_w(prefix, k, dims.tie_assembly),
                   gaussian_matrix(rng, stack_rows, dims.d, 0.0, sd));
      store.insert(detail::assembly_b(prefix, k, dims.tie_assembly),
                   Matrix(dims.n_objects, dims.d));
    }
  }
}

/// One GCN-style layer with per-node feature transforms:
/// row i of output = sigmoid((sum_j R[i][j] v_j) W_i + b_i).
inline Var gcn_layer(Tape& tape, Var relation, Var nodes, Var weight_stack, Var bias) {
  const Matrix& r = relation.value();
  const Matrix& v = nodes.value();
  if (r.rows() != r.cols() || r.rows() != v.rows())
    throw ContractError("gcn_layer: relation must be N_o x N_o matching nodes");
  return tape.sigmoid(
      tape.per_node_linear(tape.matmul(relation, nodes), weight_stack, bias));
}

/// One full encoder iteration: N_l stacked GCN layers under a fixed relation,
/// then the layer-sum assembly over all N_l + 1 intermediate node states
/// (the raw input included): sum_l relu(V^(l) W_a + b_a).
inline Var encoder_iteration(Tape& tape, BoundParams& params, const EncoderDims& dims,
                             std::size_t k, Var v_in, Var relation,
                             const std::string& prefix = "enc") {
  if (k < 1 || k > dims.n_k) throw ContractError("encoder_iteration: iteration out of range");
  std::vector<Var> states{v_in};
  for (std::size_t l = 0; l < dims.n_l; ++l)
    states.push_back(gcn_layer(tape, relation, states.back(),
                               params(detail::layer_w(prefix, k, l)),
                               params(detail::layer_b(prefix, k, l))));

  Var w_a = params(detail::assembly_w(prefix, k, dims.tie_assembly));
  Var b_a = params(detail::assembly_b(prefix, k, dims.tie_assembly));
  std::optional<Var> out;
  for (Var state : states) {
    Var term = tape.relu(tape.per_node_linear(state, w_a, b_a));
    out = out ? tape.add(*out, term) : term;
  }
  return *out;
}

/// Relation regeneration from node features: sigmoid(V V^T).
inline Var relation_from_nodes(Tape& tape, Var nodes) {
  return tape.sigmoid(tape.matmul(nodes, tape.transpose(nodes)));
}

/// Mean over the node rows, returned as a d x 1 column.
inline Var graph_readout(Tape& tape, Var nodes) {
  return tape.transpose(tape.mean_rows(nodes));
}

struct IterationStep {
  Var nodes;                     // V_k
  std::optional<Var> relation;   // R_k (relation branch only)
  Var readout;                   // mean node representation, d x 1
};

using IterationTrace = std::vector<IterationStep>;

}  // namespace xggm
