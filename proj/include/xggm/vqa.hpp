#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "xggm/concepts.hpp"
#include "xggm/matrix.hpp"
#include "xggm/param_store.hpp"
#include "xggm/rng.hpp"
#include "xggm/tape.hpp"

namespace xggm {

/// One question: "which attribute does <queried class> have in this scene?"
struct VqaExample {
  SceneSpec scene;
  std::size_t queried_class_id = 0;
  std::size_t answer_attribute_id = 0;

  bool operator==(const VqaExample&) const = default;

  void validate(const ConceptVocabulary& vocab) const {
    scene.validate(vocab);
    bool found = false;
    for (const auto& o : scene.objects) {
      if (o.class_id != queried_class_id) continue;
      if (o.attribute_id != answer_attribute_id)
        throw ContractError("example: answer does not match the queried object's attribute");
      found = true;
    }
    if (!found) throw ContractError("example: queried class not present in scene");
  }
};

struct VqaForward {
  Var x;                // cross-modality representation, d x 1
  Var object_features;  // N_o x d
};

inline void init_linear(ParamStore& store, Rng& rng, const std::string& w_name,
                        const std::string& b_name, std::size_t fan_in, std::size_t fan_out,
                        bool bias_is_column = false) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
  store.insert(w_name, gaussian_matrix(rng, fan_in, fan_out, 0.0, sd));
  store.insert(b_name, bias_is_column ? Matrix(fan_out, 1) : Matrix(1, fan_out));
}

/// Object encoder, question encoder, fusion, classifier. Weights N(0, 1/fan_in),
/// biases zero.
inline void init_vqa_params(ParamStore& store, Rng& rng, std::size_t embed_dim, std::size_t d,
                            std::size_t num_answers) {
  init_linear(store, rng, "vqa.w_obj", "vqa.b_obj", 2 * embed_dim, d);
  init_linear(store, rng, "vqa.w_q", "vqa.b_q", embed_dim, d);
  init_linear(store, rng, "vqa.w_fuse", "vqa.b_fuse", d, d);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  store.insert("vqa.w_cls", gaussian_matrix(rng, num_answers, d, 0.0, sd));
  store.insert("vqa.b_cls", Matrix(num_answers, 1));
}

/// Cross-modality representation x (d x 1) and per-object features O (N_o x d).
/// Each object feature is relu(W_obj (class_emb (+) attr_emb) + b_obj + noise);
/// x fuses the mean object feature with the encoded question.
inline VqaForward vqa_r_forward(Tape& tape, BoundParams& params, const ConceptVocabulary& vocab,
                                const VqaExample& ex, const Matrix* feature_noise = nullptr) {
  ex.validate(vocab);
  const std::size_t n = ex.scene.size();
  const std::size_t de = vocab.embed_dim;

  Var w_obj = params("vqa.w_obj");
  if (w_obj.value().rows() != 2 * de)
    throw ConfigError("vqa_r_forward: object encoder expects 2*embed_dim inputs");
  const std::size_t d = w_obj.value().cols();

  Matrix embeds(n, 2 * de);
  for (std::size_t i = 0; i < n; ++i) {
    Matrix c = embed_concept(vocab, ConceptKind::kClass, ex.scene.objects[i].class_id);
    Matrix a = embed_concept(vocab, ConceptKind::kAttribute, ex.scene.objects[i].attribute_id);
    for (std::size_t k = 0; k < de; ++k) {
      embeds(i, k) = c.at(k);
      embeds(i, de + k) = a.at(k);
    }
  }

  Var pre = tape.add_rowvec(tape.matmul(tape.constant(std::move(embeds)), w_obj),
                            params("vqa.b_obj"));
  if (feature_noise != nullptr) {
    if (feature_noise->rows() != n || feature_noise->cols() != d)
      throw ConfigError("vqa_r_forward: feature noise must be N_o x d");
    pre = tape.add(pre, tape.constant(*feature_noise));
  }
  Var objects = tape.relu(pre);

  Matrix q_embed =
      transpose(embed_concept(vocab, ConceptKind::kClass, ex.queried_class_id));  // 1 x de
  Var q_enc = tape.add(tape.matmul(tape.constant(std::move(q_embed)), params("vqa.w_q")),
                       params("vqa.b_q"));
  Var pooled = tape.mean_rows(objects);
  Var fused = tape.relu(tape.add(tape.matmul(tape.add(pooled, q_enc), params("vqa.w_fuse")),
                                 params("vqa.b_fuse")));
  return VqaForward{tape.transpose(fused), objects};
}

inline VqaForward vqa_r_forward(Tape& tape, BoundParams& params, const ConceptVocabulary& vocab,
                                const VqaExample& ex, Rng& rng, double feature_noise) {
  if (feature_noise < 0.0) throw ParameterError("vqa_r_forward: feature_noise < 0");
  if (feature_noise == 0.0) return vqa_r_forward(tape, params, vocab, ex);
  const std::size_t d = params("vqa.w_obj").value().cols();
  Matrix noise = gaussian_matrix(rng, ex.scene.size(), d, 0.0, feature_noise);
  return vqa_r_forward(tape, params, vocab, ex, &noise);
}

/// Answer logits. With a graph representation vbar present the classifier sees
/// exactly x + vbar, otherwise x alone.
inline Var vqa_c_forward(Tape& tape, BoundParams& params, Var x,
                         std::optional<Var> vbar = std::nullopt) {
  Var w = params("vqa.w_cls");
  if (x.value().cols() != 1 || w.value().cols() != x.value().rows())
    throw ConfigError("vqa_c_forward: x must be d x 1 matching the classifier");
  Var input = x;
  if (vbar.has_value()) {
    if (vbar->value().rows() != x.value().rows() || vbar->value().cols() != 1)
      throw ConfigError("vqa_c_forward: vbar must match x");
    input = tape.add(x, *vbar);
  }
  return tape.add(tape.matmul(w, input), params("vqa.b_cls"));
}

inline Matrix one_hot(std::size_t index, std::size_t length) {
  if (index >= length) throw IndexError("one_hot: index out of range");
  Matrix t(length, 1);
  t.at(index) = 1.0;
  return t;
}

/// Mean binary cross-entropy over answer dimensions, probabilities clamped to
/// [1e-12, 1 - 1e-12] before the logs.
inline Var bce_loss(Tape& tape, Var logits, const Matrix& target) {
  if (target.cols() != 1 || logits.value().cols() != 1 ||
      target.rows() != logits.value().rows())
    throw ContractError("bce_loss: logits/target length mismatch");
  for (std::size_t k = 0; k < target.size(); ++k)
    if (target.at(k) != 0.0 && target.at(k) != 1.0)
      throw ContractError("bce_loss: target entries must be 0 or 1");

  constexpr double kEps = 1e-12;
  Var p = tape.clamp_const(tape.sigmoid(logits), kEps, 1.0 - kEps);
  Var one_minus_p = tape.add_const(tape.scale(p, -1.0), 1.0);

  Matrix one_minus_t = target;
  for (std::size_t k = 0; k < one_minus_t.size(); ++k)
    one_minus_t.at(k) = 1.0 - one_minus_t.at(k);

  Var pos = tape.mul(tape.constant(target), tape.log(p));
  Var neg = tape.mul(tape.constant(std::move(one_minus_t)), tape.log(one_minus_p));
  return tape.scale(tape.mean_all(tape.add(pos, neg)), -1.0);
}

inline std::size_t argmax_answer(const Matrix& logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k)
    if (logits.at(k) > logits.at(best)) best = k;
  return best;
}

}  // namespace xggm
