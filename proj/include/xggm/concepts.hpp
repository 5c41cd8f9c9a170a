#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xggm/matrix.hpp"
#include "xggm/rng.hpp"

namespace xggm {

enum class ConceptKind : std::uint64_t { kClass = 1, kAttribute = 2 };

/// Object-class / object-attribute vocabulary with deterministic unit-norm
/// pseudo-embeddings derived from (embed_seed, kind, id).
struct ConceptVocabulary {
  std::size_t num_classes = 0;
  std::size_t num_attributes = 0;
  std::size_t embed_dim = 0;
  std::uint64_t embed_seed = 0;

  void validate() const {
    if (num_classes < 2 || num_attributes < 2)
      throw ConfigError("vocabulary needs at least 2 classes and 2 attributes");
    if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  }
};

struct SceneObject {
  std::size_t class_id = 0;
  std::size_t attribute_id = 0;

  bool operator==(const SceneObject&) const = default;
};

/// Ordered object list of one scene; the graph over it is fully connected, so
/// no adjacency structure is stored.
struct SceneSpec {
  std::vector<SceneObject> objects;

  bool operator==(const SceneSpec&) const = default;

  std::size_t size() const { return objects.size(); }

  void validate(const ConceptVocabulary& vocab) const {
    for (const auto& o : objects) {
      if (o.class_id >= vocab.num_classes) throw IndexError("scene: class id out of bounds");
      if (o.attribute_id >= vocab.num_attributes)
        throw IndexError("scene: attribute id out of bounds");
    }
  }
};

inline Matrix embed_concept(const ConceptVocabulary& vocab, ConceptKind kind, std::size_t id) {
  const std::size_t bound =
      kind == ConceptKind::kClass ? vocab.num_classes : vocab.num_attributes;
  if (id >= bound) throw IndexError("embed_concept: id out of bounds");

  const std::uint64_t stream =
      (static_cast<std::uint64_t>(kind) << 32) | static_cast<std::uint64_t>(id);
  Rng rng(vocab.embed_seed, stream);
  Matrix v(vocab.embed_dim, 1);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (std::size_t k = 0; k < vocab.embed_dim; ++k) {
      v.at(k) = rng.standard_normal();
      norm_sq += v.at(k) * v.at(k);
    }
  } while (norm_sq < 1e-24);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (std::size_t k = 0; k < vocab.embed_dim; ++k) v.at(k) *= inv;
  return v;
}

inline double cosine(const Matrix& a, const Matrix& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a.at(k) * b.at(k);
    na += a.at(k) * a.at(k);
    nb += b.at(k) * b.at(k);
  }
  return dot / std::sqrt(na * nb);
}

/// Ground-truth relation matrix. Off-diagonal entries are the symmetrized
/// class-to-attribute cosine mapped onto [0, 1]; the diagonal is 1.
inline Matrix build_gt_relation(const SceneSpec& scene, const ConceptVocabulary& vocab) {
  scene.validate(vocab);
  const std::size_t n = scene.size();
  std::vector<Matrix> cls(n), attr(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = embed_concept(vocab, ConceptKind::kClass, scene.objects[i].class_id);
    attr[i] = embed_concept(vocab, ConceptKind::kAttribute, scene.objects[i].attribute_id);
  }
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = 0.5 * (cosine(cls[i], attr[j]) + cosine(cls[j], attr[i]));
      const double v = (c + 1.0) * 0.5;
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

/// The object features produced by the VQA forward pass are themselves the
/// node-feature ground truth; index i aligns with object n.
inline Matrix node_gt_features(const Matrix& object_features) { return object_features; }

}  // namespace xggm
