#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "xggm/rng.hpp"
#include "xggm/vqa.hpp"

namespace xggm {

struct DatasetConfig {
  std::size_t num_classes = 8;
  std::size_t num_attributes = 8;
  std::size_t n_objects = 8;
  std::size_t train_size = 2000;
  std::size_t id_test_size = 500;
  std::size_t ood_test_size = 500;
  double holdout_fraction = 0.2;  // compositions excluded from train
  double rare_fraction = 0.15;    // train compositions down-weighted
  double rare_weight = 0.05;
  double tail_quantile = 0.2;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes < 2 || num_attributes < 2)
      throw ConfigError("dataset: need at least 2 classes and 2 attributes");
    if (n_objects < 2) throw ConfigError("dataset: n_objects must be at least 2");
    if (n_objects > num_classes)
      throw ConfigError("dataset: n_objects exceeds num_classes (scene classes are distinct)");
    if (train_size < 1 || id_test_size < 1 || ood_test_size < 1)
      throw ConfigError("dataset: split sizes must be at least 1");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
      throw ConfigError("dataset: holdout_fraction must lie in (0,1)");
    if (rare_fraction < 0.0 || holdout_fraction + rare_fraction >= 1.0)
      throw ConfigError("dataset: holdout_fraction + rare_fraction must be < 1");
    if (rare_weight <= 0.0 || rare_weight > 1.0)
      throw ConfigError("dataset: rare_weight must lie in (0,1]");
    if (!(tail_quantile > 0.0 && tail_quantile <= 1.0))
      throw ConfigError("dataset: tail_quantile must lie in (0,1]");
  }
};

using CompositionKey = std::pair<std::size_t, std::size_t>;  // (class_id, attribute_id)
using CompositionFreq = std::map<CompositionKey, std::size_t>;

struct SyntheticSplit {
  std::vector<VqaExample> train;
  std::vector<VqaExample> id_test;
  std::vector<VqaExample> ood_test;
  CompositionFreq composition_freq;  // object-level occurrences in train scenes
  std::vector<CompositionKey> held_out;
  std::vector<CompositionKey> rare;
};

namespace detail {

struct CompositionTable {
  // weight 0 = held out, rare_weight = rare, 1 = ordinary
  std::vector<double> weight;  // indexed class * num_attributes + attribute
  std::size_t num_attributes = 0;

  double get(std::size_t c, std::size_t a) const { return weight[c * num_attributes + a]; }
};

inline void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

/// Weighted attribute draw for one class; weights are fixed per dataset.
struct ClassSampler {
  std::vector<std::size_t> attrs;
  std::vector<double> cumulative;
  double total = 0.0;

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    if (idx >= attrs.size()) idx = attrs.size() - 1;
    return attrs[idx];
  }
};

}  // namespace detail

/// Deterministic synthetic benchmark: a uniformly chosen holdout set of
/// compositions never appears in train scenes, a further set is rare
/// (down-weighted), OOD test questions target held-out or rare compositions,
/// and the ID test mirrors the train distribution.
inline SyntheticSplit generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const std::size_t total = cfg.num_classes * cfg.num_attributes;

  Rng holdout_rng(cfg.seed, 0);
  Rng rare_rng(cfg.seed, 1);
  Rng train_rng(cfg.seed, 2);
  Rng id_rng(cfg.seed, 3);
  Rng ood_rng(cfg.seed, 4);

  const std::size_t n_holdout =
      static_cast<std::size_t>(std::llround(cfg.holdout_fraction * static_cast<double>(total)));
  if (n_holdout >= total) throw ConfigError("dataset: every composition would be held out");

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  detail::fisher_yates(order, holdout_rng);

  SyntheticSplit split;
  detail::CompositionTable table;
  table.num_attributes = cfg.num_attributes;
  table.weight.assign(total, 1.0);
  for (std::size_t i = 0; i < n_holdout; ++i) {
    table.weight[order[i]] = 0.0;
    split.held_out.push_back({order[i] / cfg.num_attributes, order[i] % cfg.num_attributes});
  }

  std::vector<std::size_t> remaining(order.begin() + n_holdout, order.end());
  detail::fisher_yates(remaining, rare_rng);
  std::size_t n_rare =
      static_cast<std::size_t>(std::llround(cfg.rare_fraction * static_cast<double>(total)));
  n_rare = std::min(n_rare, remaining.size());
  for (std::size_t i = 0; i < n_rare; ++i) {
    table.weight[remaining[i]] = cfg.rare_weight;
    split.rare.push_back({remaining[i] / cfg.num_attributes, remaining[i] % cfg.num_attributes});
  }

  std::vector<detail::ClassSampler> samplers(cfg.num_classes);
  std::vector<std::size_t> allowed_classes;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    auto& s = samplers[c];
    for (std::size_t a = 0; a < cfg.num_attributes; ++a) {
      const double w = table.get(c, a);
      if (w <= 0.0) continue;
      s.total += w;
      s.attrs.push_back(a);
      s.cumulative.push_back(s.total);
    }
    if (!s.attrs.empty()) allowed_classes.push_back(c);
  }
  if (allowed_classes.size() < cfg.n_objects)
    throw ConfigError("dataset: too few classes retain any allowed composition");

  auto make_scene = [&](Rng& rng, std::optional<CompositionKey> forced) {
    SceneSpec scene;
    std::vector<std::size_t> pool = allowed_classes;
    if (forced) {
      scene.objects.push_back({forced->first, forced->second});
      pool.erase(std::remove(pool.begin(), pool.end(), forced->first), pool.end());
    }
    while (scene.objects.size() < cfg.n_objects) {
      const std::size_t pick = rng.uniform_index(pool.size());
      const std::size_t c = pool[pick];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      scene.objects.push_back({c, samplers[c].draw(rng)});
    }
    for (std::size_t i = scene.objects.size(); i > 1; --i)
      std::swap(scene.objects[i - 1], scene.objects[rng.uniform_index(i)]);
    return scene;
  };

  auto make_indomain_example = [&](Rng& rng) {
    VqaExample ex;
    ex.scene = make_scene(rng, std::nullopt);
    const auto& target = ex.scene.objects[rng.uniform_index(cfg.n_objects)];
    ex.queried_class_id = target.class_id;
    ex.answer_attribute_id = target.attribute_id;
    return ex;
  };

  std::vector<CompositionKey> ood_pool = split.held_out;
  ood_pool.insert(ood_pool.end(), split.rare.begin(), split.rare.end());
  if (ood_pool.empty()) throw ConfigError("dataset: no held-out or rare compositions for OOD");

  for (std::size_t i = 0; i < cfg.train_size; ++i) {
    split.train.push_back(make_indomain_example(train_rng));
    for (const auto& o : split.train.back().scene.objects)
      ++split.composition_freq[{o.class_id, o.attribute_id}];
  }
  for (std::size_t i = 0; i < cfg.id_test_size; ++i)
    split.id_test.push_back(make_indomain_example(id_rng));
  for (std::size_t i = 0; i < cfg.ood_test_size; ++i) {
    const CompositionKey target = ood_pool[ood_rng.uniform_index(ood_pool.size())];
    VqaExample ex;
    ex.scene = make_scene(ood_rng, target);
    ex.queried_class_id = target.first;
    ex.answer_attribute_id = target.second;
    split.ood_test.push_back(std::move(ex));
  }
  return split;
}

struct Metrics {
  double all = 0.0;
  std::optional<double> tail;
  std::optional<double> head;
  std::optional<double> delta;  // (head - tail) / tail * 100, when defined
};

/// An example is "tail" iff the train frequency of its ground-truth composition
/// is at or below the lower tail_quantile nearest-rank quantile of its question
/// group's composition frequencies (group = queried class; zero counts of
/// unseen compositions included).
inline Metrics compute_metrics(const std::vector<std::size_t>& predictions,
                               const std::vector<VqaExample>& split, const CompositionFreq& freq,
                               std::size_t num_attributes, double tail_quantile = 0.2) {
  if (predictions.size() != split.size())
    throw ContractError("compute_metrics: predictions/split size mismatch");
  if (split.empty()) throw ContractError("compute_metrics: empty split");
  if (!(tail_quantile > 0.0 && tail_quantile <= 1.0))
    throw ParameterError("compute_metrics: tail_quantile must lie in (0,1]");

  auto freq_of = [&](std::size_t c, std::size_t a) -> std::size_t {
    auto it = freq.find({c, a});
    return it == freq.end() ? 0 : it->second;
  };

  std::map<std::size_t, std::size_t> thresholds;
  auto threshold_for = [&](std::size_t c) {
    auto it = thresholds.find(c);
    if (it != thresholds.end()) return it->second;
    std::vector<std::size_t> fs(num_attributes);
    for (std::size_t a = 0; a < num_attributes; ++a) fs[a] = freq_of(c, a);
    std::sort(fs.begin(), fs.end());
    std::size_t k = static_cast<std::size_t>(
        std::ceil(tail_quantile * static_cast<double>(num_attributes)));
    k = std::min(std::max<std::size_t>(k, 1), num_attributes);
    const std::size_t thr = fs[k - 1];
    thresholds.emplace(c, thr);
    return thr;
  };

  std::size_t correct = 0, tail_n = 0, tail_correct = 0, head_n = 0, head_correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& ex = split[i];
    const bool ok = predictions[i] == ex.answer_attribute_id;
    correct += ok;
    const bool is_tail = freq_of(ex.queried_class_id, ex.answer_attribute_id) <=
                         threshold_for(ex.queried_class_id);
    if (is_tail) {
      ++tail_n;
      tail_correct += ok;
    } else {
      ++head_n;
      head_correct += ok;
    }
  }

  Metrics m;
  m.all = 100.0 * static_cast<double>(correct) / static_cast<double>(split.size());
  if (tail_n > 0) m.tail = 100.0 * static_cast<double>(tail_correct) / static_cast<double>(tail_n);
  if (head_n > 0) m.head = 100.0 * static_cast<double>(head_correct) / static_cast<double>(head_n);
  if (m.tail && m.head && *m.tail > 0.0) m.delta = (*m.head - *m.tail) / *m.tail * 100.0;
  return m;
}

inline double metrics_gap(const Metrics& id, const Metrics& ood) { return id.all - ood.all; }

}  // namespace xggm
