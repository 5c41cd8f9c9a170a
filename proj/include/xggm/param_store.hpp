#pragma once

#include <map>
#include <string>

#include "xggm/matrix.hpp"
#include "xggm/tape.hpp"

namespace xggm {

/// Named parameter matrices. std::map keeps iteration order deterministic,
/// which the optimizer and checkpoint writer rely on.
class ParamStore {
 public:
  void insert(const std::string& name, Matrix value) {
    if (params_.count(name)) throw ContractError("param store: duplicate '" + name + "'");
    params_.emplace(name, std::move(value));
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Matrix& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("param store: missing '" + name + "'");
    return it->second;
  }

  const Matrix& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("param store: missing '" + name + "'");
    return it->second;
  }

  std::map<std::string, Matrix>& all() { return params_; }
  const std::map<std::string, Matrix>& all() const { return params_; }

  bool all_finite() const {
    for (const auto& [name, m] : params_)
      if (!m.all_finite()) return false;
    return true;
  }

 private:
  std::map<std::string, Matrix> params_;
};

/// Lazily registers store parameters as leaves of one tape. A parameter used
/// several times within a step is registered once and the Var is shared, so
/// gradients accumulate; parameters never requested stay off the tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_.param(name, store_.get(name));
    bound_.emplace(name, v);
    return v;
  }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::map<std::string, Var> bound_;
};

}  // namespace xggm
