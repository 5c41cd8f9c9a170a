#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "xggm/param_store.hpp"
#include "xggm/tape.hpp"

namespace xggm {

/// Builds a scalar loss Var on the given tape from bound parameters. Must be
/// deterministic: the checker re-evaluates it under coordinate perturbations.
using LossBuilder = std::function<Var(Tape&, BoundParams&)>;

struct GradCheckReport {
  struct Entry {
    std::string param;
    double max_rel_err = 0.0;
  };
  double max_rel_err = 0.0;
  std::vector<Entry> per_param;
};

namespace detail {

inline double eval_loss(const LossBuilder& f, const ParamStore& params) {
  Tape tape;
  BoundParams bound(tape, params);
  Var loss = f(tape, bound);
  const double v = loss.value().scalar();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss value");
  return v;
}

}  // namespace detail

/// Central finite differences against the tape's analytic gradients.
/// Relative error per coordinate: |analytic - centraldiff| / max(1, |centraldiff|).
/// `inject_error`, when nonzero, perturbs one analytic gradient entry; it exists
/// so the harness around this checker can be shown to fail loudly.
inline GradCheckReport grad_check(const LossBuilder& f, ParamStore params, double h = 1e-5,
                                  double inject_error = 0.0) {
  if (h <= 0.0) throw ParameterError("grad_check: h must be positive");

  GradMap analytic;
  {
    Tape tape;
    BoundParams bound(tape, params);
    Var loss = f(tape, bound);
    if (!std::isfinite(loss.value().scalar()))
      throw NumericError("grad_check: non-finite loss value");
    analytic = tape.backward(loss);
  }
  if (inject_error != 0.0 && !analytic.empty() && analytic.begin()->second.size() > 0)
    analytic.begin()->second.at(0) += inject_error;

  GradCheckReport report;
  for (const auto& [name, grad] : analytic) {
    GradCheckReport::Entry entry{name, 0.0};
    Matrix& theta = params.get(name);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double saved = theta.at(k);
      theta.at(k) = saved + h;
      const double fp = detail::eval_loss(f, params);
      theta.at(k) = saved - h;
      const double fm = detail::eval_loss(f, params);
      theta.at(k) = saved;
      const double cd = (fp - fm) / (2.0 * h);
      const double rel = std::abs(grad.at(k) - cd) / std::max(1.0, std::abs(cd));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace xggm
