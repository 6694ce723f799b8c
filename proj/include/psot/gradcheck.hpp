// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "psot/autodiff.hpp"
#include "psot/parameters.hpp"

namespace psot {

struct ParameterCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

struct GradientCheckReport {
  std::vector<ParameterCheck> parameters;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  double tolerance = 0.0;
  bool passed = false;
};

// Builds a scalar loss on the given tape from the given parameters.
template <std::floating_point S>
using LossBuilder = std::function<ad::Var<S>(ad::Tape<S>&, ParameterStore<S>&)>;

// Relative error with an absolute floor on the denominator so that entries
// whose true gradient is zero compare in absolute terms.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares the tape gradient of `loss` against central differences
// (f(w+eps) - f(w-eps)) / (2 eps) for every scalar of every parameter.
// Passes iff the largest relative error does not exceed `tol`.
template <std::floating_point S>
GradientCheckReport gradient_check(const LossBuilder<S>& loss, ParameterStore<S>& store, double eps, double tol,
                                   double floor = 1e-8) {
  static_assert(sizeof(S) >= sizeof(double), "gradient_check requires high-precision scalars");

  store.zero_grad();
  {
    ad::Tape<S> tape;
    auto root = loss(tape, store);
    const S value = root.value()[0];
    if (!std::isfinite(value)) throw NumericalError("gradient_check: non-finite loss at the base point");
    tape.backward(root);
  }

  auto evaluate = [&](const std::string& name) {
    ad::Tape<S> tape;
    const S value = loss(tape, store).value()[0];
    if (!std::isfinite(value)) throw NumericalError("gradient_check: non-finite loss probing parameter '" + name + "'");
    return value;
  };

  GradientCheckReport report;
  report.tolerance = tol;
  for (auto& p : store) {
    const Tensor<S> analytic = p.gradient;
    ParameterCheck check{p.name};
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const S original = p.value[i];
      // Difference over the step actually representable in S.
      const S up = original + static_cast<S>(eps);
      const S down = original - static_cast<S>(eps);
      p.value[i] = up;
      const S plus = evaluate(p.name);
      p.value[i] = down;
      const S minus = evaluate(p.name);
      p.value[i] = original;
      const double numeric = static_cast<double>((plus - minus) / (up - down));
      const double err = relative_error(static_cast<double>(analytic[i]), numeric, floor);
      if (err > check.max_rel_error || i == 0) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = static_cast<double>(analytic[i]);
        check.numeric = numeric;
      }
    }
    if (check.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = check.max_rel_error;
      report.worst_parameter = p.name;
    }
    report.parameters.push_back(check);
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace psot
