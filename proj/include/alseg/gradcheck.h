#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "alseg/tensor.h"

namespace alseg {

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor): near-zero gradients are
  // compared on an absolute scale instead of amplifying roundoff.
  double floor = 1e-2;
  // 0 checks every entry; otherwise a seeded sample of this many per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  bool passed = true;
  double max_relative_error = 0.0;
  std::string worst;  // "<tensor index>[<flat index>]"
  std::size_t checked = 0;
};

double relative_error(double analytic, double numeric, double floor);

// `f` rebuilds the scalar on a fresh tape, watching the given tensors. The
// analytic gradient comes from one backward pass; the numeric one from
// central differences (f(x+h) - f(x-h)) / 2h.
GradCheckResult grad_check(const std::function<Var(Tape&)>& f,
                           std::span<Tensor* const> params, const GradCheckOptions& opts = {});

// Same comparison with caller-supplied analytic gradients.
GradCheckResult grad_check(const std::function<double()>& f, std::span<Tensor* const> params,
                           std::span<const Matrix> analytic, const GradCheckOptions& opts = {});

}  // namespace alseg
