#include "alseg/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "alseg/errors.h"
#include "alseg/rng.h"

namespace alseg {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<double()>& f, std::span<Tensor* const> params,
                           std::span<const Matrix> analytic, const GradCheckOptions& opts) {
  if (analytic.size() != params.size()) throw ContractError("grad_check: gradient count");
  GradCheckResult res;
  Rng rng(mix_seed(opts.seed));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = params[p]->value();
    const Matrix& a = analytic[p];
    if (a.rows() != w.rows() || a.cols() != w.cols()) {
      throw ContractError("grad_check: analytic gradient shape mismatch");
    }
    std::vector<Index> entries(static_cast<std::size_t>(w.size()));
    std::iota(entries.begin(), entries.end(), Index{0});
    if (opts.max_entries_per_tensor > 0 && entries.size() > opts.max_entries_per_tensor) {
      shuffle(entries, rng);
      entries.resize(opts.max_entries_per_tensor);
    }
    for (Index k : entries) {
      const double orig = w.data()[k];
      w.data()[k] = orig + opts.h;
      const double fp = f();
      w.data()[k] = orig - opts.h;
      const double fm = f();
      w.data()[k] = orig;
      const double numeric = (fp - fm) / (2 * opts.h);
      const double err = relative_error(a.data()[k], numeric, opts.floor);
      ++res.checked;
      if (!(err <= res.max_relative_error)) {
        res.max_relative_error = err;
        res.worst = std::to_string(p) + "[" + std::to_string(k) + "]";
      }
    }
  }
  res.passed = res.max_relative_error < opts.tol;
  return res;
}

GradCheckResult grad_check(const std::function<Var(Tape&)>& f,
                           std::span<Tensor* const> params, const GradCheckOptions& opts) {
  for (Tensor* t : params) t->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    tape.backward(out);
  }
  std::vector<Matrix> analytic;
  for (Tensor* t : params) analytic.push_back(t->grad());
  auto value = [&] {
    Tape tape;
    return f(tape).scalar();
  };
  return grad_check(value, params, analytic, opts);
}

}  // namespace alseg
