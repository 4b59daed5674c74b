#include "alseg/optim.h"

#include <cmath>
#include <sstream>

#include "alseg/errors.h"

namespace alseg {

void adam_step(ParameterSet& params, Gradients& grads, const AdamOptions& opts,
               AdamState& state) {
  if (grads.grads.size() != params.size()) throw ContractError("adam_step: gradient count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads.grads[i];
    if (g.rows() != params[i].tensor.rows() || g.cols() != params[i].tensor.cols()) {
      throw ContractError("adam_step: shape mismatch for " + params[i].name);
    }
    if (!g.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite gradient in " << params[i].name << " at step " << state.step + 1
          << " (max |g| over finite entries: "
          << g.unaryExpr([](double x) { return std::isfinite(x) ? std::abs(x) : 0.0; })
                 .maxCoeff()
          << ")";
      throw NumericError(msg.str());
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
      state.v.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].pad_row && grads.grads[i].rows() > 0) grads.grads[i].row(0).setZero();
  }
  if (opts.clip_norm > 0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > opts.clip_norm) grads *= opts.clip_norm / norm;
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads.grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = opts.beta1 * m + (1 - opts.beta1) * g;
    v = opts.beta2 * v + (1 - opts.beta2) * g.cwiseProduct(g);
    Matrix& w = params[i].tensor.value();
    w.array() -= opts.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opts.eps);
    if (params[i].pad_row && w.rows() > 0) w.row(0).setZero();
  }
}

}  // namespace alseg
