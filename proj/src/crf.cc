#include "alseg/crf.h"

#include <cmath>
#include <limits>

#include "alseg/errors.h"

namespace alseg::crf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(const Matrix& e, const Matrix& a) {
  if (e.rows() < 1 || e.cols() != kNumTags) {
    throw ContractError("crf: emissions must be T x 4 with T >= 1");
  }
  if (a.rows() != kStates || a.cols() != kStates) {
    throw ContractError("crf: transitions must be 6 x 6");
  }
}

}  // namespace

bool allowed(int from, int to) {
  if (from == kStop || to == kStart) return false;
  if (from == kStart) return to == static_cast<int>(Tag::B) || to == static_cast<int>(Tag::S);
  if (to == kStop) return from == static_cast<int>(Tag::E) || from == static_cast<int>(Tag::S);
  return is_legal_transition(static_cast<Tag>(from), static_cast<Tag>(to));
}

Matrix masked(const Matrix& transitions) {
  if (transitions.rows() != kStates || transitions.cols() != kStates) {
    throw ContractError("crf: transitions must be 6 x 6");
  }
  Matrix m = transitions;
  for (int i = 0; i < kStates; ++i) {
    for (int j = 0; j < kStates; ++j) {
      if (!allowed(i, j)) m(i, j) = kNegInf;
    }
  }
  return m;
}

double log_sum_exp(const double* values, int n, int stride) {
  double mx = kNegInf;
  for (int k = 0; k < n; ++k) mx = std::max(mx, values[k * stride]);
  if (mx == kNegInf) return kNegInf;
  double s = 0;
  for (int k = 0; k < n; ++k) s += std::exp(values[k * stride] - mx);
  return mx + std::log(s);
}

double path_score(const Matrix& e, const Matrix& a, const TagSeq& tags) {
  check_inputs(e, a);
  if (static_cast<Index>(tags.size()) != e.rows()) {
    throw ContractError("crf: tag sequence length differs from emission rows");
  }
  const Matrix m = masked(a);
  int prev = kStart;
  double s = 0;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const int y = static_cast<int>(tags[t]);
    s += m(prev, y) + e(static_cast<Index>(t), y);
    prev = y;
  }
  return s + m(prev, kStop);
}

Lattice forward_backward(const Matrix& e, const Matrix& raw) {
  check_inputs(e, raw);
  const Matrix a = masked(raw);
  const Index T = e.rows();
  Lattice lat;
  lat.alpha.resize(T, kNumTags);
  lat.beta.resize(T, kNumTags);
  double buf[kNumTags];
  for (int j = 0; j < kNumTags; ++j) lat.alpha(0, j) = a(kStart, j) + e(0, j);
  for (Index t = 1; t < T; ++t) {
    for (int j = 0; j < kNumTags; ++j) {
      for (int i = 0; i < kNumTags; ++i) buf[i] = lat.alpha(t - 1, i) + a(i, j);
      lat.alpha(t, j) = log_sum_exp(buf, kNumTags) + e(t, j);
    }
  }
  for (int i = 0; i < kNumTags; ++i) buf[i] = lat.alpha(T - 1, i) + a(i, kStop);
  lat.log_z_forward = log_sum_exp(buf, kNumTags);

  for (int i = 0; i < kNumTags; ++i) lat.beta(T - 1, i) = a(i, kStop);
  for (Index t = T - 2; t >= 0; --t) {
    for (int i = 0; i < kNumTags; ++i) {
      for (int j = 0; j < kNumTags; ++j) buf[j] = a(i, j) + e(t + 1, j) + lat.beta(t + 1, j);
      lat.beta(t, i) = log_sum_exp(buf, kNumTags);
    }
  }
  for (int j = 0; j < kNumTags; ++j) buf[j] = a(kStart, j) + e(0, j) + lat.beta(0, j);
  lat.log_z_backward = log_sum_exp(buf, kNumTags);
  return lat;
}

Matrix marginals(const Lattice& lat) {
  Matrix m = (lat.alpha + lat.beta).array() - lat.log_z_forward;
  return m.array().exp();
}

ViterbiPath viterbi(const Matrix& e, const Matrix& raw) {
  check_inputs(e, raw);
  const Matrix a = masked(raw);
  const Index T = e.rows();
  Matrix delta(T, kNumTags);
  Eigen::Matrix<int, Eigen::Dynamic, kNumTags, Eigen::RowMajor> back(T, kNumTags);
  for (int j = 0; j < kNumTags; ++j) delta(0, j) = a(kStart, j) + e(0, j);
  for (Index t = 1; t < T; ++t) {
    for (int j = 0; j < kNumTags; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (int i = 0; i < kNumTags; ++i) {
        const double s = delta(t - 1, i) + a(i, j);
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      delta(t, j) = best + e(t, j);
      back(t, j) = arg;
    }
  }
  double best = kNegInf;
  int last = 0;
  for (int j = 0; j < kNumTags; ++j) {
    const double s = delta(T - 1, j) + a(j, kStop);
    if (s > best) {
      best = s;
      last = j;
    }
  }
  ViterbiPath path;
  path.tags.resize(static_cast<std::size_t>(T));
  path.tags[static_cast<std::size_t>(T - 1)] = static_cast<Tag>(last);
  for (Index t = T - 1; t > 0; --t) {
    last = back(t, last);
    path.tags[static_cast<std::size_t>(t - 1)] = static_cast<Tag>(last);
  }
  path.score = best;
  path.log_prob = best - forward_backward(e, a).log_z_forward;
  // Rounding can push a near-certain path a hair above zero.
  if (path.log_prob > 0) path.log_prob = 0;
  return path;
}

NllResult nll(const Matrix& e, const Matrix& raw, const TagSeq& gold) {
  check_inputs(e, raw);
  const Matrix a = masked(raw);
  if (static_cast<Index>(gold.size()) != e.rows()) {
    throw ContractError("crf: gold length " + std::to_string(gold.size()) + " vs " +
                        std::to_string(e.rows()) + " emission rows");
  }
  if (!is_valid_tag_seq(gold)) {
    throw ContractError("crf: gold path violates the BMES grammar (score -inf): " +
                        tags_to_string(gold));
  }
  const Index T = e.rows();
  const Lattice lat = forward_backward(e, a);
  const double log_z = lat.log_z_forward;

  NllResult r;
  r.nll = log_z - path_score(e, a, gold);
  if (r.nll < 0) r.nll = 0;  // roundoff when the gold path has probability ~1

  r.d_emissions = marginals(lat);
  r.d_transitions = Matrix::Zero(kStates, kStates);
  for (int j = 0; j < kNumTags; ++j) {
    r.d_transitions(kStart, j) = std::exp(a(kStart, j) + e(0, j) + lat.beta(0, j) - log_z);
    r.d_transitions(j, kStop) = std::exp(lat.alpha(T - 1, j) + a(j, kStop) - log_z);
  }
  for (Index t = 0; t + 1 < T; ++t) {
    for (int i = 0; i < kNumTags; ++i) {
      for (int j = 0; j < kNumTags; ++j) {
        if (a(i, j) == kNegInf) continue;
        r.d_transitions(i, j) +=
            std::exp(lat.alpha(t, i) + a(i, j) + e(t + 1, j) + lat.beta(t + 1, j) - log_z);
      }
    }
  }
  int prev = kStart;
  for (Index t = 0; t < T; ++t) {
    const int y = static_cast<int>(gold[static_cast<std::size_t>(t)]);
    r.d_emissions(t, y) -= 1.0;
    r.d_transitions(prev, y) -= 1.0;
    prev = y;
  }
  r.d_transitions(prev, kStop) -= 1.0;
  for (int i = 0; i < kStates; ++i) {
    for (int j = 0; j < kStates; ++j) {
      if (!allowed(i, j)) r.d_transitions(i, j) = 0.0;
    }
  }
  return r;
}

Var nll(Var emissions, Var transitions, const TagSeq& gold) {
  auto res = nll(emissions.value(), transitions.value(), gold);
  Tape& tape = *emissions.tape();
  const int ie = emissions.id(), ia = transitions.id();
  const int io = static_cast<int>(tape.size());
  return tape.record(Matrix::Constant(1, 1, res.nll), {emissions, transitions},
                     [ie, ia, io, de = std::move(res.d_emissions),
                      da = std::move(res.d_transitions)](Tape& tp) {
                       const double g = tp.grad(io)(0, 0);
                       tp.accumulate(ie, g * de);
                       tp.accumulate(ia, g * da);
                     });
}

}  // namespace alseg::crf
