#include "alseg/lstm.h"

#include <memory>
#include <string>
#include <vector>

#include "alseg/errors.h"
#include "alseg/ops.h"

namespace alseg {

namespace {

Index hidden_size(const LstmVars& p) { return p.U.rows(); }

void check_shapes(Var X, const LstmVars& p) {
  const Index h = hidden_size(p);
  if (p.U.cols() != 4 * h || p.W.cols() != 4 * h || p.b.rows() != 1 || p.b.cols() != 4 * h) {
    throw ContractError("lstm: packed gate parameters have inconsistent shapes");
  }
  if (X.cols() != p.W.rows()) {
    throw ContractError("lstm: input width " + std::to_string(X.cols()) + " vs W rows " +
                        std::to_string(p.W.rows()));
  }
}

Var gate(Var x, Var h_prev, const LstmVars& p, LstmGate g) {
  const Index h = hidden_size(p);
  const Index off = static_cast<Index>(g) * h;
  Var wx = ops::matmul(x, ops::slice_cols(p.W, off, h));
  Var uh = ops::matmul(h_prev, ops::slice_cols(p.U, off, h));
  return ops::add(ops::add(wx, uh), ops::slice_cols(p.b, off, h));
}

}  // namespace

LstmState lstm_step(Var x, Var h_prev, Var c_prev, const LstmVars& p) {
  Var f = ops::sigmoid(gate(x, h_prev, p, LstmGate::kForget));
  Var i = ops::sigmoid(gate(x, h_prev, p, LstmGate::kInput));
  Var o = ops::sigmoid(gate(x, h_prev, p, LstmGate::kOutput));
  Var g = ops::tanh(gate(x, h_prev, p, LstmGate::kCandidate));
  Var c = ops::add(ops::mul(c_prev, f), ops::mul(i, g));
  Var h = ops::mul(ops::tanh(c), o);
  return {h, c};
}

Var lstm_sequence_reference(Var X, const LstmVars& p, bool reverse) {
  check_shapes(X, p);
  Tape& tape = *X.tape();
  const Index T = X.rows(), h = hidden_size(p);
  Var h_prev = tape.constant(Matrix::Zero(1, h));
  Var c_prev = tape.constant(Matrix::Zero(1, h));
  std::vector<Var> out(static_cast<std::size_t>(T));
  for (Index s = 0; s < T; ++s) {
    const Index t = reverse ? T - 1 - s : s;
    auto st = lstm_step(ops::slice_rows(X, t, 1), h_prev, c_prev, p);
    out[static_cast<std::size_t>(t)] = st.h;
    h_prev = st.h;
    c_prev = st.c;
  }
  return ops::stack_rows(out);
}

namespace {

struct LstmCache {
  Matrix gates;  // T x 4h, post-activation
  Matrix cells;  // T x h
  Matrix hidden;  // T x h
  std::vector<Index> order;  // processing order of positions
};

}  // namespace

Var lstm_sequence(Var X, const LstmVars& p, bool reverse) {
  check_shapes(X, p);
  Tape& tape = *X.tape();
  const Matrix& x = X.value();
  const Matrix& W = p.W.value();
  const Matrix& U = p.U.value();
  const Index T = x.rows(), h = hidden_size(p);

  auto cache = std::make_shared<LstmCache>();
  cache->gates.resize(T, 4 * h);
  cache->cells.resize(T, h);
  cache->hidden.resize(T, h);
  cache->order.resize(static_cast<std::size_t>(T));

  Matrix pre = x * W;
  pre.rowwise() += p.b.value().row(0);
  Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd c_prev = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd z(4 * h);
  for (Index s = 0; s < T; ++s) {
    const Index t = reverse ? T - 1 - s : s;
    cache->order[static_cast<std::size_t>(s)] = t;
    z.noalias() = pre.row(t) + h_prev * U;
    auto gates = cache->gates.row(t);
    for (Index k = 0; k < 3 * h; ++k) gates(k) = ops::sigmoid(z(k));
    for (Index k = 3 * h; k < 4 * h; ++k) gates(k) = std::tanh(z(k));
    auto f = gates.segment(0, h).array();
    auto in = gates.segment(h, h).array();
    auto o = gates.segment(2 * h, h).array();
    auto g = gates.segment(3 * h, h).array();
    cache->cells.row(t) = c_prev.array() * f + in * g;
    cache->hidden.row(t) = cache->cells.row(t).array().tanh() * o;
    h_prev = cache->hidden.row(t);
    c_prev = cache->cells.row(t);
  }

  const int ix = X.id(), iw = p.W.id(), iu = p.U.id(), ib = p.b.id();
  const int io = static_cast<int>(tape.size());
  return tape.record(cache->hidden, {X, p.W, p.U, p.b}, [=](Tape& tp) {
    const Matrix& dH = tp.grad(io);
    const Matrix& Wv = tp.value(iw);
    const Matrix& Uv = tp.value(iu);
    const LstmCache& cc = *cache;
    Matrix dZ(T, 4 * h);
    Matrix h_prevs = Matrix::Zero(T, h);
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
    for (Index s = T - 1; s >= 0; --s) {
      const Index t = cc.order[static_cast<std::size_t>(s)];
      const auto gates = cc.gates.row(t);
      const Eigen::ArrayXd f = gates.segment(0, h).transpose().array();
      const Eigen::ArrayXd in = gates.segment(h, h).transpose().array();
      const Eigen::ArrayXd o = gates.segment(2 * h, h).transpose().array();
      const Eigen::ArrayXd g = gates.segment(3 * h, h).transpose().array();
      const Eigen::ArrayXd tc = cc.cells.row(t).transpose().array().tanh();
      Eigen::ArrayXd c_prev_v = Eigen::ArrayXd::Zero(h);
      if (s > 0) {
        const Index tp_prev = cc.order[static_cast<std::size_t>(s - 1)];
        c_prev_v = cc.cells.row(tp_prev).transpose().array();
        h_prevs.row(t) = cc.hidden.row(tp_prev);
      }
      const Eigen::ArrayXd dh = dH.row(t).transpose().array() + dh_next.transpose().array();
      const Eigen::ArrayXd d_o = dh * tc;
      const Eigen::ArrayXd dc = dc_next.transpose().array() + dh * o * (1 - tc * tc);
      auto dz = dZ.row(t);
      dz.segment(0, h) = (dc * c_prev_v * f * (1 - f)).matrix().transpose();
      dz.segment(h, h) = (dc * g * in * (1 - in)).matrix().transpose();
      dz.segment(2 * h, h) = (d_o * o * (1 - o)).matrix().transpose();
      dz.segment(3 * h, h) = (dc * in * (1 - g * g)).matrix().transpose();
      dc_next = (dc * f).matrix().transpose();
      dh_next.noalias() = dz * Uv.transpose();
    }
    if (tp.requires_grad(ix)) tp.accumulate(ix, dZ * Wv.transpose());
    if (tp.requires_grad(iw)) tp.accumulate(iw, tp.value(ix).transpose() * dZ);
    if (tp.requires_grad(iu)) tp.accumulate(iu, h_prevs.transpose() * dZ);
    if (tp.requires_grad(ib)) tp.accumulate(ib, dZ.colwise().sum());
  });
}

Var encode(Var embedded, const BiLstmVars& p, double dropout_rate, bool train, Rng& rng) {
  if (embedded.rows() < 1) throw ContractError("encode: empty sentence");
  Var fwd = lstm_sequence(embedded, p.forward, false);
  Var bwd = lstm_sequence(embedded, p.backward, true);
  return ops::dropout(ops::concat_cols(fwd, bwd), dropout_rate, train, rng);
}

}  // namespace alseg
