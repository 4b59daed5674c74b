#include "alseg/loss_head.h"

#include <cmath>
#include <limits>

#include "alseg/errors.h"
#include "alseg/ops.h"

namespace alseg {

Var attention(Var Q, Var K, Var V, const std::vector<bool>* key_mask) {
  if (Q.cols() != K.cols() || K.rows() != V.rows()) {
    throw ContractError("attention: Q/K widths or K/V lengths disagree");
  }
  if (K.rows() < 1) throw ContractError("attention: no keys");
  Tape& tape = *Q.tape();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(K.cols()));
  Var scores = ops::scale(ops::matmul(Q, ops::transpose(K)), inv_scale);
  if (key_mask) {
    if (static_cast<Index>(key_mask->size()) != K.rows()) {
      throw ContractError("attention: mask length differs from key count");
    }
    Matrix bias = Matrix::Zero(Q.rows(), K.rows());
    bool any = false;
    for (Index i = 0; i < K.rows(); ++i) {
      if (!(*key_mask)[static_cast<std::size_t>(i)]) {
        bias.col(i).setConstant(-std::numeric_limits<double>::infinity());
      } else {
        any = true;
      }
    }
    if (!any) throw ContractError("attention: every key is masked");
    scores = ops::add(scores, tape.constant(std::move(bias)));
  }
  return ops::matmul(ops::softmax_rows(scores), V);
}

Var self_attention(Var H, const AttentionVars& p, const std::vector<bool>* mask) {
  return attention(ops::matmul(H, p.query), ops::matmul(H, p.key), ops::matmul(H, p.value),
                   mask);
}

Var predict_loss(Var H, const AttentionVars& p, const std::vector<bool>* mask) {
  Var att = self_attention(H, p, mask);
  Var pooled;
  if (mask) {
    Index kept = 0;
    for (bool m : *mask) kept += m ? 1 : 0;
    Matrix w = Matrix::Zero(1, H.rows());
    for (Index i = 0; i < H.rows(); ++i) {
      if ((*mask)[static_cast<std::size_t>(i)]) w(0, i) = 1.0 / static_cast<double>(kept);
    }
    pooled = ops::matmul(H.tape()->constant(std::move(w)), att);
  } else {
    pooled = ops::mean_rows(att);
  }
  return ops::softplus(ops::add(ops::matmul(pooled, p.out_w), p.out_b));
}

double loss_head_loss(std::span<const double> predicted, std::span<const double> targets) {
  if (predicted.size() != targets.size()) throw ContractError("loss_head_loss: length mismatch");
  if (predicted.empty()) throw ContractError("loss_head_loss: empty batch");
  double s = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(predicted.size());
}

Var loss_head_loss(std::span<const Var> predicted, std::span<const double> targets) {
  if (predicted.size() != targets.size()) throw ContractError("loss_head_loss: length mismatch");
  if (predicted.empty()) throw ContractError("loss_head_loss: empty batch");
  Tape& tape = *predicted[0].tape();
  Matrix t(static_cast<Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) t(static_cast<Index>(i), 0) = targets[i];
  Var pred = ops::stack_rows(predicted);
  return ops::scale(ops::squared_error(pred, tape.constant(std::move(t))),
                    1.0 / static_cast<double>(targets.size()));
}

double joint_loss(std::span<const double> seg_nll, double head_loss, double lambda) {
  if (seg_nll.empty()) throw ContractError("joint_loss: empty batch");
  if (lambda < 0) throw ContractError("joint_loss: lambda must be non-negative");
  double s = 0;
  for (double v : seg_nll) s += v;
  return s / static_cast<double>(seg_nll.size()) + lambda * head_loss;
}

}  // namespace alseg
