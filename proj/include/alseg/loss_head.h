#pragma once

#include <span>
#include <vector>

#include "alseg/tensor.h"

namespace alseg {

// Single-head self-attention readout that regresses the segmenter's loss.
//   query, key, value: d_in x d_k;  out_w: d_k x 1;  out_b: 1 x 1
struct AttentionVars {
  Var query;
  Var key;
  Var value;
  Var out_w;
  Var out_b;
};

// Scaled dot-product attention: a = softmax_i(Q_t . K_i / sqrt(d_k)),
// out_t = sum_i a_ti V_i. `key_mask` (optional, one entry per row, false =
// padding) removes padded keys.
Var attention(Var Q, Var K, Var V, const std::vector<bool>* key_mask = nullptr);

Var self_attention(Var H, const AttentionVars& p, const std::vector<bool>* mask = nullptr);

// softplus(mean over unmasked positions of self_attention(H) . out_w + out_b).
// Always >= 0.
Var predict_loss(Var H, const AttentionVars& p, const std::vector<bool>* mask = nullptr);

// (1/n) sum (predicted - target)^2. Targets are constants.
double loss_head_loss(std::span<const double> predicted, std::span<const double> targets);
Var loss_head_loss(std::span<const Var> predicted, std::span<const double> targets);

// mean(seg_nll) + lambda * head_loss.
double joint_loss(std::span<const double> seg_nll, double head_loss, double lambda);

}  // namespace alseg
