#pragma once

#include "alseg/rng.h"
#include "alseg/tensor.h"

namespace alseg {

// Packed gate parameters. Column blocks of width `hidden`, in order
// [forget | input | output | candidate]:
//   W: d_in x 4h, U: h x 4h, b: 1 x 4h.
struct LstmVars {
  Var W;
  Var U;
  Var b;
};

struct BiLstmVars {
  LstmVars forward;
  LstmVars backward;
};

enum class LstmGate { kForget = 0, kInput = 1, kOutput = 2, kCandidate = 3 };

struct LstmState {
  Var h;
  Var c;
};

// One cell update built from tape primitives:
//   f,i,o = sigmoid(x W_* + h_prev U_* + b_*)
//   c = c_prev * f + i * tanh(x W_c + h_prev U_c + b_c)
//   h = tanh(c) * o
LstmState lstm_step(Var x, Var h_prev, Var c_prev, const LstmVars& p);

// Runs lstm_step over the rows of X (bottom-up when `reverse`), zero initial
// state. Output row t is the hidden state at position t.
Var lstm_sequence_reference(Var X, const LstmVars& p, bool reverse);

// Same result as the reference, as one fused tape node with hand-written
// backpropagation through time.
Var lstm_sequence(Var X, const LstmVars& p, bool reverse);

// H row t = [forward h_t ; backward h_t], then (inverted) dropout when training.
Var encode(Var embedded, const BiLstmVars& p, double dropout_rate, bool train, Rng& rng);

}  // namespace alseg
