#pragma once

#include "alseg/corpus.h"
#include "alseg/tensor.h"

// Linear-chain CRF over the four BMES tags with explicit START/STOP states.
// All dynamic programming runs in log space.
namespace alseg::crf {

inline constexpr int kStart = 4;
inline constexpr int kStop = 5;
inline constexpr int kStates = 6;

// Transition legality over {B, M, E, S, START, STOP}, indexed [from][to].
bool allowed(int from, int to);

// Copies `transitions` (6x6) with every illegal entry set to -inf.
Matrix masked(const Matrix& transitions);

double log_sum_exp(const double* values, int n, int stride = 1);

// Sum of emission and (masked) transition scores along `tags`; -inf when the
// path breaks the grammar.
double path_score(const Matrix& emissions, const Matrix& transitions, const TagSeq& tags);

struct Lattice {
  Matrix alpha;  // T x 4, log forward messages (includes emission at t)
  Matrix beta;   // T x 4, log backward messages (excludes emission at t)
  double log_z_forward = 0.0;
  double log_z_backward = 0.0;
};

// The functions below apply the grammar mask to `transitions` themselves.
Lattice forward_backward(const Matrix& emissions, const Matrix& transitions);

// P(y_t = k | x), T x 4.
Matrix marginals(const Lattice& lattice);

struct ViterbiPath {
  TagSeq tags;
  double score = 0.0;
  double log_prob = 0.0;  // score - log Z
};

// Exact argmax; ties resolve to the lowest tag index at every backtrack step.
ViterbiPath viterbi(const Matrix& emissions, const Matrix& transitions);

struct NllResult {
  double nll = 0.0;
  Matrix d_emissions;    // T x 4
  Matrix d_transitions;  // 6 x 6, zero on illegal entries
};

// -[score(gold) - log Z] and its gradients. Throws ContractError when the gold
// path is ungrammatical.
NllResult nll(const Matrix& emissions, const Matrix& transitions, const TagSeq& gold);

// Tape node for nll(); gradients flow to both inputs.
Var nll(Var emissions, Var transitions, const TagSeq& gold);

}  // namespace alseg::crf
