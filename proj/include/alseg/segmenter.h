#pragma once

#include <optional>

#include "alseg/corpus.h"
#include "alseg/crf.h"
#include "alseg/lstm.h"
#include "alseg/tensor.h"

namespace alseg {

// Emission map (2h x 4 plus bias) and the 6x6 transition matrix.
struct CrfVars {
  Var emission_W;
  Var emission_b;
  Var transitions;
};

Var emission_scores(Var H, const CrfVars& crf);

// Sentence negative log-likelihood under the CRF on top of encoder output H.
Var crf_nll(Var H, const TagSeq& gold, const CrfVars& crf);

struct CrfWeights {
  const Matrix& emission_W;
  const Matrix& emission_b;
  const Matrix& transitions;
};

Matrix emission_scores(const Matrix& H, const CrfWeights& crf);
crf::ViterbiPath viterbi_decode(const Matrix& H, const CrfWeights& crf);
Matrix token_marginals(const Matrix& H, const CrfWeights& crf);

struct SegOutput {
  Matrix marginals;  // Len x 4, rows sum to 1
  TagSeq viterbi_tags;
  double viterbi_logprob = 0.0;  // <= 0
  double log_z = 0.0;
  std::optional<double> nll;  // set when gold tags were supplied
};

// Decoding, marginals and (optionally) NLL from one forward-backward pass.
SegOutput analyze_emissions(const Matrix& emissions, const Matrix& transitions,
                            const TagSeq* gold = nullptr);

}  // namespace alseg
