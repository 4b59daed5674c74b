#include "alseg/segmenter.h"

#include "alseg/errors.h"
#include "alseg/ops.h"

namespace alseg {

Var emission_scores(Var H, const CrfVars& crf) {
  return ops::add(ops::matmul(H, crf.emission_W), crf.emission_b);
}

Var crf_nll(Var H, const TagSeq& gold, const CrfVars& crf) {
  if (static_cast<Index>(gold.size()) != H.rows()) {
    throw ContractError("crf_nll: H has " + std::to_string(H.rows()) + " rows, gold has " +
                        std::to_string(gold.size()) + " tags");
  }
  return crf::nll(emission_scores(H, crf), crf.transitions, gold);
}

Matrix emission_scores(const Matrix& H, const CrfWeights& crf) {
  if (H.cols() != crf.emission_W.rows()) throw ContractError("emission_scores: width mismatch");
  Matrix e = H * crf.emission_W;
  e.rowwise() += crf.emission_b.row(0);
  return e;
}

crf::ViterbiPath viterbi_decode(const Matrix& H, const CrfWeights& crf) {
  return crf::viterbi(emission_scores(H, crf), crf.transitions);
}

Matrix token_marginals(const Matrix& H, const CrfWeights& crf) {
  return crf::marginals(crf::forward_backward(emission_scores(H, crf), crf.transitions));
}

SegOutput analyze_emissions(const Matrix& emissions, const Matrix& transitions,
                            const TagSeq* gold) {
  SegOutput out;
  const crf::Lattice lat = crf::forward_backward(emissions, transitions);
  out.marginals = crf::marginals(lat);
  out.log_z = lat.log_z_forward;
  const crf::ViterbiPath path = crf::viterbi(emissions, transitions);
  out.viterbi_tags = path.tags;
  out.viterbi_logprob = path.log_prob;
  if (gold) out.nll = crf::nll(emissions, transitions, *gold).nll;
  return out;
}

}  // namespace alseg
