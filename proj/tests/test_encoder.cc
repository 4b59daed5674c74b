#include <doctest.h>

#include <cmath>

#include "alseg/gradcheck.h"
#include "alseg/lstm.h"
#include "alseg/ops.h"
#include "alseg/segmenter.h"
#include "support/oracles.h"

using namespace alseg;
using alseg::testing::random_matrix;

namespace {

struct LstmTensors {
  Tensor W, U, b;
  LstmTensors(Index d_in, Index h, Rng& rng, double scale = 0.5)
      : W(random_matrix(d_in, 4 * h, rng, scale)),
        U(random_matrix(h, 4 * h, rng, scale)),
        b(random_matrix(1, 4 * h, rng, scale)) {}
  LstmVars watch(Tape& t) { return {t.watch(W), t.watch(U), t.watch(b)}; }
};

}  // namespace

TEST_CASE("lstm_step with zero parameters") {
  Tape t;
  LstmVars p{t.constant(Matrix::Zero(3, 8)), t.constant(Matrix::Zero(2, 8)),
             t.constant(Matrix::Zero(1, 8))};
  Var x = t.constant(Matrix::Ones(1, 3));
  auto s0 = lstm_step(x, t.constant(Matrix::Zero(1, 2)), t.constant(Matrix::Zero(1, 2)), p);
  CHECK(s0.c.value().isZero(0));
  CHECK(s0.h.value().isZero(0));
  const double c = 1.3;
  auto s1 = lstm_step(x, t.constant(Matrix::Zero(1, 2)), t.constant(Matrix::Constant(1, 2, c)), p);
  CHECK(s1.c.value()(0, 0) == doctest::Approx(0.5 * c).epsilon(1e-15));
  CHECK(s1.h.value()(0, 1) == doctest::Approx(0.5 * std::tanh(0.5 * c)).epsilon(1e-15));
}

TEST_CASE("lstm_step gradients match finite differences") {
  Rng rng(5);
  LstmTensors p(3, 2, rng);
  Tensor x(random_matrix(1, 3, rng)), h(random_matrix(1, 2, rng)), c(random_matrix(1, 2, rng));
  Tensor* params[] = {&p.W, &p.U, &p.b, &x, &h, &c};
  auto res = grad_check([&](Tape& t) {
    auto s = lstm_step(t.watch(x), t.watch(h), t.watch(c), p.watch(t));
    return ops::add(ops::sum(s.h), ops::scale(ops::sum(s.c), 0.3));
  }, params);
  CHECK(res.passed);
}

TEST_CASE("fused sequence kernel equals the step-by-step reference") {
  Rng rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const int len = testing::random_length(rng, 1, 9);
    LstmTensors p(4, 3, rng);
    Tensor X(random_matrix(len, 4, rng));
    const bool reverse = trial % 2 == 1;
    Rng wrng(trial);
    const Matrix w = random_matrix(len, 3, wrng);

    auto run = [&](bool fused) {
      p.W.zero_grad();
      p.U.zero_grad();
      p.b.zero_grad();
      X.zero_grad();
      Tape t;
      Var x = t.watch(X);
      Var H = fused ? lstm_sequence(x, p.watch(t), reverse)
                    : lstm_sequence_reference(x, p.watch(t), reverse);
      Matrix value = H.value();
      t.backward(ops::sum(ops::mul(H, t.constant(w))));
      return std::vector<Matrix>{value, p.W.grad(), p.U.grad(), p.b.grad(), X.grad()};
    };
    auto ref = run(false);
    auto fused = run(true);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      INFO("trial " << trial << " item " << k);
      CHECK((ref[k] - fused[k]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("fused kernel gradients match finite differences") {
  Rng rng(8);
  LstmTensors p(3, 2, rng, 0.8);
  Tensor X(random_matrix(5, 3, rng));
  Tensor* params[] = {&p.W, &p.U, &p.b, &X};
  for (bool reverse : {false, true}) {
    auto res = grad_check([&](Tape& t) {
      Rng wrng(4);
      Var H = lstm_sequence(t.watch(X), p.watch(t), reverse);
      return ops::sum(ops::mul(H, t.constant(random_matrix(5, 2, wrng))));
    }, params);
    CHECK(res.passed);
  }
}

TEST_CASE("encode shapes and the reversal symmetry") {
  Rng rng(12);
  LstmTensors p(3, 2, rng);
  Tape t;
  LstmVars shared = p.watch(t);
  BiLstmVars bi{shared, shared};
  const Matrix x = random_matrix(4, 3, rng);
  Var H = encode(t.constant(x), bi, 0.0, false, rng);
  REQUIRE(H.rows() == 4);
  REQUIRE(H.cols() == 4);
  Var Hr = encode(t.constant(x.colwise().reverse()), bi, 0.0, false, rng);
  for (Index r = 0; r < 4; ++r) {
    const auto a = H.value().row(r);
    const auto b = Hr.value().row(3 - r);
    CHECK((a.leftCols(2) - b.rightCols(2)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a.rightCols(2) - b.leftCols(2)).cwiseAbs().maxCoeff() < 1e-14);
  }
  Var one = encode(t.constant(random_matrix(1, 3, rng)), bi, 0.2, false, rng);
  CHECK(one.rows() == 1);

  LstmVars zero{t.constant(Matrix::Zero(3, 8)), t.constant(Matrix::Zero(2, 8)),
                t.constant(Matrix::Zero(1, 8))};
  CHECK(encode(t.constant(x), {zero, zero}, 0.0, false, rng).value().isZero(0));
}

TEST_CASE("dropout on the encoder output applies only in training") {
  Rng rng(3);
  LstmTensors p(3, 4, rng);
  Tape t;
  BiLstmVars bi{p.watch(t), p.watch(t)};
  const Matrix x = random_matrix(6, 3, rng);
  Var eval1 = encode(t.constant(x), bi, 0.5, false, rng);
  Var eval2 = encode(t.constant(x), bi, 0.5, false, rng);
  CHECK(eval1.value() == eval2.value());
  Var train = encode(t.constant(x), bi, 0.5, true, rng);
  int zeros = 0;
  for (Index k = 0; k < train.value().size(); ++k) zeros += train.value().data()[k] == 0.0 ? 1 : 0;
  CHECK(zeros > 0);
}

TEST_CASE("segmenter nll gradients reach every segmenter parameter") {
  Rng rng(41);
  Tensor H(random_matrix(4, 6, rng));
  Tensor W(random_matrix(6, 4, rng)), b(random_matrix(1, 4, rng));
  Tensor A(random_matrix(crf::kStates, crf::kStates, rng));
  const TagSeq gold = tags_from_string("BESS");
  Tensor* params[] = {&H, &W, &b, &A};
  auto res = grad_check([&](Tape& t) {
    return crf_nll(t.watch(H), gold, {t.watch(W), t.watch(b), t.watch(A)});
  }, params);
  CHECK(res.passed);

  CrfWeights w{W.value(), b.value(), A.value()};
  const Matrix e = emission_scores(H.value(), w);
  CHECK(e.isApprox((H.value() * W.value()).rowwise() + b.value().row(0)));
  CHECK(viterbi_decode(H.value(), w).tags == crf::viterbi(e, A.value()).tags);
  CHECK(token_marginals(H.value(), w).rows() == 4);
}
