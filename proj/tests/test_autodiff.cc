#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "alseg/checkpoint.h"
#include "alseg/errors.h"
#include "alseg/gradcheck.h"
#include "alseg/ops.h"
#include "alseg/optim.h"
#include "alseg/params.h"
#include "support/oracles.h"

using namespace alseg;
using alseg::testing::random_matrix;

namespace {

Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  Index k = 0;
  for (double x : v) m.data()[k++] = x;
  return m;
}

// Grad-checks a scalar built from `build` over freshly drawn inputs.
void check_op(const char* name, std::vector<Tensor> inputs,
              const std::function<Var(Tape&, std::vector<Var>&)>& build) {
  std::vector<Tensor*> ptrs;
  for (auto& t : inputs) ptrs.push_back(&t);
  auto res = grad_check(
      [&](Tape& tape) {
        std::vector<Var> vs;
        for (auto& t : inputs) vs.push_back(tape.watch(t));
        return build(tape, vs);
      },
      ptrs);
  INFO(name << " worst " << res.worst << " err " << res.max_relative_error);
  CHECK(res.passed);
  CHECK(res.checked > 0);
}

}  // namespace

TEST_CASE("primitive values") {
  Tape t;
  CHECK(ops::sigmoid(t.constant(0.0)).scalar() == 0.5);
  CHECK(ops::softplus(t.constant(0.0)).scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Var s = ops::softmax_rows(t.constant(mat(1, 3, {1, 1, 1})));
  for (Index k = 0; k < 3; ++k) CHECK(s.value()(0, k) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(ops::softplus(800.0) == 800.0);
  CHECK(ops::softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(ops::sigmoid(-800.0)));
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(5);
  Tape t;
  Var s = ops::softmax_rows(t.constant(random_matrix(20, 7, rng, 30.0)));
  for (Index r = 0; r < 20; ++r) {
    CHECK(s.value().row(r).minCoeff() >= 0.0);
    CHECK(std::abs(s.value().row(r).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("backward on small graphs") {
  SUBCASE("power rule") {
    Tensor x(mat(1, 1, {3.0}));
    Tape t;
    Var v = t.watch(x);
    t.backward(ops::mul(v, v));
    CHECK(x.grad()(0, 0) == 6.0);
  }
  SUBCASE("sigmoid at zero") {
    Tensor x(Matrix::Zero(1, 4));
    Tape t;
    t.backward(ops::sum(ops::sigmoid(t.watch(x))));
    for (Index k = 0; k < 4; ++k) CHECK(x.grad()(0, k) == 0.25);
  }
  SUBCASE("non-scalar output is rejected") {
    Tape t;
    Tensor x(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(t.watch(x)), ContractError);
  }
  SUBCASE("reused node accumulates") {
    Tensor x(mat(1, 1, {2.0}));
    Tape t;
    Var v = t.watch(x);
    Var y = ops::add(ops::scale(v, 3.0), ops::mul(v, v));
    t.backward(y);
    CHECK(x.grad()(0, 0) == 7.0);
  }
}

TEST_CASE("shape mismatches throw") {
  Tape t;
  Var a = t.constant(Matrix::Ones(2, 3));
  Var b = t.constant(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(ops::matmul(a, a), ContractError);
  CHECK_THROWS_AS(ops::add(a, b), ContractError);
  CHECK_THROWS_AS(ops::mul(a, b), ContractError);
  CHECK_THROWS_AS(ops::concat_cols(a, t.constant(Matrix::Ones(3, 1))), ContractError);
  CHECK_THROWS_AS(ops::squared_error(a, b), ContractError);
  CHECK_THROWS_AS(ops::log(t.constant(Matrix::Zero(1, 1))), ContractError);
  Tape other;
  CHECK_THROWS_AS(ops::add(a, other.constant(Matrix::Ones(2, 3))), ContractError);
}

TEST_CASE("every primitive matches central differences") {
  Rng rng(11);
  auto r = [&](Index rows, Index cols, double s = 1.0) { return Tensor(random_matrix(rows, cols, rng, s)); };
  // A fixed random projection turns matrix outputs into a scalar with
  // distinct weights per entry.
  auto project = [&](Tape& t, Var y) {
    Rng prng(99);
    return ops::sum(ops::mul(y, t.constant(random_matrix(y.rows(), y.cols(), prng))));
  };
  check_op("matmul", {r(3, 4), r(4, 2)}, [&](Tape& t, auto& v) { return project(t, ops::matmul(v[0], v[1])); });
  check_op("add", {r(3, 4), r(3, 4)}, [&](Tape& t, auto& v) { return project(t, ops::add(v[0], v[1])); });
  check_op("add row broadcast", {r(3, 4), r(1, 4)},
           [&](Tape& t, auto& v) { return project(t, ops::add(v[0], v[1])); });
  check_op("sub", {r(2, 3), r(2, 3)}, [&](Tape& t, auto& v) { return project(t, ops::sub(v[0], v[1])); });
  check_op("mul", {r(2, 3), r(2, 3)}, [&](Tape& t, auto& v) { return project(t, ops::mul(v[0], v[1])); });
  check_op("scale", {r(2, 3)}, [&](Tape& t, auto& v) { return project(t, ops::scale(v[0], -1.7)); });
  check_op("transpose", {r(2, 3)}, [&](Tape& t, auto& v) { return project(t, ops::transpose(v[0])); });
  check_op("sigmoid", {r(3, 3, 3.0)}, [&](Tape& t, auto& v) { return project(t, ops::sigmoid(v[0])); });
  check_op("tanh", {r(3, 3, 2.0)}, [&](Tape& t, auto& v) { return project(t, ops::tanh(v[0])); });
  check_op("softplus", {r(3, 3, 3.0)}, [&](Tape& t, auto& v) { return project(t, ops::softplus(v[0])); });
  check_op("exp", {r(2, 3)}, [&](Tape& t, auto& v) { return project(t, ops::exp(v[0])); });
  check_op("log", {Tensor(random_matrix(2, 3, rng).array().abs() + 0.5)},
           [&](Tape& t, auto& v) { return project(t, ops::log(v[0])); });
  check_op("softmax", {r(3, 5, 2.0)}, [&](Tape& t, auto& v) { return project(t, ops::softmax_rows(v[0])); });
  check_op("concat", {r(3, 2), r(3, 4)}, [&](Tape& t, auto& v) { return project(t, ops::concat_cols(v[0], v[1])); });
  check_op("stack", {r(1, 3), r(1, 3), r(1, 3)}, [&](Tape& t, auto& v) {
    return project(t, ops::stack_rows(std::span<const Var>(v.data(), v.size())));
  });
  check_op("slice cols", {r(3, 6)}, [&](Tape& t, auto& v) { return project(t, ops::slice_cols(v[0], 2, 3)); });
  check_op("slice rows", {r(5, 2)}, [&](Tape& t, auto& v) { return project(t, ops::slice_rows(v[0], 1, 3)); });
  check_op("sum", {r(3, 3)}, [&](Tape&, auto& v) { return ops::sum(ops::mul(v[0], v[0])); });
  check_op("mean", {r(3, 3)}, [&](Tape&, auto& v) { return ops::mean(ops::mul(v[0], v[0])); });
  check_op("mean rows", {r(4, 3)}, [&](Tape& t, auto& v) { return project(t, ops::mean_rows(v[0])); });
  check_op("squared error", {r(3, 2), r(3, 2)}, [&](Tape&, auto& v) { return ops::squared_error(v[0], v[1]); });
  check_op("dropout", {r(4, 4)}, [&](Tape& t, auto& v) {
    Rng drng(3);  // same mask on every evaluation
    return project(t, ops::dropout(v[0], 0.4, true, drng));
  });
}

TEST_CASE("stop_gradient blocks the backward pass") {
  Tensor x(mat(1, 1, {2.0}));
  Tape t;
  Var v = t.watch(x);
  t.backward(ops::mul(v, ops::stop_gradient(v)));
  CHECK(x.grad()(0, 0) == 2.0);
}

TEST_CASE("dropout identities") {
  Rng rng(1);
  Tape t;
  Var a = t.constant(random_matrix(4, 5, rng));
  CHECK(ops::dropout(a, 0.5, false, rng).value() == a.value());
  CHECK(ops::dropout(a, 0.0, true, rng).value() == a.value());
  Var d = ops::dropout(a, 0.5, true, rng);
  for (Index k = 0; k < d.value().size(); ++k) {
    const double y = d.value().data()[k];
    CHECK((y == 0.0 || y == doctest::Approx(2.0 * a.value().data()[k])));
  }
  CHECK_THROWS_AS(ops::dropout(a, 1.0, true, rng), ContractError);
}

TEST_CASE("grad_check examples") {
  Tensor x(mat(1, 1, {2.0}));
  Tensor* p[] = {&x};
  auto cube = grad_check([&](Tape& t) {
    Var v = t.watch(x);
    return ops::mul(ops::mul(v, v), v);
  }, p);
  CHECK(cube.max_relative_error < 1e-6);
  auto linear = grad_check([&](Tape& t) { return ops::scale(t.watch(x), 3.5); }, p);
  CHECK(linear.max_relative_error < 1e-9);
  CHECK(relative_error(1.0, 1.0, 1e-2) == 0.0);
  CHECK(relative_error(1e-9, 0.0, 1e-2) == doctest::Approx(1e-7));
}

TEST_CASE("adam") {
  ParameterSet ps;
  ps.add("w", mat(1, 3, {1.0, -2.0, 0.5}));
  ps.add("emb", mat(2, 2, {0.0, 0.0, 1.0, 1.0}), true);
  AdamState state;
  AdamOptions opts;

  SUBCASE("zero gradient leaves parameters unchanged") {
    Gradients g = ps.make_gradients();
    const Matrix before = ps[0].tensor.value();
    adam_step(ps, g, opts, state);
    CHECK(ps[0].tensor.value() == before);
  }
  SUBCASE("first step moves each weight by about lr against the gradient") {
    Gradients g = ps.make_gradients();
    g.grads[0] = mat(1, 3, {0.3, -0.02, 1.0});
    const Matrix before = ps[0].tensor.value();
    adam_step(ps, g, opts, state);
    for (Index k = 0; k < 3; ++k) {
      const double step = ps[0].tensor.value()(0, k) - before(0, k);
      const double gk = mat(1, 3, {0.3, -0.02, 1.0})(0, k);
      CHECK(step == doctest::Approx(-opts.lr * gk / (std::abs(gk) + opts.eps)).epsilon(1e-9));
    }
  }
  SUBCASE("steps descend a convex quadratic") {
    auto f = [&] { return ps[0].tensor.value().squaredNorm(); };
    const double start = f();
    for (int i = 0; i < 2; ++i) {
      Gradients g = ps.make_gradients();
      g.grads[0] = 2.0 * ps[0].tensor.value();
      adam_step(ps, g, opts, state);
    }
    CHECK(f() < start);
  }
  SUBCASE("padding row stays zero") {
    Gradients g = ps.make_gradients();
    g.grads[1] = Matrix::Ones(2, 2);
    adam_step(ps, g, opts, state);
    CHECK(ps[1].tensor.value().row(0).isZero(0));
    CHECK(ps[1].tensor.value()(1, 0) < 1.0);
  }
  SUBCASE("global norm clipping") {
    Gradients g = ps.make_gradients();
    g.grads[0] = mat(1, 3, {300.0, 400.0, 0.0});
    adam_step(ps, g, opts, state);
    CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(5.0));
  }
  SUBCASE("non-finite gradient aborts with the parameter name") {
    Gradients g = ps.make_gradients();
    g.grads[0](0, 1) = NAN;
    try {
      adam_step(ps, g, opts, state);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
  }
}

TEST_CASE("parameter registry") {
  ParameterSet ps;
  Rng rng(2);
  ps.add("a", init::xavier(4, 6, rng));
  ps.add("emb", init::embedding(5, 3, rng), true);
  CHECK(ps.index_of("emb") == 1);
  CHECK(ps.index_of("zzz") == -1);
  CHECK_THROWS_AS(ps.add("a", Matrix::Zero(1, 1)), ContractError);
  CHECK(ps.at("emb").tensor.value().row(0).isZero(0));
  CHECK(ps.at("emb").tensor.value().cwiseAbs().maxCoeff() <= 0.1);
  CHECK(ps.at("a").tensor.value().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 10.0));
  CHECK(ps.scalar_count() == 24 + 15);
}

TEST_CASE("checkpoints round trip exactly and check names and shapes") {
  Rng rng(4);
  ParameterSet a;
  a.add("x", random_matrix(3, 2, rng));
  a.add("y", random_matrix(1, 5, rng));
  const std::string text = serialize_parameters(a);
  CHECK(text.rfind(kCheckpointMagic, 0) == 0);

  ParameterSet b;
  b.add("x", Matrix::Zero(3, 2));
  b.add("y", Matrix::Zero(1, 5));
  deserialize_parameters(text, b);
  CHECK(b[0].tensor.value() == a[0].tensor.value());
  CHECK(b[1].tensor.value() == a[1].tensor.value());
  CHECK(serialize_parameters(b) == text);

  ParameterSet wrong_shape;
  wrong_shape.add("x", Matrix::Zero(2, 3));
  wrong_shape.add("y", Matrix::Zero(1, 5));
  CHECK_THROWS_AS(deserialize_parameters(text, wrong_shape), FormatError);
  ParameterSet wrong_name;
  wrong_name.add("x", Matrix::Zero(3, 2));
  wrong_name.add("z", Matrix::Zero(1, 5));
  CHECK_THROWS_AS(deserialize_parameters(text, wrong_name), FormatError);
  CHECK_THROWS_AS(deserialize_parameters("garbage", b), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "alseg_ckpt_test" / "m.ckpt";
  save_checkpoint(path, a);
  ParameterSet c;
  c.add("x", Matrix::Zero(3, 2));
  c.add("y", Matrix::Zero(1, 5));
  load_checkpoint(path, c);
  CHECK(c[1].tensor.value() == a[1].tensor.value());
  std::filesystem::remove_all(path.parent_path());
}
