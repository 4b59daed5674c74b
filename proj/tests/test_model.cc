#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <set>

#include "alseg/checkpoint.h"
#include "alseg/crf.h"
#include "alseg/errors.h"
#include "alseg/gradcheck.h"
#include "alseg/ops.h"
#include "alseg/trainer.h"
#include "support/toy.h"

using namespace alseg;
using namespace alseg::testing;

namespace {

std::vector<const Example*> pointers(const std::vector<Example>& xs, std::size_t n) {
  std::vector<const Example*> out;
  for (std::size_t i = 0; i < std::min(n, xs.size()); ++i) out.push_back(&xs[i]);
  return out;
}

}  // namespace

TEST_CASE("parameter groups are named for checkpoints") {
  auto d = toy_data(20, 1);
  JointModel m = make_model(d, tiny_config(), 3);
  std::vector<std::string> names;
  for (const auto& p : m.params()) names.push_back(p.name);
  const std::vector<std::string> expected = {
      "embeddings.char", "embeddings.ngram", "bilstm.fwd.W",   "bilstm.fwd.U",
      "bilstm.fwd.b",    "bilstm.bwd.W",     "bilstm.bwd.U",   "bilstm.bwd.b",
      "crf.emission.W",  "crf.emission.b",   "crf.transitions", "loss_head.q",
      "loss_head.k",     "loss_head.v",      "loss_head.out.w", "loss_head.out.b"};
  CHECK(names == expected);
  // Forget-gate block of the bias starts at one.
  const Matrix& b = m.params().at("bilstm.fwd.b").tensor.value();
  CHECK(b.leftCols(3).isOnes(0));
  CHECK(b.rightCols(9).isZero(0));
  CHECK(m.params().at("embeddings.char").tensor.value().row(0).isZero(0));

  JointModel chars_only(tiny_config(), d.features.chars().size(), 0, false, 3);
  CHECK(chars_only.params().index_of("embeddings.ngram") == -1);
  CHECK(chars_only.input_dim() == 4);
  CHECK_THROWS_AS(JointModel(ModelConfig{.hidden = 0}, 10, 10, true, 1), ConfigError);
}

TEST_CASE("analysis output satisfies its invariants") {
  auto d = toy_data(10, 2);
  JointModel m = make_model(d, tiny_config(), 4);
  for (const auto& ex : d.examples) {
    auto a = m.analyze(ex.features, &ex.tags);
    CHECK(a.predicted_loss >= 0.0);
    CHECK(*a.seg.nll >= 0.0);
    CHECK(a.seg.viterbi_logprob <= 0.0);
    CHECK(is_valid_tag_seq(a.seg.viterbi_tags));
    for (Index t = 0; t < a.seg.marginals.rows(); ++t) {
      CHECK(std::abs(a.seg.marginals.row(t).sum() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("joint gradient over every parameter group matches finite differences") {
  auto d = toy_data(6, 5, 2, 12, 20);
  Rng seeds(77);
  for (int trial = 0; trial < 3; ++trial) {
    JointModel m = make_model(d, tiny_config(0.0), seeds());
    auto batch = pointers(d.examples, 3);
    TrainOptions opts;
    opts.lambda = 1.0;
    Gradients g = m.params().make_gradients();
    accumulate_batch_gradient_serial(m, batch, opts, 1, g);

    std::vector<double> targets;
    for (const auto* ex : batch) targets.push_back(*m.analyze(ex->features, &ex->tags).seg.nll);
    std::vector<Tensor*> tensors;
    for (auto& p : m.params()) tensors.push_back(&p.tensor);
    GradCheckOptions gc;
    gc.max_entries_per_tensor = 30;
    gc.seed = static_cast<std::uint64_t>(trial);
    auto res = grad_check([&] { return frozen_objective(m, batch, targets, 1.0); }, tensors,
                          g.grads, gc);
    INFO("worst " << res.worst << " err " << res.max_relative_error);
    CHECK(res.passed);
    // Every group receives some gradient.
    for (std::size_t i = 0; i < g.grads.size(); ++i) {
      INFO(m.params()[i].name);
      CHECK(g.grads[i].cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("serial and OpenMP batch gradients agree") {
  auto d = toy_data(40, 6);
  JointModel m = make_model(d, small_config(0.2), 8);
  auto batch = pointers(d.examples, 32);
  TrainOptions opts;
  Gradients serial = m.params().make_gradients();
  Gradients parallel = m.params().make_gradients();
  auto ts = accumulate_batch_gradient_serial(m, batch, opts, 42, serial);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  auto tp = accumulate_batch_gradient_parallel(m, batch, opts, 42, parallel);
  omp_set_num_threads(saved);
  CHECK(ts.seg_nll == doctest::Approx(tp.seg_nll).epsilon(1e-12));
  CHECK(ts.head_loss == doctest::Approx(tp.head_loss).epsilon(1e-12));
  for (std::size_t i = 0; i < serial.grads.size(); ++i) {
    const double scale = std::max(1.0, serial.grads[i].cwiseAbs().maxCoeff());
    CHECK((serial.grads[i] - parallel.grads[i]).cwiseAbs().maxCoeff() < 1e-12 * scale);
  }
}

TEST_CASE("lambda = 0 reproduces segmenter-only training bit for bit") {
  auto d = toy_data(40, 7);
  TrainOptions base;
  base.epochs = 2;
  base.batch_size = 8;
  base.execution = Execution::kSerial;
  base.seed = 5;

  JointModel seg_only = make_model(d, small_config(), 11);
  TrainOptions a = base;
  a.train_head = false;
  train_joint(seg_only, d.examples, a);

  JointModel joint = make_model(d, small_config(), 11);
  TrainOptions b = base;
  b.lambda = 0.0;
  train_joint(joint, d.examples, b);

  for (std::size_t i = 0; i < joint.params().size(); ++i) {
    const auto& name = joint.params()[i].name;
    if (name.rfind("loss_head.", 0) == 0) continue;
    INFO(name);
    CHECK(joint.params()[i].tensor.value() == seg_only.params()[i].tensor.value());
  }
}

TEST_CASE("head targets carry no gradient into the segmenter") {
  // With the encoder frozen for the head, the head term can reach the
  // segmenter only through its target; the segmenter gradients must equal
  // segmenter-only gradients exactly.
  auto d = toy_data(10, 9);
  JointModel m = make_model(d, small_config(0.0), 2);
  auto batch = pointers(d.examples, 8);
  TrainOptions seg;
  seg.train_head = false;
  TrainOptions frozen;
  frozen.lambda = 3.0;
  frozen.freeze_encoder_for_head = true;
  Gradients gs = m.params().make_gradients(), gf = m.params().make_gradients();
  accumulate_batch_gradient_serial(m, batch, seg, 1, gs);
  accumulate_batch_gradient_serial(m, batch, frozen, 1, gf);
  for (std::size_t i = 0; i < gs.grads.size(); ++i) {
    const auto& name = m.params()[i].name;
    if (name.rfind("loss_head.", 0) == 0) {
      CHECK(gf.grads[i].cwiseAbs().maxCoeff() > 0.0);
    } else {
      INFO(name);
      CHECK(gf.grads[i] == gs.grads[i]);
    }
  }
}

TEST_CASE("one epoch lowers the mean training nll") {
  auto d = toy_data(50, 10);
  JointModel m = make_model(d, small_config(), 12);
  const double before = evaluate(m, d.examples, Execution::kSerial).mean_nll;
  TrainOptions opts;
  opts.epochs = 1;
  opts.batch_size = 8;
  opts.adam.lr = 1e-2;
  train_joint(m, d.examples, opts);
  const double after = evaluate(m, d.examples, Execution::kSerial).mean_nll;
  CHECK(after < before);
}

TEST_CASE("training is reproducible and checkpoints restore the model") {
  auto d = toy_data(30, 11);
  TrainOptions opts;
  opts.epochs = 2;
  opts.execution = Execution::kSerial;
  JointModel a = make_model(d, small_config(), 1);
  JointModel b = make_model(d, small_config(), 1);
  auto ha = train_joint(a, d.examples, opts);
  auto hb = train_joint(b, d.examples, opts);
  CHECK(ha.back().mean_nll == hb.back().mean_nll);
  CHECK(serialize_parameters(a.params()) == serialize_parameters(b.params()));

  JointModel c = make_model(d, small_config(), 99);
  deserialize_parameters(serialize_parameters(a.params()), c.params());
  auto ea = evaluate(a, d.examples, Execution::kSerial);
  auto ec = evaluate(c, d.examples, Execution::kSerial);
  CHECK(ea.nll == ec.nll);
  CHECK(ea.predicted_loss == ec.predicted_loss);
}

TEST_CASE("validation patience restores the best epoch") {
  auto d = toy_data(40, 12);
  std::vector<Example> train(d.examples.begin(), d.examples.begin() + 30);
  std::vector<Example> valid(d.examples.begin() + 30, d.examples.end());
  TrainOptions opts;
  opts.epochs = 6;
  opts.patience = 1;
  opts.adam.lr = 0.05;
  JointModel m = make_model(d, small_config(), 3);
  auto hist = train_joint(m, train, opts, &valid);
  double best = INFINITY;
  for (const auto& e : hist) best = std::min(best, *e.validation_nll);
  CHECK(evaluate(m, valid).mean_nll == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("pretrained n-gram vectors are installed with a zero padding row") {
  auto d = toy_data(10, 13);
  JointModel m = make_model(d, tiny_config(), 1);
  Matrix table = Matrix::Constant(d.features.ngrams().size(), 3, 0.5);
  m.set_ngram_embeddings(table);
  const Matrix& got = m.params().at("embeddings.ngram").tensor.value();
  CHECK(got.row(0).isZero(0));
  CHECK(got.row(1).isConstant(0.5));
  CHECK_THROWS_AS(m.set_ngram_embeddings(Matrix::Zero(2, 3)), ContractError);
}
