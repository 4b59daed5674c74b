// Serial reference paths against their OpenMP counterparts, plus the fused
// LSTM kernel against the per-step tape reference.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <spdlog/spdlog.h>

#include "alseg/features.h"
#include "alseg/lstm.h"
#include "alseg/ops.h"
#include "alseg/strategies.h"
#include "alseg/synth.h"
#include "alseg/trainer.h"

using namespace alseg;

namespace {

struct Fixture {
  FeatureExtractor features;
  std::vector<Example> examples;
  std::vector<PoolSentence> pool;
  std::unique_ptr<JointModel> model;

  Fixture() {
    spdlog::set_level(spdlog::level::warn);
    SynthOptions o;
    o.sentences = 256;
    auto corpus = synth_corpus(o);
    std::vector<std::u32string> texts;
    for (const auto& s : corpus) texts.push_back(s.sentence.chars);
    features = FeatureExtractor::build(texts, FeatureConfig{});
    examples = make_examples(features, corpus);
    for (const auto& ex : examples) pool.push_back({ex.id, ex.features});
    ModelConfig mc;
    mc.char_dim = mc.ngram_dim = 32;
    mc.hidden = 32;
    mc.attention_dim = 16;
    model = std::make_unique<JointModel>(mc, features.chars().size(), features.ngrams().size(),
                                         true, 1);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_ScorePool(benchmark::State& state, Execution execution) {
  auto& f = fixture();
  const StrategyConfig c{StrategyKind::kNelp};
  for (auto _ : state) benchmark::DoNotOptimize(score_pool(*f.model, f.pool, c, execution));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.pool.size()));
}

void BM_BatchGradient(benchmark::State& state, Execution execution) {
  auto& f = fixture();
  std::vector<const Example*> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(&f.examples[static_cast<std::size_t>(i)]);
  TrainOptions opts;
  Gradients g = f.model->params().make_gradients();
  for (auto _ : state) {
    g.zero();
    if (execution == Execution::kSerial) {
      accumulate_batch_gradient_serial(*f.model, batch, opts, 1, g);
    } else {
      accumulate_batch_gradient_parallel(*f.model, batch, opts, 1, g);
    }
  }
  state.SetItemsProcessed(state.iterations() * 32);
}

void BM_Lstm(benchmark::State& state, bool fused) {
  Rng rng(1);
  const Index len = state.range(0), in = 64, hidden = 32;
  Matrix X(len, in), W(in, 4 * hidden), U(hidden, 4 * hidden), b(1, 4 * hidden);
  for (Matrix* m : {&X, &W, &U, &b}) {
    for (Index i = 0; i < m->size(); ++i) m->data()[i] = uniform(rng, -0.3, 0.3);
  }
  Matrix gw(W.rows(), W.cols()), gu(U.rows(), U.cols()), gb(b.rows(), b.cols());
  for (auto _ : state) {
    Tape tape;
    LstmVars p{tape.leaf(W, &gw), tape.leaf(U, &gu), tape.leaf(b, &gb)};
    Var x = tape.constant(X);
    Var h = fused ? lstm_sequence(x, p, false) : lstm_sequence_reference(x, p, false);
    Var loss = ops::sum(h);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
  state.SetItemsProcessed(state.iterations() * len);
}

}  // namespace

BENCHMARK_CAPTURE(BM_ScorePool, serial, Execution::kSerial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ScorePool, openmp, Execution::kParallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_BatchGradient, serial, Execution::kSerial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_BatchGradient, openmp, Execution::kParallel)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Lstm, reference, false)->Arg(20)->Arg(80);
BENCHMARK_CAPTURE(BM_Lstm, fused, true)->Arg(20)->Arg(80);

BENCHMARK_MAIN();
