#include "alseg/trainer.h"

#include <omp.h>

#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "alseg/errors.h"
#include "alseg/ops.h"

namespace alseg {

std::vector<Example> make_examples(const FeatureExtractor& fx,
                                   const std::vector<LabeledSentence>& sentences) {
  std::vector<Example> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back({s.sentence.id, fx.extract(s.sentence.chars), s.tags});
  return out;
}

namespace {

struct SentenceLoss {
  double nll = 0.0;
  double residual_sq = 0.0;
};

SentenceLoss sentence_gradient(const JointModel& model, const Example& ex,
                               const TrainOptions& opts, double inv_batch, std::uint64_t seed,
                               Gradients& sink) {
  Tape tape;
  Rng rng(seed);
  auto g = model.forward(tape, ex.features, &sink, true, rng, opts.train_head,
                         opts.freeze_encoder_for_head);
  Var nll = crf::nll(g.emissions, g.transitions, ex.tags);
  SentenceLoss out{nll.scalar(), 0.0};
  Var total = nll;
  if (opts.train_head) {
    // The target is a constant copy: no gradient reaches the segmenter through it.
    Var target = ops::stop_gradient(nll);
    Var sq = ops::squared_error(*g.predicted_loss, target);
    out.residual_sq = sq.scalar();
    total = ops::add(nll, ops::scale(sq, opts.lambda));
  }
  tape.backward(ops::scale(total, inv_batch));
  return out;
}

void check_batch(const JointModel& model, std::span<const Example* const> batch,
                 const Gradients& out) {
  if (batch.empty()) throw ContractError("empty training batch");
  if (out.grads.size() != model.params().size()) {
    throw ContractError("gradient buffer does not match the parameter set");
  }
}

}  // namespace

BatchTotals accumulate_batch_gradient_serial(const JointModel& model,
                                             std::span<const Example* const> batch,
                                             const TrainOptions& opts,
                                             std::uint64_t batch_seed, Gradients& out) {
  check_batch(model, batch, out);
  const double inv = 1.0 / static_cast<double>(batch.size());
  BatchTotals totals;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto l = sentence_gradient(model, *batch[i], opts, inv, derive_seed(batch_seed, i), out);
    totals.seg_nll += l.nll;
    totals.head_loss += l.residual_sq;
  }
  totals.sentences = static_cast<int>(batch.size());
  return totals;
}

BatchTotals accumulate_batch_gradient_parallel(const JointModel& model,
                                               std::span<const Example* const> batch,
                                               const TrainOptions& opts,
                                               std::uint64_t batch_seed, Gradients& out) {
  check_batch(model, batch, out);
  const double inv = 1.0 / static_cast<double>(batch.size());
  const int n = static_cast<int>(batch.size());
  const int workers = std::max(1, std::min(omp_get_max_threads(), n));
  if (workers == 1) return accumulate_batch_gradient_serial(model, batch, opts, batch_seed, out);

  std::vector<Gradients> partial(static_cast<std::size_t>(workers), model.params().make_gradients());
  std::vector<SentenceLoss> losses(batch.size());
  bool failed = false;
  std::string failure;
#pragma omp parallel num_threads(workers)
  {
    Gradients& mine = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      try {
        losses[static_cast<std::size_t>(i)] =
            sentence_gradient(model, *batch[static_cast<std::size_t>(i)], opts, inv,
                              derive_seed(batch_seed, static_cast<std::uint64_t>(i)), mine);
      } catch (const std::exception& e) {
#pragma omp critical(alseg_train_failure)
        {
          failed = true;
          failure = e.what();
        }
      }
    }
  }
  if (failed) throw NumericError("batch gradient failed: " + failure);
  // Reduce in worker order so a fixed thread count gives a fixed result.
  for (auto& p : partial) out += p;
  BatchTotals totals;
  for (const auto& l : losses) {
    totals.seg_nll += l.nll;
    totals.head_loss += l.residual_sq;
  }
  totals.sentences = n;
  return totals;
}

std::vector<EpochStats> train_joint(JointModel& model, const std::vector<Example>& train,
                                    const TrainOptions& opts,
                                    const std::vector<Example>* validation) {
  if (train.empty()) throw ContractError("train_joint: no training sentences");
  if (opts.batch_size < 1 || opts.epochs < 0) throw ConfigError("bad epoch or batch settings");
  if (opts.lambda < 0) throw ConfigError("lambda must be non-negative");

  AdamState adam;
  Gradients grads = model.params().make_gradients();
  std::vector<const Example*> order(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) order[i] = &train[i];

  const bool early_stop = opts.patience > 0 && validation && !validation->empty();
  std::vector<Matrix> best_params;
  double best_val = INFINITY;
  int since_best = 0;
  std::vector<EpochStats> history;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(opts.seed, 0x45504f4348ULL, static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);
    double nll_sum = 0.0, head_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(opts.batch_size),
                                                    order.size() - start);
      std::span<const Example* const> batch(order.data() + start, len);
      const std::uint64_t batch_seed =
          derive_seed(opts.seed, static_cast<std::uint64_t>(epoch) + 1, batch_index++);
      grads.zero();
      BatchTotals t = opts.execution == Execution::kParallel
                          ? accumulate_batch_gradient_parallel(model, batch, opts, batch_seed, grads)
                          : accumulate_batch_gradient_serial(model, batch, opts, batch_seed, grads);
      nll_sum += t.seg_nll;
      head_sum += t.head_loss;
      adam_step(model.params(), grads, opts.adam, adam);
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.mean_nll = nll_sum / static_cast<double>(train.size());
    stats.head_loss = head_sum / static_cast<double>(train.size());
    if (validation && !validation->empty()) {
      stats.validation_nll = evaluate(model, *validation, opts.execution).mean_nll;
    }
    spdlog::debug("epoch {} nll {:.4f} head {:.4f}", stats.epoch, stats.mean_nll, stats.head_loss);
    history.push_back(stats);

    if (early_stop) {
      if (*stats.validation_nll < best_val) {
        best_val = *stats.validation_nll;
        since_best = 0;
        best_params.clear();
        for (const auto& p : model.params()) best_params.push_back(p.tensor.value());
      } else if (++since_best >= opts.patience) {
        spdlog::info("early stop after epoch {} (best validation nll {:.4f})", stats.epoch, best_val);
        break;
      }
    }
  }
  if (early_stop && !best_params.empty()) {
    for (std::size_t i = 0; i < best_params.size(); ++i) {
      model.params()[i].tensor.value() = best_params[i];
    }
  }
  return history;
}

Evaluation evaluate(const JointModel& model, const std::vector<Example>& examples,
                    Execution execution) {
  if (examples.empty()) throw ContractError("evaluate: no sentences");
  const int n = static_cast<int>(examples.size());
  Evaluation ev;
  ev.nll.resize(examples.size());
  ev.predicted_loss.resize(examples.size());
  ev.predictions.resize(examples.size());
  auto one = [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    auto a = model.analyze(examples[k].features, &examples[k].tags);
    ev.nll[k] = *a.seg.nll;
    ev.predicted_loss[k] = a.predicted_loss;
    ev.predictions[k] = std::move(a.seg.viterbi_tags);
  };
  if (execution == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i) one(i);
  } else {
    for (int i = 0; i < n; ++i) one(i);
  }
  std::vector<TagSeq> gold;
  gold.reserve(examples.size());
  for (const auto& e : examples) gold.push_back(e.tags);
  ev.seg = evaluate_f1(gold, ev.predictions);
  ev.mean_nll = std::accumulate(ev.nll.begin(), ev.nll.end(), 0.0) / n;
  ev.head_loss = loss_head_loss(ev.predicted_loss, ev.nll);
  return ev;
}

}  // namespace alseg
