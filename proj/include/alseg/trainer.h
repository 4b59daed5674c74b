#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "alseg/corpus.h"
#include "alseg/features.h"
#include "alseg/joint_model.h"
#include "alseg/optim.h"

namespace alseg {

struct Example {
  int id = 0;
  SentenceFeatures features;
  TagSeq tags;
};

std::vector<Example> make_examples(const FeatureExtractor& fx,
                                   const std::vector<LabeledSentence>& sentences);

// kParallel fans sentences out over OpenMP threads; kSerial is the reference.
enum class Execution { kSerial, kParallel };

struct TrainOptions {
  int epochs = 30;
  int batch_size = 32;
  AdamOptions adam;
  double lambda = 1.0;
  // false trains the segmenter alone (the head graph is never built).
  bool train_head = true;
  // Stops the head's gradient at the encoder output (ablation).
  bool freeze_encoder_for_head = false;
  std::uint64_t seed = 1;
  Execution execution = Execution::kParallel;
  // Validation-NLL patience in epochs; 0 runs the fixed epoch budget.
  int patience = 0;
};

struct BatchTotals {
  double seg_nll = 0.0;    // sum over sentences
  double head_loss = 0.0;  // sum of squared residuals
  int sentences = 0;
};

// Adds the gradient of
//   (1/B) sum_i [ nll_i + lambda * (pred_i - sg(nll_i))^2 ]
// over `batch` into `out` (which must be zeroed by the caller). Sentence i
// draws its dropout mask from derive_seed(batch_seed, i), so both versions
// see identical randomness.
BatchTotals accumulate_batch_gradient_serial(const JointModel& model,
                                             std::span<const Example* const> batch,
                                             const TrainOptions& opts,
                                             std::uint64_t batch_seed, Gradients& out);
BatchTotals accumulate_batch_gradient_parallel(const JointModel& model,
                                               std::span<const Example* const> batch,
                                               const TrainOptions& opts,
                                               std::uint64_t batch_seed, Gradients& out);

struct EpochStats {
  int epoch = 0;
  double mean_nll = 0.0;
  double head_loss = 0.0;
  std::optional<double> validation_nll;
};

// Adam over shuffled mini-batches. With patience > 0 and a validation set,
// the parameters from the best validation epoch are restored at the end.
std::vector<EpochStats> train_joint(JointModel& model, const std::vector<Example>& train,
                                    const TrainOptions& opts,
                                    const std::vector<Example>* validation = nullptr);

struct Evaluation {
  SegmentationEval seg;
  double mean_nll = 0.0;   // segmentation loss only
  double head_loss = 0.0;  // mean squared residual of the loss head
  std::vector<double> nll;
  std::vector<double> predicted_loss;
  std::vector<TagSeq> predictions;
};

Evaluation evaluate(const JointModel& model, const std::vector<Example>& examples,
                    Execution execution = Execution::kParallel);

}  // namespace alseg
