#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alseg/annotation_queue.h"
#include "alseg/config.h"
#include "alseg/corpus.h"
#include "alseg/features.h"
#include "alseg/joint_model.h"

namespace alseg {

struct IterationRecord {
  int iteration = 0;
  int train_size = 0;
  double test_nll = 0.0;  // segmentation loss only; drives best-model selection
  double test_f1 = 0.0;
  double head_loss = 0.0;
  double seconds = 0.0;
  int requested = 0;  // sentences queried this iteration
  int received = 0;   // labels that came back
};

struct ALState {
  std::vector<int> labeled;
  std::vector<int> unlabeled;
  std::vector<int> pending;  // queried, waiting for the oracle
  // Oracle answers, kept so a resumed run trains on exactly the same labels.
  std::map<int, TagSeq> oracle_labels;
  std::vector<IterationRecord> history;  // entry i belongs to iteration i
  int best_iteration = -1;
  double best_loss = std::numeric_limits<double>::infinity();
  bool exhausted = false;

  int iteration() const { return static_cast<int>(history.size()) - 1; }
};

nlohmann::json state_to_json(const ALState& s);
ALState state_from_json(const nlohmann::json& j);

// Throws ContractError unless labeled, unlabeled and pending are pairwise
// disjoint and together equal `initial`.
void check_bookkeeping(const ALState& s, const std::vector<int>& initial);

// Split, features and pretrained n-gram vectors derived from a config.
struct PreparedData {
  DatasetSplit split;
  FeatureExtractor features;
  std::optional<Matrix> ngram_table;
  std::map<int, const LabeledSentence*> training_by_id;

  void index();
};

PreparedData prepare_data(const RunConfig& config, std::vector<LabeledSentence> corpus);
std::vector<LabeledSentence> load_corpus(const RunConfig& config);

class Oracle {
 public:
  virtual ~Oracle() = default;
  // Labels for some or all of `ids` (sentence id -> tags).
  virtual std::map<int, TagSeq> label(int iteration, const std::vector<int>& ids) = 0;
};

// Answers from the withheld reference tags.
class GoldOracle : public Oracle {
 public:
  explicit GoldOracle(const PreparedData& data) : data_(data) {}
  std::map<int, TagSeq> label(int iteration, const std::vector<int>& ids) override;

 private:
  const PreparedData& data_;
};

// Publishes queries to an AnnotationQueue and waits up to the deadline.
class HumanOracle : public Oracle {
 public:
  HumanOracle(const PreparedData& data, AnnotationQueue& queue, double deadline_seconds)
      : data_(data), queue_(queue), deadline_seconds_(deadline_seconds) {}
  std::map<int, TagSeq> label(int iteration, const std::vector<int>& ids) override;

 private:
  const PreparedData& data_;
  AnnotationQueue& queue_;
  double deadline_seconds_;
};

// Thread-safe snapshot of a run for the service endpoints.
class RunMonitor {
 public:
  void publish(const ALState& state, std::string phase);
  nlohmann::json status() const;  // iteration, phase, sizes, latest test F1
  nlohmann::json curves() const;  // full metric history

 private:
  mutable std::mutex mu_;
  nlohmann::json status_ = {{"iteration", -1}, {"phase", "starting"}};
  nlohmann::json curves_ = nlohmann::json::array();
};

enum class RunStatus { kCompleted, kExhausted, kSuspended };

// One active-learning run bound to a run directory:
//   config.json, split.json, vocab.chars.txt, vocab.ngrams.txt,
//   ngram_embeddings.txt, state.json, metrics.csv, selections/iter_XX.csv,
//   checkpoints/iter_XX.ckpt, best.ckpt, pool_predictions_iter_00.txt
// Opening a directory that already holds a state resumes it.
class ActiveLearningRun {
 public:
  ActiveLearningRun(const RunConfig& config, std::filesystem::path dir);
  ActiveLearningRun(const RunConfig& config, std::filesystem::path dir,
                    std::vector<LabeledSentence> corpus);

  // Runs until M iterations are recorded, the pool drains, or (human oracle)
  // no label arrives before the deadline.
  RunStatus run(Oracle& oracle, RunMonitor* monitor = nullptr);
  // Trains and records iteration 0 only (no querying).
  void train_initial(RunMonitor* monitor = nullptr);

  const ALState& state() const { return state_; }
  const PreparedData& data() const { return data_; }
  const RunConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<int> initial_training_ids() const;

  std::unique_ptr<JointModel> make_model(std::uint64_t seed) const;
  std::unique_ptr<JointModel> load_model(const std::filesystem::path& checkpoint) const;
  std::unique_ptr<JointModel> best_model() const;

 private:
  void initialise();
  void resume();
  void persist_state() const;
  void write_metrics() const;
  void record_iteration(const IterationRecord& record, std::unique_ptr<JointModel> model,
                        RunMonitor* monitor);
  std::unique_ptr<JointModel> train_iteration(int iteration, IterationRecord& record);
  std::vector<LabeledSentence> labeled_sentences() const;
  std::filesystem::path checkpoint_path(int iteration) const;

  RunConfig config_;
  std::filesystem::path dir_;
  PreparedData data_;
  ALState state_;
  std::unique_ptr<JointModel> current_;
};

// A trained run reopened for inference, without re-running pretraining.
struct LoadedRun {
  RunConfig config;
  FeatureExtractor features;
  std::unique_ptr<JointModel> model;
  std::vector<int> testing_ids;
};

// Loads config, vocabularies and a checkpoint (relative to `dir`).
LoadedRun load_run(const std::filesystem::path& dir, const std::string& checkpoint = "best.ckpt");

// Per-strategy F1 curves over seeds. Runs live in root/<strategy>/seed_<k>;
// seed k uses run seed config.seed + k while the split stays fixed.
struct CurvePoint {
  std::string strategy;
  int seed = 0;
  int iteration = 0;
  int train_size = 0;
  double f1 = 0.0;
  double test_nll = 0.0;
};

std::vector<CurvePoint> compare_strategies(const RunConfig& config,
                                           const std::vector<StrategyKind>& strategies,
                                           int seeds, const std::filesystem::path& root);

// Reads metrics.csv of every run under `root` (layout above).
std::vector<CurvePoint> collect_curves(const std::filesystem::path& root);

// "strategy,seed,iteration,train_size,f1" lines.
std::string format_curves(const std::vector<CurvePoint>& points);
// strategy,iteration,mean_f1,min_f1,max_f1,seeds
std::string format_curve_summary(const std::vector<CurvePoint>& points);
// Long format for plotting: strategy,seed,iteration,train_size,metric,value
std::string format_curves_long(const std::vector<CurvePoint>& points);

}  // namespace alseg
