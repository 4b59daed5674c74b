#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alseg/joint_model.h"
#include "alseg/trainer.h"

namespace alseg {

enum class StrategyKind { kRand, kLc, kMte, kMtm, kNelp };

std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);  // ConfigError if unknown

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kNelp;
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 1;  // rand only
};

// Throws ConfigError for negative weights, alpha + beta == 0 under nelp, or
// beta > 0 without a trained loss head.
void validate(const StrategyConfig& config, bool head_available);

struct StrategyScore {
  int sentence_id = 0;
  double score = 0.0;  // higher = queried first
  std::optional<double> normalized_entropy;
  std::optional<double> predicted_loss;
};

// Scores from token marginals (Len x N rows). Natural logs throughout.
double token_entropy_sum(const Matrix& marginals);
double normalized_entropy(const Matrix& marginals);
double least_confidence(double viterbi_logprob);
double min_margin_score(const Matrix& marginals);
double nelp_score(double normalized_entropy, double predicted_loss, double alpha, double beta);
// In [0, 1); a function of (seed, id) only.
double random_score(std::uint64_t seed, int sentence_id);

StrategyScore score_analysis(const StrategyConfig& config, int sentence_id,
                             const JointModel::Analysis& analysis);

struct PoolSentence {
  int id = 0;
  SentenceFeatures features;
};

std::vector<StrategyScore> score_pool(const JointModel& model, std::span<const PoolSentence> pool,
                                      const StrategyConfig& config,
                                      Execution execution = Execution::kParallel);

// Highest n scores, ties by ascending id; the whole pool when n >= size.
std::vector<int> select_top_n(std::span<const StrategyScore> scores, int n);

// "id,strategy,score,normalized_entropy,predicted_loss" lines with a header;
// absent components are empty fields.
std::string format_score_dump(std::span<const StrategyScore> scores, StrategyKind kind);

}  // namespace alseg
