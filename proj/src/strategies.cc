#include "alseg/strategies.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "alseg/errors.h"

namespace alseg {

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRand: return "rand";
    case StrategyKind::kLc: return "lc";
    case StrategyKind::kMte: return "mte";
    case StrategyKind::kMtm: return "mtm";
    case StrategyKind::kNelp: return "nelp";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::kRand, StrategyKind::kLc, StrategyKind::kMte, StrategyKind::kMtm,
                 StrategyKind::kNelp}) {
    if (strategy_name(k) == name) return k;
  }
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected rand, lc, mte, mtm or nelp)");
}

void validate(const StrategyConfig& config, bool head_available) {
  if (!(config.alpha >= 0) || !(config.beta >= 0)) {
    throw ConfigError("strategy weights must be non-negative");
  }
  if (config.kind != StrategyKind::kNelp) return;
  if (config.alpha + config.beta <= 0) throw ConfigError("nelp needs alpha + beta > 0");
  if (config.beta > 0 && !head_available) {
    throw ConfigError("nelp with beta > 0 needs a trained loss head");
  }
}

double token_entropy_sum(const Matrix& marginals) {
  double h = 0.0;
  for (Index t = 0; t < marginals.rows(); ++t) {
    for (Index k = 0; k < marginals.cols(); ++k) {
      const double p = marginals(t, k);
      if (p > 0) h -= p * std::log(p);
    }
  }
  return std::max(h, 0.0);
}

double normalized_entropy(const Matrix& marginals) {
  const auto len = static_cast<double>(marginals.rows());
  const auto n = static_cast<double>(marginals.cols());
  if (len < 1 || n < 2) throw ContractError("normalized_entropy: need Len >= 1 and N >= 2");
  return token_entropy_sum(marginals) / (std::sqrt(len) * std::log(n));
}

double least_confidence(double viterbi_logprob) {
  return 1.0 - std::exp(std::min(viterbi_logprob, 0.0));
}

double min_margin_score(const Matrix& marginals) {
  if (marginals.rows() < 1 || marginals.cols() < 2) {
    throw ContractError("min_margin_score: need Len >= 1 and N >= 2");
  }
  double smallest = INFINITY;
  for (Index t = 0; t < marginals.rows(); ++t) {
    double first = -INFINITY, second = -INFINITY;
    for (Index k = 0; k < marginals.cols(); ++k) {
      const double p = marginals(t, k);
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    smallest = std::min(smallest, first - second);
  }
  return -smallest;
}

double nelp_score(double normalized_entropy, double predicted_loss, double alpha, double beta) {
  return alpha * normalized_entropy + beta * predicted_loss;
}

double random_score(std::uint64_t seed, int sentence_id) {
  Rng rng(derive_seed(seed, 0x52414e44ULL, static_cast<std::uint64_t>(sentence_id)));
  return uniform01(rng);
}

StrategyScore score_analysis(const StrategyConfig& config, int sentence_id,
                             const JointModel::Analysis& analysis) {
  StrategyScore s;
  s.sentence_id = sentence_id;
  const Matrix& m = analysis.seg.marginals;
  switch (config.kind) {
    case StrategyKind::kRand:
      s.score = random_score(config.seed, sentence_id);
      break;
    case StrategyKind::kLc:
      s.score = least_confidence(analysis.seg.viterbi_logprob);
      break;
    case StrategyKind::kMte:
      s.score = token_entropy_sum(m);
      break;
    case StrategyKind::kMtm:
      s.score = min_margin_score(m);
      break;
    case StrategyKind::kNelp:
      s.normalized_entropy = normalized_entropy(m);
      s.predicted_loss = analysis.predicted_loss;
      s.score = nelp_score(*s.normalized_entropy, *s.predicted_loss, config.alpha, config.beta);
      break;
  }
  if (!std::isfinite(s.score)) {
    throw NumericError("non-finite " + std::string(strategy_name(config.kind)) +
                       " score for sentence " + std::to_string(sentence_id));
  }
  return s;
}

std::vector<StrategyScore> score_pool(const JointModel& model, std::span<const PoolSentence> pool,
                                      const StrategyConfig& config, Execution execution) {
  std::vector<StrategyScore> out(pool.size());
  if (config.kind == StrategyKind::kRand) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      out[i] = {pool[i].id, random_score(config.seed, pool[i].id), {}, {}};
    }
    return out;
  }
  const int n = static_cast<int>(pool.size());
  auto one = [&](int i) {
    const auto& p = pool[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = score_analysis(config, p.id, model.analyze(p.features));
  };
  if (execution == Execution::kParallel) {
    bool failed = false;
    std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
      try {
        one(i);
      } catch (const std::exception& e) {
#pragma omp critical(alseg_score_failure)
        {
          failed = true;
          failure = e.what();
        }
      }
    }
    if (failed) throw NumericError("pool scoring failed: " + failure);
  } else {
    for (int i = 0; i < n; ++i) one(i);
  }
  return out;
}

std::vector<int> select_top_n(std::span<const StrategyScore> scores, int n) {
  if (n < 1) throw ContractError("select_top_n: n must be >= 1");
  if (scores.empty()) {
    spdlog::warn("select_top_n: empty pool");
    return {};
  }
  std::vector<const StrategyScore*> order;
  order.reserve(scores.size());
  for (const auto& s : scores) order.push_back(&s);
  auto before = [](const StrategyScore* a, const StrategyScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->sentence_id < b->sentence_id;
  };
  const std::size_t k = std::min(order.size(), static_cast<std::size_t>(n));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    before);
  std::vector<int> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(order[i]->sentence_id);
  return ids;
}

std::string format_score_dump(std::span<const StrategyScore> scores, StrategyKind kind) {
  std::string out = "id,strategy,score,normalized_entropy,predicted_loss\n";
  for (const auto& s : scores) {
    out += fmt::format("{},{},{:.17g},", s.sentence_id, strategy_name(kind), s.score);
    if (s.normalized_entropy) out += fmt::format("{:.17g}", *s.normalized_entropy);
    out += ',';
    if (s.predicted_loss) out += fmt::format("{:.17g}", *s.predicted_loss);
    out += '\n';
  }
  return out;
}

}  // namespace alseg
