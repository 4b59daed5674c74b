#include "alseg/features.h"

#include <unordered_map>

#include "alseg/errors.h"
#include "alseg/ops.h"

namespace alseg {

std::vector<std::u32string> ngram_features(std::u32string_view chars, int order) {
  if (order < 2 || order > 4) {
    throw ConfigError("n-gram order must be 2, 3 or 4 (got " + std::to_string(order) + ")");
  }
  std::vector<std::u32string> out;
  out.reserve(chars.size());
  const int len = static_cast<int>(chars.size());
  for (int t = 0; t < len; ++t) {
    std::u32string tok;
    for (int k = t - order + 1; k <= t; ++k) tok.push_back(k < 0 ? kBosSentinel : chars[k]);
    out.push_back(std::move(tok));
  }
  return out;
}

FeatureExtractor::FeatureExtractor(Vocab chars, Vocab ngrams, int order)
    : chars_(std::move(chars)), ngrams_(std::move(ngrams)), order_(order) {
  if (order_ != 0) ngram_features(U"", order_);  // validates the order
}

FeatureExtractor FeatureExtractor::build(const std::vector<std::u32string>& texts,
                                         const FeatureConfig& config) {
  std::unordered_map<std::u32string, long> char_counts, ngram_counts;
  for (const auto& s : texts) {
    for (char32_t c : s) ++char_counts[std::u32string(1, c)];
    if (config.ngram_order > 0) {
      for (auto& g : ngram_features(s, config.ngram_order)) ++ngram_counts[std::move(g)];
    }
  }
  return FeatureExtractor(Vocab::build(char_counts, config.char_min_frequency),
                          Vocab::build(ngram_counts, config.ngram_min_frequency),
                          config.ngram_order);
}

SentenceFeatures FeatureExtractor::extract(std::u32string_view chars) const {
  SentenceFeatures f;
  f.char_ids.reserve(chars.size());
  for (char32_t c : chars) f.char_ids.push_back(chars_.id(std::u32string(1, c)));
  if (order_ > 0) {
    for (const auto& g : ngram_features(chars, order_)) f.ngram_ids.push_back(ngrams_.id(g));
  }
  return f;
}

std::vector<std::vector<int>> FeatureExtractor::ngram_sequences(
    const std::vector<std::u32string>& texts) const {
  std::vector<std::vector<int>> out;
  out.reserve(texts.size());
  for (const auto& s : texts) out.push_back(extract(s).ngram_ids);
  return out;
}

Var embedding_lookup(Tape& tape, EmbeddingRef ref, std::span<const int> ids) {
  const Matrix& table = *ref.table;
  Matrix rows(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= table.rows()) {
      throw ContractError("embedding id " + std::to_string(ids[t]) + " out of range");
    }
    rows.row(static_cast<Index>(t)) = table.row(ids[t]);
  }
  const int io = static_cast<int>(tape.size());
  std::vector<int> id_copy(ids.begin(), ids.end());
  Matrix* sink = ref.grad;
  return tape.record_source(std::move(rows), sink != nullptr,
                            [io, sink, id_copy = std::move(id_copy)](Tape& tp) {
                              const Matrix& g = tp.grad(io);
                              for (std::size_t t = 0; t < id_copy.size(); ++t) {
                                if (id_copy[t] == Vocab::kPad) continue;
                                sink->row(id_copy[t]) += g.row(static_cast<Index>(t));
                              }
                            });
}

Var embed(Tape& tape, const SentenceFeatures& features, EmbeddingRef chars,
          EmbeddingRef ngrams) {
  Var c = embedding_lookup(tape, chars, features.char_ids);
  if (ngrams.table == nullptr) return c;
  if (features.ngram_ids.size() != features.char_ids.size()) {
    throw ContractError("embed: n-gram features missing or misaligned");
  }
  return ops::concat_cols(c, embedding_lookup(tape, ngrams, features.ngram_ids));
}

}  // namespace alseg
