#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alseg/tensor.h"
#include "alseg/vocab.h"

namespace alseg {

// Pads n-grams that would start before the sentence, so position t always
// has a feature ending at character t. Private-use code point.
inline constexpr char32_t kBosSentinel = U'\uE000';

// Token t is chars[t-order+1 .. t], BOS-padded on the left. Output length
// equals the sentence length. Throws ConfigError unless order is 2, 3 or 4.
std::vector<std::u32string> ngram_features(std::u32string_view chars, int order);

struct FeatureConfig {
  int ngram_order = 2;  // 0 disables n-gram features
  int char_min_frequency = 1;
  int ngram_min_frequency = 2;
};

struct SentenceFeatures {
  std::vector<int> char_ids;
  std::vector<int> ngram_ids;  // empty when n-grams are off
  int length() const { return static_cast<int>(char_ids.size()); }
};

class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(Vocab chars, Vocab ngrams, int order);

  static FeatureExtractor build(const std::vector<std::u32string>& texts,
                                const FeatureConfig& config);

  SentenceFeatures extract(std::u32string_view chars) const;
  std::vector<std::vector<int>> ngram_sequences(const std::vector<std::u32string>& texts) const;

  int order() const { return order_; }
  bool uses_ngrams() const { return order_ > 0; }
  const Vocab& chars() const { return chars_; }
  const Vocab& ngrams() const { return ngrams_; }

 private:
  Vocab chars_;
  Vocab ngrams_;
  int order_ = 0;
};

struct EmbeddingRef {
  const Matrix* table = nullptr;
  Matrix* grad = nullptr;  // null: no gradient
};

// Gathers table rows. Backward scatters straight into `ref.grad`, skipping
// the PAD row.
Var embedding_lookup(Tape& tape, EmbeddingRef ref, std::span<const int> ids);

// Row t = [char_vector(c_t) ; ngram_vector(g_t)]; character-only when
// `ngrams.table` is null.
Var embed(Tape& tape, const SentenceFeatures& features, EmbeddingRef chars,
          EmbeddingRef ngrams);

}  // namespace alseg
