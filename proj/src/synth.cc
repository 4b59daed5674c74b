#include "alseg/synth.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "alseg/errors.h"
#include "alseg/rng.h"

namespace alseg {

namespace {

// Inverse-CDF sampler over ranks 0..n-1 with weight 1 / (rank + 1)^s.
class Zipf {
 public:
  Zipf(int n, double s) : cdf_(static_cast<std::size_t>(n)) {
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      acc += 1.0 / std::pow(i + 1.0, s);
      cdf_[static_cast<std::size_t>(i)] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }
  int operator()(Rng& rng) const {
    const double u = uniform01(rng);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                     static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }

 private:
  std::vector<double> cdf_;
};

int word_length(Rng& rng) {
  const double u = uniform01(rng);
  if (u < 0.20) return 1;
  if (u < 0.75) return 2;
  if (u < 0.90) return 3;
  return 4;
}

}  // namespace

std::vector<LabeledSentence> synth_corpus(const SynthOptions& o) {
  if (o.sentences < 1 || o.alphabet < 8 || o.lexicon < o.topics || o.topics < 1 ||
      o.min_words < 1 || o.max_words < o.min_words || o.topic_share < 0 || o.topic_share > 1) {
    throw ConfigError("synth_corpus: inconsistent options");
  }
  Rng rng(derive_seed(o.seed, 0x53594e5448ULL));
  const Zipf char_dist(o.alphabet, 1.0);

  std::vector<std::u32string> lexicon;
  std::set<std::u32string> seen;
  int attempts = 0;
  while (static_cast<int>(lexicon.size()) < o.lexicon) {
    if (++attempts > o.lexicon * 100) throw ConfigError("synth_corpus: alphabet too small for lexicon");
    std::u32string w;
    const int len = word_length(rng);
    for (int i = 0; i < len; ++i) w.push_back(static_cast<char32_t>(0x4E00 + char_dist(rng)));
    if (seen.insert(w).second) lexicon.push_back(std::move(w));
  }

  // Topic t owns lexicon entries with index % topics == t.
  const int per_topic = o.lexicon / o.topics;
  const Zipf global_dist(o.lexicon, 1.05);
  const Zipf topic_dist(per_topic, 1.05);
  const Zipf topic_pick(o.topics, 0.8);
  const std::u32string stop = U"。";
  const std::u32string comma = U"，";

  std::vector<LabeledSentence> corpus;
  corpus.reserve(static_cast<std::size_t>(o.sentences));
  for (int id = 0; id < o.sentences; ++id) {
    const int topic = topic_pick(rng);
    const int words = o.min_words + static_cast<int>(uniform_index(
                                        rng, static_cast<std::uint64_t>(o.max_words - o.min_words + 1)));
    Words ws;
    for (int k = 0; k < words; ++k) {
      int index;
      if (uniform01(rng) < o.topic_share) {
        index = topic + o.topics * topic_dist(rng);
      } else {
        index = global_dist(rng);
      }
      ws.push_back(lexicon[static_cast<std::size_t>(index)]);
      if (k + 1 < words && k >= 2 && uniform01(rng) < 0.08) ws.push_back(comma);
    }
    ws.push_back(stop);
    LabeledSentence s;
    s.sentence.id = id;
    for (const auto& w : ws) s.sentence.chars += w;
    s.tags = words_to_tags(ws);
    corpus.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace alseg
