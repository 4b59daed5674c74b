#pragma once

#include <cstdint>
#include <vector>

#include "alseg/corpus.h"

namespace alseg {

// Generates a segmented corpus from a random lexicon over CJK code points.
// Word lengths follow a CWS-like profile (mostly two characters); word and
// character frequencies are Zipfian, and each sentence draws most words from
// one of several topic sub-lexicons so that pools are unevenly informative.
struct SynthOptions {
  int sentences = 2000;
  int alphabet = 300;
  int lexicon = 2000;
  int topics = 8;
  double topic_share = 0.7;  // fraction of words drawn from the sentence topic
  int min_words = 4;
  int max_words = 12;
  std::uint64_t seed = 1;
};

std::vector<LabeledSentence> synth_corpus(const SynthOptions& opts);

}  // namespace alseg
