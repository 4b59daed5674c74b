#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace alseg {

// Character position tags. The numeric values double as CRF state indices.
enum class Tag : std::uint8_t { B = 0, M = 1, E = 2, S = 3 };
inline constexpr int kNumTags = 4;

using TagSeq = std::vector<Tag>;
using Words = std::vector<std::u32string>;

inline constexpr int kDefaultMaxLength = 200;

struct Sentence {
  int id = 0;
  std::u32string chars;
};

struct LabeledSentence {
  Sentence sentence;
  TagSeq tags;
};

// BMES grammar: starts with B/S, ends with E/S, B/M -> M/E, E/S -> B/S.
bool is_legal_transition(Tag from, Tag to);
bool is_valid_tag_seq(const TagSeq& tags);

char tag_char(Tag t);
std::string tags_to_string(const TagSeq& tags);
TagSeq tags_from_string(std::string_view s);

TagSeq words_to_tags(const Words& words);
Words tags_to_words(std::u32string_view chars, const TagSeq& tags);

// Half-open character span [begin, end) of one word.
struct Span {
  int begin = 0;
  int end = 0;
  auto operator<=>(const Span&) const = default;
};
std::vector<Span> tag_spans(const TagSeq& tags);

// Cut positions (1..Len-1) between words; inverse of tags_from_boundaries.
std::vector<int> tags_to_boundaries(const TagSeq& tags);
TagSeq tags_from_boundaries(int length, const std::vector<int>& boundaries);

struct SegmentationEval {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long gold_words = 0;
  long predicted_words = 0;
  long correct_words = 0;
};

// Word-span precision/recall/F1 over a corpus. Inputs must be grammatical.
SegmentationEval evaluate_f1(const std::vector<TagSeq>& gold,
                             const std::vector<TagSeq>& predicted);
std::string format_report(const SegmentationEval& eval);

struct SplitRatios {
  double train = 0.6;
  double test = 0.2;
  double validation = 0.2;
};

struct DatasetSplit {
  std::vector<LabeledSentence> training;
  std::vector<LabeledSentence> testing;
  std::vector<LabeledSentence> validation;
  // Sentence ids; a partition of `training`.
  std::vector<int> labeled;
  std::vector<int> unlabeled;
};

inline constexpr std::size_t kMinSplitCorpus = 10;

DatasetSplit split_dataset(const std::vector<LabeledSentence>& corpus,
                           const SplitRatios& ratios, double labeled_fraction,
                           std::uint64_t seed);

std::map<int, long> word_length_census(const Words& words);
std::map<int, long> word_length_census(const std::vector<LabeledSentence>& corpus);

// Splits over-long sentences: after the last sentence-ending punctuation that
// fits, else at the last word boundary that fits, else a hard cut.
std::vector<LabeledSentence> enforce_max_length(const LabeledSentence& s,
                                                int max_length);
std::vector<Sentence> enforce_max_length(const Sentence& s, int max_length);

bool is_sentence_end(char32_t c);

// One sentence per line, words separated by single ASCII spaces.
LabeledSentence parse_labeled_line(std::string_view line, int id);
std::string format_labeled_line(const LabeledSentence& s);

std::vector<LabeledSentence> read_labeled_corpus(const std::filesystem::path& path,
                                                 int max_length = kDefaultMaxLength);
std::vector<Sentence> read_unlabeled_corpus(const std::filesystem::path& path,
                                            int max_length = kDefaultMaxLength);
void write_labeled_corpus(const std::filesystem::path& path,
                          const std::vector<LabeledSentence>& corpus);

}  // namespace alseg
