#include "alseg/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "alseg/errors.h"
#include "alseg/io.h"
#include "alseg/rng.h"
#include "alseg/utf8.h"

namespace alseg {

bool is_legal_transition(Tag from, Tag to) {
  const bool inside = from == Tag::B || from == Tag::M;
  const bool continues = to == Tag::M || to == Tag::E;
  return inside == continues;
}

bool is_valid_tag_seq(const TagSeq& tags) {
  if (tags.empty()) return false;
  if (tags.front() != Tag::B && tags.front() != Tag::S) return false;
  if (tags.back() != Tag::E && tags.back() != Tag::S) return false;
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (!is_legal_transition(tags[i - 1], tags[i])) return false;
  }
  return true;
}

char tag_char(Tag t) { return "BMES"[static_cast<int>(t)]; }

std::string tags_to_string(const TagSeq& tags) {
  std::string s;
  s.reserve(tags.size());
  for (Tag t : tags) s.push_back(tag_char(t));
  return s;
}

TagSeq tags_from_string(std::string_view s) {
  TagSeq tags;
  tags.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case 'B': tags.push_back(Tag::B); break;
      case 'M': tags.push_back(Tag::M); break;
      case 'E': tags.push_back(Tag::E); break;
      case 'S': tags.push_back(Tag::S); break;
      default: throw FormatError(std::string("unknown tag '") + c + "'");
    }
  }
  return tags;
}

TagSeq words_to_tags(const Words& words) {
  TagSeq tags;
  for (const auto& w : words) {
    if (w.empty()) throw FormatError("empty word in segmented line");
    if (w.size() == 1) {
      tags.push_back(Tag::S);
      continue;
    }
    tags.push_back(Tag::B);
    tags.insert(tags.end(), w.size() - 2, Tag::M);
    tags.push_back(Tag::E);
  }
  return tags;
}

std::vector<Span> tag_spans(const TagSeq& tags) {
  if (!is_valid_tag_seq(tags)) {
    throw ContractError("tag sequence violates the BMES grammar: " + tags_to_string(tags));
  }
  std::vector<Span> spans;
  int begin = 0;
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    if (tags[i] == Tag::E || tags[i] == Tag::S) {
      spans.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  return spans;
}

Words tags_to_words(std::u32string_view chars, const TagSeq& tags) {
  if (chars.size() != tags.size()) {
    throw ContractError("tags_to_words: " + std::to_string(chars.size()) + " chars vs " +
                        std::to_string(tags.size()) + " tags");
  }
  Words words;
  for (const Span& sp : tag_spans(tags)) {
    words.emplace_back(chars.substr(sp.begin, sp.end - sp.begin));
  }
  return words;
}

std::vector<int> tags_to_boundaries(const TagSeq& tags) {
  std::vector<int> cuts;
  for (const Span& sp : tag_spans(tags)) {
    if (sp.end < static_cast<int>(tags.size())) cuts.push_back(sp.end);
  }
  return cuts;
}

TagSeq tags_from_boundaries(int length, const std::vector<int>& boundaries) {
  if (length < 1) throw ContractError("sentence length must be positive");
  int prev = 0;
  for (int b : boundaries) {
    if (b <= prev) throw ContractError("boundaries must be strictly increasing and > 0");
    if (b >= length) {
      throw ContractError("boundary " + std::to_string(b) + " out of range for length " +
                          std::to_string(length));
    }
    prev = b;
  }
  TagSeq tags;
  tags.reserve(length);
  prev = 0;
  auto emit = [&](int end) {
    const int k = end - prev;
    if (k == 1) {
      tags.push_back(Tag::S);
    } else {
      tags.push_back(Tag::B);
      tags.insert(tags.end(), k - 2, Tag::M);
      tags.push_back(Tag::E);
    }
    prev = end;
  };
  for (int b : boundaries) emit(b);
  emit(length);
  return tags;
}

SegmentationEval evaluate_f1(const std::vector<TagSeq>& gold,
                             const std::vector<TagSeq>& predicted) {
  if (gold.size() != predicted.size()) {
    throw ContractError("evaluate_f1: corpus sizes differ");
  }
  if (gold.empty()) throw UndefinedMetricError("evaluate_f1: empty corpus");
  SegmentationEval ev;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) {
      throw ContractError("evaluate_f1: sentence " + std::to_string(i) +
                          " has mismatched lengths");
    }
    const auto g = tag_spans(gold[i]);
    const auto p = tag_spans(predicted[i]);
    ev.gold_words += static_cast<long>(g.size());
    ev.predicted_words += static_cast<long>(p.size());
    // Both span lists are sorted by begin and non-overlapping.
    std::size_t a = 0, b = 0;
    while (a < g.size() && b < p.size()) {
      if (g[a] == p[b]) {
        ++ev.correct_words;
        ++a;
        ++b;
      } else if (g[a].begin < p[b].begin ||
                 (g[a].begin == p[b].begin && g[a].end < p[b].end)) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  ev.precision = static_cast<double>(ev.correct_words) / ev.predicted_words;
  ev.recall = static_cast<double>(ev.correct_words) / ev.gold_words;
  const double pr = ev.precision + ev.recall;
  ev.f1 = pr > 0 ? 2 * ev.precision * ev.recall / pr : 0.0;
  return ev;
}

std::string format_report(const SegmentationEval& ev) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "precision %.4f\nrecall %.4f\nf1 %.4f\ngold_words %ld\n"
                "predicted_words %ld\ncorrect_words %ld\n",
                ev.precision, ev.recall, ev.f1, ev.gold_words, ev.predicted_words,
                ev.correct_words);
  return buf;
}

DatasetSplit split_dataset(const std::vector<LabeledSentence>& corpus,
                           const SplitRatios& ratios, double labeled_fraction,
                           std::uint64_t seed) {
  if (corpus.size() < kMinSplitCorpus) {
    throw ContractError("split_dataset: corpus has " + std::to_string(corpus.size()) +
                        " sentences, need at least " + std::to_string(kMinSplitCorpus));
  }
  if (ratios.train < 0 || ratios.test < 0 || ratios.validation < 0 ||
      std::abs(ratios.train + ratios.test + ratios.validation - 1.0) > 1e-9) {
    throw ContractError("split_dataset: ratios must be non-negative and sum to 1");
  }
  if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0)) {
    throw ContractError("split_dataset: labeled_fraction must lie in (0, 1)");
  }
  {
    std::set<int> ids;
    for (const auto& s : corpus) ids.insert(s.sentence.id);
    if (ids.size() != corpus.size()) throw ContractError("split_dataset: duplicate ids");
  }

  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x53504c4954ULL));
  shuffle(order, rng);

  const auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
  const auto n_test =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(n * ratios.test)));

  DatasetSplit split;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = corpus[order[k]];
    if (k < n_train) {
      split.training.push_back(s);
    } else if (k < n_train + n_test) {
      split.testing.push_back(s);
    } else {
      split.validation.push_back(s);
    }
  }

  // The training split is already in shuffled order, so its prefix is a
  // uniform sample.
  const auto n_labeled = static_cast<std::size_t>(
      std::llround(static_cast<double>(split.training.size()) * labeled_fraction));
  for (std::size_t k = 0; k < split.training.size(); ++k) {
    (k < n_labeled ? split.labeled : split.unlabeled)
        .push_back(split.training[k].sentence.id);
  }
  return split;
}

std::map<int, long> word_length_census(const Words& words) {
  std::map<int, long> counts;
  for (const auto& w : words) ++counts[static_cast<int>(w.size())];
  return counts;
}

std::map<int, long> word_length_census(const std::vector<LabeledSentence>& corpus) {
  std::map<int, long> counts;
  for (const auto& s : corpus) {
    for (const Span& sp : tag_spans(s.tags)) ++counts[sp.end - sp.begin];
  }
  return counts;
}

bool is_sentence_end(char32_t c) {
  switch (c) {
    case U'。': case U'！': case U'？': case U'；': case U'…':
    case U'!': case U'?': case U';': case U'.':
      return true;
    default:
      return false;
  }
}

namespace {

// Piece boundaries for a sentence of `len` chars given candidate word ends.
std::vector<int> choose_cuts(int len, int max_length, const std::vector<int>& word_ends,
                             const std::u32string& chars) {
  std::vector<int> cuts;
  int start = 0;
  while (len - start > max_length) {
    const int limit = start + max_length;
    int punct_cut = -1, word_cut = -1;
    for (int e : word_ends) {
      if (e <= start || e > limit) continue;
      word_cut = e;
      if (is_sentence_end(chars[e - 1])) punct_cut = e;
    }
    const int cut = punct_cut > 0 ? punct_cut : word_cut > 0 ? word_cut : limit;
    cuts.push_back(cut);
    start = cut;
  }
  return cuts;
}

}  // namespace

std::vector<LabeledSentence> enforce_max_length(const LabeledSentence& s, int max_length) {
  const int len = static_cast<int>(s.sentence.chars.size());
  if (len <= max_length) return {s};
  std::vector<int> ends;
  for (const Span& sp : tag_spans(s.tags)) ends.push_back(sp.end);
  const auto cuts = choose_cuts(len, max_length, ends, s.sentence.chars);
  spdlog::warn("sentence {} has {} chars (> {}), split into {} pieces", s.sentence.id, len,
               max_length, cuts.size() + 1);
  std::vector<LabeledSentence> pieces;
  int start = 0;
  auto add_piece = [&](int end) {
    LabeledSentence p;
    p.sentence.id = s.sentence.id;
    p.sentence.chars = s.sentence.chars.substr(start, end - start);
    // Re-derive tags from the word boundaries that fall inside the piece so
    // a hard cut through a word still yields a grammatical sequence.
    std::vector<int> inner;
    for (int e : ends) {
      if (e > start && e < end) inner.push_back(e - start);
    }
    p.tags = tags_from_boundaries(end - start, inner);
    pieces.push_back(std::move(p));
    start = end;
  };
  for (int c : cuts) add_piece(c);
  add_piece(len);
  return pieces;
}

std::vector<Sentence> enforce_max_length(const Sentence& s, int max_length) {
  const int len = static_cast<int>(s.chars.size());
  if (len <= max_length) return {s};
  std::vector<int> ends;
  for (int i = 1; i <= len; ++i) {
    if (is_sentence_end(s.chars[i - 1])) ends.push_back(i);
  }
  // Only punctuation ends are candidates for raw text; otherwise hard cut.
  std::vector<int> cuts;
  int start = 0;
  while (len - start > max_length) {
    const int limit = start + max_length;
    int cut = limit;
    for (int e : ends) {
      if (e > start && e <= limit) cut = e;
    }
    cuts.push_back(cut);
    start = cut;
  }
  spdlog::warn("raw sentence {} has {} chars (> {}), split into {} pieces", s.id, len,
               max_length, cuts.size() + 1);
  std::vector<Sentence> pieces;
  start = 0;
  for (std::size_t k = 0; k <= cuts.size(); ++k) {
    const int end = k < cuts.size() ? cuts[k] : len;
    pieces.push_back({s.id, s.chars.substr(start, end - start)});
    start = end;
  }
  return pieces;
}

namespace {

std::string_view strip_eol(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.remove_suffix(1);
  }
  return line;
}

}  // namespace

LabeledSentence parse_labeled_line(std::string_view line, int id) {
  line = strip_eol(line);
  Words words;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(' ', pos);
    const auto token = line.substr(pos, next == std::string_view::npos ? line.npos : next - pos);
    auto w = utf8::decode(token);
    for (char32_t c : w) {
      if (utf8::is_space(c)) {
        throw FormatError("line " + std::to_string(id + 1) +
                          ": words must be separated by single ASCII spaces");
      }
    }
    if (w.empty()) {
      throw FormatError("line " + std::to_string(id + 1) + ": empty word");
    }
    words.push_back(std::move(w));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  LabeledSentence s;
  s.sentence.id = id;
  for (const auto& w : words) s.sentence.chars += w;
  s.tags = words_to_tags(words);
  return s;
}

std::string format_labeled_line(const LabeledSentence& s) {
  std::string out;
  for (const auto& w : tags_to_words(s.sentence.chars, s.tags)) {
    if (!out.empty()) out.push_back(' ');
    out += utf8::encode(w);
  }
  return out;
}

std::vector<LabeledSentence> read_labeled_corpus(const std::filesystem::path& path,
                                                 int max_length) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open labeled corpus " + path.string());
  std::vector<LabeledSentence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip_eol(line).empty()) continue;
    LabeledSentence s;
    try {
      s = parse_labeled_line(line, lineno - 1);
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (auto& piece : enforce_max_length(s, max_length)) {
      piece.sentence.id = static_cast<int>(out.size());
      out.push_back(std::move(piece));
    }
  }
  return out;
}

std::vector<Sentence> read_unlabeled_corpus(const std::filesystem::path& path,
                                            int max_length) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open unlabeled corpus " + path.string());
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    std::u32string chars;
    for (char32_t c : utf8::decode(strip_eol(line))) {
      if (!utf8::is_space(c)) chars.push_back(c);
    }
    if (chars.empty()) continue;
    for (auto& piece : enforce_max_length(Sentence{0, std::move(chars)}, max_length)) {
      piece.id = static_cast<int>(out.size());
      out.push_back(std::move(piece));
    }
  }
  return out;
}

void write_labeled_corpus(const std::filesystem::path& path,
                          const std::vector<LabeledSentence>& corpus) {
  std::string content;
  for (const auto& s : corpus) {
    content += format_labeled_line(s);
    content.push_back('\n');
  }
  write_file_atomic(path, content);
}

}  // namespace alseg
