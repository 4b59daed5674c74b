#include "alseg/vocab.h"

#include <algorithm>
#include <sstream>

#include "alseg/errors.h"
#include "alseg/io.h"
#include "alseg/utf8.h"

namespace alseg {

namespace {
const std::u32string kReservedNames[Vocab::kReserved] = {U"<PAD>", U"<UNK>", U"<BOS>"};
}

Vocab::Vocab() {
  for (const auto& r : kReservedNames) push(r);
}

void Vocab::push(std::u32string token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocab Vocab::build(const std::vector<std::u32string>& tokens, int min_frequency) {
  std::unordered_map<std::u32string, long> counts;
  for (const auto& t : tokens) ++counts[t];
  return build(counts, min_frequency);
}

Vocab Vocab::build(const std::unordered_map<std::u32string, long>& counts, int min_frequency) {
  std::vector<std::pair<std::u32string, long>> items;
  for (const auto& [tok, n] : counts) {
    if (n >= min_frequency) items.emplace_back(tok, n);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocab v;
  for (auto& [tok, n] : items) {
    if (!v.contains(tok)) v.push(std::move(tok));
  }
  return v;
}

int Vocab::id(const std::u32string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += utf8::encode(t);
    out.push_back('\n');
  }
  return out;
}

Vocab Vocab::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::u32string> lines;
  while (std::getline(in, line)) lines.push_back(utf8::decode(line));
  if (lines.size() < kReserved) throw FormatError("vocabulary file lacks reserved tokens");
  for (int i = 0; i < kReserved; ++i) {
    if (lines[i] != kReservedNames[i]) throw FormatError("vocabulary reserved token mismatch");
  }
  Vocab v;
  for (std::size_t i = kReserved; i < lines.size(); ++i) {
    if (v.contains(lines[i])) throw FormatError("duplicate vocabulary entry at line " +
                                                std::to_string(i + 1));
    v.push(std::move(lines[i]));
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Vocab Vocab::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace alseg
