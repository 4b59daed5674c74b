#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace alseg {

// Dense token ids with reserved PAD=0, UNK=1, BOS=2. Tokens below the
// frequency threshold are left out and map to UNK.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kReserved = 3;

  Vocab();

  // Ids are assigned by descending count, ties by code-point order, so the
  // result depends only on the multiset of tokens.
  static Vocab build(const std::vector<std::u32string>& tokens, int min_frequency);
  static Vocab build(const std::unordered_map<std::u32string, long>& counts, int min_frequency);

  int id(const std::u32string& token) const;
  bool contains(const std::u32string& token) const { return ids_.contains(token); }
  const std::u32string& token(int id) const { return tokens_.at(id); }
  int size() const { return static_cast<int>(tokens_.size()); }

  // UTF-8, one token per line, line number = id. Reserved ids are written as
  // <PAD>, <UNK>, <BOS>.
  std::string serialize() const;
  static Vocab deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void push(std::u32string token);

  std::vector<std::u32string> tokens_;
  std::unordered_map<std::u32string, int> ids_;
};

}  // namespace alseg
