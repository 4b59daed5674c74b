#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "alseg/tensor.h"

namespace alseg {

struct SkipGramOptions {
  int dim = 128;
  int window = 2;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;  // decays linearly towards zero over training
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  Matrix table;  // center vectors, vocab_size x dim, row 0 zero
  std::vector<double> epoch_loss;  // mean negative-sampling loss per pair
};

// (center, context) pairs within `window` positions, in sequence order.
std::vector<std::pair<int, int>> skipgram_pairs(std::span<const int> sequence, int window);

// Skip-gram with negative sampling (noise distribution: unigram^0.75).
// Single-threaded and deterministic for a given seed.
SkipGramResult train_skipgram(const std::vector<std::vector<int>>& sequences, int vocab_size,
                              const SkipGramOptions& opts);

// Header "vocab_size dim", then one space-separated row per token.
void save_embeddings(const std::filesystem::path& path, const Matrix& table);
Matrix load_embeddings(const std::filesystem::path& path);

}  // namespace alseg
