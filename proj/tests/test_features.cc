#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "alseg/errors.h"
#include "alseg/features.h"
#include "alseg/gradcheck.h"
#include "alseg/ops.h"
#include "alseg/skipgram.h"
#include "alseg/vocab.h"
#include "support/oracles.h"

using namespace alseg;

namespace {

const std::u32string kB(1, kBosSentinel);

double cosine(const Matrix& t, int a, int b) {
  return t.row(a).dot(t.row(b)) / (t.row(a).norm() * t.row(b).norm());
}

}  // namespace

TEST_CASE("n-gram features align with characters") {
  using V = std::vector<std::u32string>;
  CHECK(ngram_features(U"abc", 2) == V{kB + U"a", U"ab", U"bc"});
  CHECK(ngram_features(U"a", 2) == V{kB + U"a"});
  CHECK(ngram_features(U"abc", 3) == V{kB + kB + U"a", kB + U"ab", U"abc"});
  CHECK(ngram_features(U"abcde", 4).size() == 5);
  CHECK_THROWS_AS(ngram_features(U"abc", 1), ConfigError);
  CHECK_THROWS_AS(ngram_features(U"abc", 5), ConfigError);
}

TEST_CASE("vocabulary ids") {
  Vocab v = Vocab::build(std::vector<std::u32string>{U"b", U"a", U"b", U"c", U"c", U"c"}, 1);
  CHECK(v.size() == Vocab::kReserved + 3);
  CHECK(v.id(U"c") == 3);
  CHECK(v.id(U"b") == 4);
  CHECK(v.id(U"a") == 5);
  CHECK(v.id(U"zzz") == Vocab::kUnk);
  Vocab v2 = Vocab::build(std::vector<std::u32string>{U"b", U"a", U"b"}, 2);
  CHECK(v2.id(U"a") == Vocab::kUnk);
  CHECK(Vocab::deserialize(v.serialize()) == v);
  CHECK(v.serialize().rfind("<PAD>\n<UNK>\n<BOS>\n", 0) == 0);

  const auto path = std::filesystem::temp_directory_path() / "alseg_vocab_test.txt";
  v.save(path);
  CHECK(Vocab::load(path) == v);
  std::filesystem::remove(path);
}

TEST_CASE("feature extraction maps unseen items to UNK") {
  FeatureExtractor fx = FeatureExtractor::build({U"abab", U"abc"}, FeatureConfig{});
  auto f = fx.extract(U"abz");
  REQUIRE(f.length() == 3);
  CHECK(f.ngram_ids.size() == 3);
  CHECK(f.char_ids[2] == Vocab::kUnk);
  CHECK(f.ngram_ids[1] != Vocab::kUnk);  // "ab" occurs three times
  CHECK(f.ngram_ids[2] == Vocab::kUnk);  // "bz" never seen
  FeatureConfig off;
  off.ngram_order = 0;
  auto chars_only = FeatureExtractor::build({U"ab"}, off).extract(U"ab");
  CHECK(chars_only.ngram_ids.empty());
}

TEST_CASE("embed concatenates table rows") {
  Rng rng(3);
  Matrix chars = testing::random_matrix(6, 3, rng);
  Matrix ngrams = testing::random_matrix(5, 2, rng);
  SentenceFeatures f{{4, 5, 1}, {3, 1, 4}};
  Tape tape;
  Var x = embed(tape, f, {&chars, nullptr}, {&ngrams, nullptr});
  REQUIRE(x.rows() == 3);
  REQUIRE(x.cols() == 5);
  CHECK(x.value().row(0).leftCols(3) == chars.row(4));
  CHECK(x.value().row(0).rightCols(2) == ngrams.row(3));
  CHECK(x.value().row(1).rightCols(2) == ngrams.row(Vocab::kUnk));
  Var c = embed(tape, f, {&chars, nullptr}, {});
  CHECK(c.cols() == 3);
}

TEST_CASE("embedding gradients scatter into the table and skip padding") {
  Rng rng(8);
  Tensor table(testing::random_matrix(5, 3, rng));
  Matrix grad = Matrix::Zero(5, 3);
  std::vector<int> ids = {2, 0, 2, 4};
  Tape tape;
  Var rows = embedding_lookup(tape, {&table.value(), &grad}, ids);
  Rng prng(1);
  Matrix w = testing::random_matrix(4, 3, prng);
  tape.backward(ops::sum(ops::mul(rows, tape.constant(w))));
  CHECK(grad.row(0).isZero(0));
  CHECK(grad.row(2).isApprox(w.row(0) + w.row(2)));
  CHECK(grad.row(4).isApprox(w.row(3)));
  CHECK(grad.row(1).isZero(0));
}

TEST_CASE("skip-gram pairs") {
  std::vector<int> seq = {7, 8, 9};
  auto pairs = skipgram_pairs(seq, 1);
  std::vector<std::pair<int, int>> expected = {{7, 8}, {8, 7}, {8, 9}, {9, 8}};
  CHECK(pairs == expected);
  CHECK(skipgram_pairs(std::vector<int>{1}, 2).empty());
}

TEST_CASE("skip-gram separates co-occurrence clusters") {
  // Tokens 3..5 only co-occur with each other, 6..8 likewise.
  std::vector<std::vector<int>> corpus;
  Rng rng(12);
  for (int s = 0; s < 400; ++s) {
    const int base = s % 2 == 0 ? 3 : 6;
    std::vector<int> seq;
    for (int k = 0; k < 8; ++k) seq.push_back(base + static_cast<int>(uniform_index(rng, 3)));
    corpus.push_back(seq);
  }
  SkipGramOptions opts;
  opts.dim = 16;
  opts.epochs = 5;
  auto r = train_skipgram(corpus, 9, opts);
  REQUIRE(r.table.rows() == 9);
  REQUIRE(r.table.cols() == 16);
  CHECK(r.table.row(0).isZero(0));
  CHECK(cosine(r.table, 3, 4) > cosine(r.table, 3, 7));
  CHECK(cosine(r.table, 6, 8) > cosine(r.table, 6, 4));
  REQUIRE(r.epoch_loss.size() == 5);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());

  auto again = train_skipgram(corpus, 9, opts);
  CHECK(again.table == r.table);
}

TEST_CASE("skip-gram refuses degenerate input") {
  CHECK_THROWS_AS(train_skipgram({{3, 3, 3}}, 4, {}), ContractError);
  CHECK_THROWS_AS(train_skipgram({{3}, {4}}, 5, {}), ContractError);
}

TEST_CASE("embedding files round trip") {
  Rng rng(2);
  Matrix t = testing::random_matrix(4, 3, rng);
  const auto path = std::filesystem::temp_directory_path() / "alseg_emb_test.txt";
  save_embeddings(path, t);
  Matrix back = load_embeddings(path);
  CHECK(back == t);
  std::filesystem::remove(path);
}
