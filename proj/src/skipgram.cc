#include "alseg/skipgram.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "alseg/errors.h"
#include "alseg/io.h"
#include "alseg/ops.h"
#include "alseg/params.h"
#include "alseg/rng.h"

namespace alseg {

std::vector<std::pair<int, int>> skipgram_pairs(std::span<const int> sequence, int window) {
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(sequence.size());
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - window); j <= std::min(n - 1, i + window); ++j) {
      if (j != i) pairs.emplace_back(sequence[i], sequence[j]);
    }
  }
  return pairs;
}

SkipGramResult train_skipgram(const std::vector<std::vector<int>>& sequences, int vocab_size,
                              const SkipGramOptions& opts) {
  if (opts.dim < 1 || opts.window < 1 || opts.negatives < 0 || opts.epochs < 1) {
    throw ConfigError("skip-gram: dim, window and epochs must be positive");
  }
  std::vector<long> counts(static_cast<std::size_t>(vocab_size), 0);
  long pairs_per_epoch = 0;
  for (const auto& seq : sequences) {
    for (int id : seq) {
      if (id < 0 || id >= vocab_size) throw ContractError("skip-gram: token id out of range");
      ++counts[id];
    }
    const long n = static_cast<long>(seq.size());
    for (long i = 0; i < n; ++i) {
      pairs_per_epoch += std::min(n - 1, i + opts.window) - std::max(0L, i - opts.window);
    }
  }
  const long distinct = std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; });
  if (distinct < 2) throw ContractError("skip-gram: need at least 2 distinct tokens");
  if (pairs_per_epoch == 0) throw ContractError("skip-gram: corpus yields no training pairs");

  // Cumulative noise distribution.
  std::vector<double> cdf(counts.size());
  double acc = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    acc += std::pow(static_cast<double>(counts[i]), 0.75);
    cdf[i] = acc;
  }
  Rng rng(derive_seed(opts.seed, 0x534b4950ULL));
  auto sample_noise = [&] {
    const double u = uniform01(rng) * acc;
    return static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  const double half = 0.5 / opts.dim;
  Matrix center = init::uniform(vocab_size, opts.dim, half, rng);
  Matrix context = Matrix::Zero(vocab_size, opts.dim);

  SkipGramResult res;
  const double total_steps = static_cast<double>(pairs_per_epoch) * opts.epochs;
  long step = 0;
  Eigen::RowVectorXd grad_center(opts.dim);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double loss = 0;
    for (const auto& seq : sequences) {
      for (const auto& [c, ctx] : skipgram_pairs(seq, opts.window)) {
        const double lr = std::max(opts.lr * (1.0 - step / total_steps), opts.lr * 1e-4);
        ++step;
        grad_center.setZero();
        auto update = [&](int target, double label) {
          const double score = center.row(c).dot(context.row(target));
          const double p = ops::sigmoid(score);
          loss -= label > 0 ? std::log(std::max(p, 1e-300)) : std::log(std::max(1 - p, 1e-300));
          const double g = lr * (label - p);
          grad_center += g * context.row(target);
          context.row(target) += g * center.row(c);
        };
        update(ctx, 1.0);
        for (int k = 0; k < opts.negatives; ++k) {
          const int neg = sample_noise();
          if (neg == ctx) continue;
          update(neg, 0.0);
        }
        center.row(c) += grad_center;
      }
    }
    res.epoch_loss.push_back(loss / static_cast<double>(pairs_per_epoch));
  }
  center.row(0).setZero();
  res.table = std::move(center);
  return res;
}

void save_embeddings(const std::filesystem::path& path, const Matrix& table) {
  std::string out = std::to_string(table.rows()) + " " + std::to_string(table.cols()) + "\n";
  char buf[40];
  for (Index r = 0; r < table.rows(); ++r) {
    for (Index c = 0; c < table.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", table(r, c));
      if (c) out.push_back(' ');
      out += buf;
    }
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

Matrix load_embeddings(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 1) {
    throw FormatError("bad embedding header in " + path.string());
  }
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) {
    if (!(in >> m.data()[k])) throw FormatError("truncated embedding file " + path.string());
  }
  return m;
}

}  // namespace alseg
