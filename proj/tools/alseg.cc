// alseg: active-learning word segmentation toolkit.
#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "alseg/al_loop.h"
#include "alseg/config.h"
#include "alseg/errors.h"
#include "alseg/io.h"
#include "alseg/service.h"
#include "alseg/synth.h"
#include "alseg/trainer.h"

namespace fs = std::filesystem;
using namespace alseg;

namespace {

// Long-form flags that override config values. Unset flags leave the file (or
// default) value alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> corpus;
  std::optional<int> max_length;
  std::optional<double> labeled_fraction;
  std::optional<std::uint64_t> split_seed;
  std::optional<int> ngram_order;
  std::optional<bool> pretrain;
  std::optional<bool> pretrain_training_only;
  std::optional<int> char_dim, ngram_dim, hidden, attention_dim;
  std::optional<double> dropout;
  std::optional<int> epochs, batch_size, patience;
  std::optional<double> lr, lambda;
  std::optional<bool> train_head, freeze_encoder, warm_start;
  std::optional<std::string> strategy;
  std::optional<double> alpha, beta;
  std::optional<int> iterations, n;
  std::optional<std::string> oracle;
  std::optional<double> deadline;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> execution;
  // Any config key by its JSON path, e.g. "features.skipgram.window=3".
  std::vector<std::string> assignments;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_option("--set", assignments, "key.path=value for any config key (repeatable)");
    app->add_option("--corpus", corpus, "segmented corpus (one sentence per line)");
    app->add_option("--max-length", max_length);
    app->add_option("--labeled-fraction", labeled_fraction, "initially labeled share of training");
    app->add_option("--split-seed", split_seed);
    app->add_option("--ngram-order", ngram_order, "0 (off), 2, 3 or 4");
    app->add_option("--pretrain", pretrain, "skip-gram pretraining of n-gram vectors");
    app->add_option("--pretrain-training-only", pretrain_training_only);
    app->add_option("--char-dim", char_dim);
    app->add_option("--ngram-dim", ngram_dim);
    app->add_option("--hidden", hidden, "LSTM units per direction");
    app->add_option("--attention-dim", attention_dim);
    app->add_option("--dropout", dropout);
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--patience", patience);
    app->add_option("--lr", lr);
    app->add_option("--lambda", lambda, "loss-head weight in the joint loss");
    app->add_option("--train-head", train_head);
    app->add_option("--freeze-encoder-for-head", freeze_encoder);
    app->add_option("--warm-start", warm_start);
    app->add_option("--strategy", strategy, "rand, lc, mte, mtm or nelp");
    app->add_option("--alpha", alpha);
    app->add_option("--beta", beta);
    app->add_option("--iters", iterations, "active-learning iterations M");
    app->add_option("--n", n, "sentences queried per iteration");
    app->add_option("--oracle", oracle, "gold or human");
    app->add_option("--deadline", deadline, "human-oracle deadline in seconds");
    app->add_option("--host", host);
    app->add_option("--port", port)->envname("ALSEG_PORT");
    app->add_option("--seed", seed);
    app->add_option("--threads", threads);
    app->add_option("--execution", execution, "serial or parallel");
  }

  RunConfig assign(const RunConfig& base) const {
    nlohmann::json j = to_json(base);
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value: " + a);
      std::string pointer = "/" + a.substr(0, eq);
      std::replace(pointer.begin(), pointer.end(), '.', '/');
      const std::string text = a.substr(eq + 1);
      nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
      if (value.is_discarded()) value = text;  // bare strings need no quotes
      j[nlohmann::json::json_pointer(pointer)] = value;
    }
    return config_from_json(j);
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!assignments.empty()) c = assign(c);
    auto set = [](auto& dst, const auto& src) {
      if (src) dst = *src;
    };
    set(c.corpus.path, corpus);
    set(c.corpus.max_length, max_length);
    set(c.split.labeled_fraction, labeled_fraction);
    set(c.split.seed, split_seed);
    set(c.features.extraction.ngram_order, ngram_order);
    set(c.features.pretrain, pretrain);
    set(c.features.pretrain_training_only, pretrain_training_only);
    set(c.model.char_dim, char_dim);
    set(c.model.ngram_dim, ngram_dim);
    set(c.model.hidden, hidden);
    set(c.model.attention_dim, attention_dim);
    set(c.model.dropout, dropout);
    if (epochs) c.train.epochs = *epochs;
    set(c.train.batch_size, batch_size);
    set(c.train.patience, patience);
    set(c.train.adam.lr, lr);
    set(c.train.lambda, lambda);
    set(c.train.train_head, train_head);
    set(c.train.freeze_encoder_for_head, freeze_encoder);
    set(c.train.warm_start, warm_start);
    if (strategy) c.strategy.kind = parse_strategy(*strategy);
    set(c.strategy.alpha, alpha);
    set(c.strategy.beta, beta);
    set(c.loop.iterations, iterations);
    set(c.loop.n, n);
    if (oracle) c.oracle.kind = parse_oracle(*oracle);
    set(c.oracle.deadline_seconds, deadline);
    set(c.service.host, host);
    set(c.service.port, port);
    set(c.seed, seed);
    set(c.threads, threads);
    if (execution) {
      if (*execution == "serial") {
        c.execution = Execution::kSerial;
      } else if (*execution == "parallel") {
        c.execution = Execution::kParallel;
      } else {
        throw ConfigError("--execution: expected serial or parallel");
      }
    }
    c.strategy.seed = c.seed;
    validate(c);
    if (c.threads > 0) omp_set_num_threads(c.threads);
    return c;
  }
};

void print_history(const ALState& s) {
  std::printf("iteration train_size test_nll test_f1\n");
  for (const auto& r : s.history) {
    std::printf("%9d %10d %8.4f %7.4f\n", r.iteration, r.train_size, r.test_nll, r.test_f1);
  }
  if (s.best_iteration >= 0) {
    std::printf("best iteration %d (test nll %.4f)\n", s.best_iteration, s.best_loss);
  }
}

std::vector<StrategyKind> parse_strategy_list(const std::string& csv) {
  std::vector<StrategyKind> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_strategy(item));
  }
  if (out.empty()) throw ConfigError("--strategies: empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning word segmentation (BiLSTM-CRF with a loss-prediction head)"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  Overrides train_o, run_o, cmp_o, serve_o;
  std::string out_dir;

  auto* train = app.add_subcommand("train", "train on the labeled split and report test F1");
  train_o.add_to(train);
  train->add_option("--out", out_dir, "run directory to create")->required();

  auto* al_run = app.add_subcommand("al-run", "run (or resume) the active-learning loop");
  run_o.add_to(al_run);
  al_run->add_option("--out", out_dir, "run directory")->required();

  std::string eval_run, eval_corpus, eval_checkpoint = "best.ckpt";
  auto* eval = app.add_subcommand("eval", "score a run's checkpoint on a corpus");
  eval->add_option("--run", eval_run, "run directory")->required();
  eval->add_option("--corpus", eval_corpus, "segmented corpus; default: the run's testing split");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path relative to the run");

  std::string strategies = "rand,lc,mte,mtm,nelp";
  int seeds = 3;
  auto* compare = app.add_subcommand("compare", "active-learning curves for several strategies");
  cmp_o.add_to(compare);
  compare->add_option("--strategies", strategies, "comma-separated list");
  compare->add_option("--seeds", seeds, "runs per strategy");
  compare->add_option("--out", out_dir, "root directory for the runs")->required();

  auto* serve = app.add_subcommand("serve", "annotation API with a human-oracle run");
  serve_o.add_to(serve);
  serve->add_option("--out", out_dir, "run directory")->envname("ALSEG_RUN_DIR")->required();

  std::string curves_root, curves_out;
  auto* export_curves = app.add_subcommand("export-curves", "F1 tables from run directories");
  export_curves->add_option("--root", curves_root, "directory containing runs")->required();
  export_curves->add_option("--out", curves_out, "output directory (default: root)");

  SynthOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-corpus", "write a synthetic segmented corpus");
  synth->add_option("--sentences", synth_opts.sentences);
  synth->add_option("--seed", synth_opts.seed);
  synth->add_option("--alphabet", synth_opts.alphabet);
  synth->add_option("--lexicon", synth_opts.lexicon);
  synth->add_option("--out", synth_out)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*train) {
      RunConfig c = train_o.resolve();
      ActiveLearningRun run(c, out_dir);
      run.train_initial();
      const auto& r = run.state().history.front();
      std::printf("train_size %d\ntest_nll %.4f\ntest_f1 %.4f\n", r.train_size, r.test_nll,
                  r.test_f1);
    } else if (*al_run) {
      RunConfig c = run_o.resolve();
      if (c.oracle.kind == OracleKind::kHuman) {
        throw ConfigError("al-run uses the gold oracle; use 'serve' for human annotation");
      }
      ActiveLearningRun run(c, out_dir);
      GoldOracle oracle(run.data());
      run.run(oracle);
      print_history(run.state());
    } else if (*eval) {
      LoadedRun r = load_run(eval_run, eval_checkpoint);
      std::vector<LabeledSentence> sentences;
      if (!eval_corpus.empty()) {
        sentences = read_labeled_corpus(eval_corpus, r.config.corpus.max_length);
      } else {
        auto corpus = load_corpus(r.config);
        std::set<int> wanted(r.testing_ids.begin(), r.testing_ids.end());
        for (auto& s : corpus) {
          if (wanted.contains(s.sentence.id)) sentences.push_back(std::move(s));
        }
        if (sentences.size() != wanted.size()) {
          throw FormatError("corpus no longer matches the run's testing split");
        }
      }
      auto ev = evaluate(*r.model, make_examples(r.features, sentences), r.config.execution);
      std::printf("%smean_nll %.4f\n", format_report(ev.seg).c_str(), ev.mean_nll);
    } else if (*compare) {
      RunConfig c = cmp_o.resolve();
      auto points = compare_strategies(c, parse_strategy_list(strategies), seeds, out_dir);
      std::printf("%s", format_curve_summary(points).c_str());
    } else if (*serve) {
      RunConfig c = serve_o.resolve();
      c.oracle.kind = OracleKind::kHuman;
      AnnotationQueue queue(std::chrono::duration_cast<AnnotationQueue::Clock::duration>(
          std::chrono::duration<double>(c.oracle.lease_seconds)));
      RunMonitor monitor;
      AnnotationServer server(queue, monitor);
      const int port = server.bind(c.service.host, c.service.port);
      server.start();
      spdlog::info("annotation API on http://{}:{}", c.service.host, port);
      ActiveLearningRun run(c, out_dir);
      HumanOracle oracle(run.data(), queue, c.oracle.deadline_seconds);
      const RunStatus status = run.run(oracle, &monitor);
      print_history(run.state());
      server.stop();
      if (status == RunStatus::kSuspended) {
        std::printf("suspended: no labels arrived; rerun serve to resume\n");
      }
    } else if (*export_curves) {
      const fs::path out = curves_out.empty() ? fs::path(curves_root) : fs::path(curves_out);
      auto points = collect_curves(curves_root);
      if (points.empty()) throw ConfigError("no metrics.csv found under " + curves_root);
      write_file_atomic(out / "curves.csv", format_curves(points));
      write_file_atomic(out / "curves_long.csv", format_curves_long(points));
      write_file_atomic(out / "curves_summary.csv", format_curve_summary(points));
      std::printf("%zu rows written to %s\n", points.size(), out.string().c_str());
    } else if (*synth) {
      write_labeled_corpus(synth_out, synth_corpus(synth_opts));
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
