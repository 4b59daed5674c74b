#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "alseg/al_loop.h"
#include "alseg/errors.h"
#include "alseg/io.h"
#include "support/runs.h"

using namespace alseg;
using namespace alseg::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Gold answers until `fail_at`, where it throws as if the process died.
class CrashingOracle : public Oracle {
 public:
  CrashingOracle(const PreparedData& d, int fail_at) : gold_(d), fail_at_(fail_at) {}
  std::map<int, TagSeq> label(int iteration, const std::vector<int>& ids) override {
    if (iteration == fail_at_) throw std::runtime_error("simulated crash");
    return gold_.label(iteration, ids);
  }

 private:
  GoldOracle gold_;
  int fail_at_;
};

// Answers only the first `keep` sentences of each request.
class PartialOracle : public Oracle {
 public:
  PartialOracle(const PreparedData& d, std::size_t keep) : gold_(d), keep_(keep) {}
  std::map<int, TagSeq> label(int iteration, const std::vector<int>& ids) override {
    std::vector<int> some(ids.begin(), ids.begin() + std::min(keep_, ids.size()));
    return gold_.label(iteration, some);
  }

 private:
  GoldOracle gold_;
  std::size_t keep_;
};

}  // namespace

TEST_CASE("bookkeeping check rejects overlaps and losses") {
  ALState s;
  s.labeled = {1, 2};
  s.unlabeled = {3, 4};
  CHECK_NOTHROW(check_bookkeeping(s, {1, 2, 3, 4}));
  s.pending = {4};
  CHECK_THROWS_AS(check_bookkeeping(s, {1, 2, 3, 4}), ContractError);
  s.pending.clear();
  CHECK_THROWS_AS(check_bookkeeping(s, {1, 2, 3, 4, 5}), ContractError);
}

TEST_CASE("state survives a json round trip") {
  ALState s;
  s.labeled = {3, 1};
  s.unlabeled = {2};
  s.pending = {5};
  s.oracle_labels[1] = tags_from_string("BES");
  s.history.push_back({0, 2, 4.5, 0.75, 0.1, 1.5, 0, 0});
  s.best_iteration = 0;
  s.best_loss = 4.5;
  auto back = state_from_json(state_to_json(s));
  CHECK(back.labeled == s.labeled);
  CHECK(back.pending == s.pending);
  CHECK(back.oracle_labels == s.oracle_labels);
  CHECK(back.history.size() == 1);
  CHECK(back.history[0].test_f1 == 0.75);
  CHECK(back.best_loss == 4.5);
}

TEST_CASE("gold-oracle run grows the labeled set by n each iteration") {
  TempDir tmp("grow");
  auto cfg = run_config(3, 8);
  ActiveLearningRun run(cfg, tmp / "run", run_corpus(150));
  const auto initial = run.initial_training_ids();
  const std::size_t labeled0 = run.state().labeled.size();
  GoldOracle oracle(run.data());
  CHECK(run.run(oracle) == RunStatus::kCompleted);

  const auto& st = run.state();
  REQUIRE(st.history.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(st.history[i].iteration == i);
    CHECK(st.history[i].train_size == static_cast<int>(labeled0) + 8 * i);
  }
  CHECK(st.pending.empty());
  check_bookkeeping(st, initial);

  // Oracle answers are the withheld reference tags.
  for (const auto& [id, tags] : st.oracle_labels) {
    CHECK(tags == run.data().training_by_id.at(id)->tags);
  }
  // Best iteration has the smallest test nll.
  auto best = std::min_element(st.history.begin(), st.history.end(),
                               [](const auto& a, const auto& b) { return a.test_nll < b.test_nll; });
  CHECK(st.best_iteration == best->iteration);
  CHECK(st.best_loss == best->test_nll);

  for (const char* f : {"config.json", "split.json", "vocab.chars.txt", "vocab.ngrams.txt",
                        "ngram_embeddings.txt", "state.json", "metrics.csv", "best.ckpt",
                        "pool_predictions_iter_00.txt", "selections/iter_01.csv",
                        "checkpoints/iter_03.ckpt"}) {
    INFO(f);
    CHECK(fs::exists(tmp / "run" / f));
  }
  const auto metrics = slurp(tmp / "run" / "metrics.csv");
  CHECK(metrics.rfind("iteration,train_size,test_nll,test_f1,seconds\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 5);
  const auto sel = slurp(tmp / "run" / "selections" / "iter_02.csv");
  CHECK(std::count(sel.begin(), sel.end(), '\n') == 9);
  CHECK(!fs::exists(tmp / "run.staging"));

  // The best checkpoint reproduces the recorded test metrics.
  auto loaded = load_run(tmp / "run");
  CHECK(loaded.testing_ids.size() == run.data().split.testing.size());
}

TEST_CASE("asking for more than the pool exhausts it") {
  TempDir tmp("exhaust");
  auto cfg = run_config(5, 1000);
  ActiveLearningRun run(cfg, tmp / "run", run_corpus(80));
  GoldOracle oracle(run.data());
  CHECK(run.run(oracle) == RunStatus::kExhausted);
  const auto& st = run.state();
  CHECK(st.exhausted);
  CHECK(st.unlabeled.empty());
  CHECK(st.history.size() == 2);
  CHECK(st.labeled.size() == run.initial_training_ids().size());
}

TEST_CASE("a resumed run ends where an uninterrupted one does") {
  auto cfg = run_config(3, 6);
  const auto corpus = run_corpus(120, 4);

  TempDir a("straight");
  ActiveLearningRun straight(cfg, a / "run", corpus);
  GoldOracle gold(straight.data());
  REQUIRE(straight.run(gold) == RunStatus::kCompleted);

  TempDir b("resumed");
  {
    ActiveLearningRun first(cfg, b / "run", corpus);
    CrashingOracle crash(first.data(), 2);
    CHECK_THROWS(first.run(crash));
    CHECK(first.state().history.size() == 2);
    CHECK(first.state().pending.size() == 6);
  }
  ActiveLearningRun again(cfg, b / "run", corpus);
  CHECK(again.state().pending.size() == 6);
  GoldOracle gold2(again.data());
  REQUIRE(again.run(gold2) == RunStatus::kCompleted);

  CHECK(again.state().labeled == straight.state().labeled);
  CHECK(again.state().unlabeled == straight.state().unlabeled);
  CHECK(again.state().best_iteration == straight.state().best_iteration);
  for (std::size_t i = 0; i < straight.state().history.size(); ++i) {
    CHECK(again.state().history[i].test_nll == straight.state().history[i].test_nll);
    CHECK(again.state().history[i].test_f1 == straight.state().history[i].test_f1);
  }
  CHECK(slurp(a / "run" / "best.ckpt") == slurp(b / "run" / "best.ckpt"));
  CHECK(slurp(a / "run" / "selections" / "iter_03.csv") ==
        slurp(b / "run" / "selections" / "iter_03.csv"));
}

TEST_CASE("a changed config cannot resume an existing run") {
  TempDir tmp("mismatch");
  auto cfg = run_config(1, 5);
  const auto corpus = run_corpus(60);
  {
    ActiveLearningRun run(cfg, tmp / "run", corpus);
    run.train_initial();
  }
  auto other = cfg;
  other.model.hidden = 12;
  CHECK_THROWS_AS(ActiveLearningRun(other, tmp / "run", corpus), ConfigError);
  auto cosmetic = cfg;
  cosmetic.service.port = 9999;
  cosmetic.threads = 3;
  CHECK_NOTHROW(ActiveLearningRun(cosmetic, tmp / "run", corpus));
}

TEST_CASE("labels that never arrive go back to the pool") {
  TempDir tmp("partial");
  auto cfg = run_config(2, 6);
  ActiveLearningRun run(cfg, tmp / "run", run_corpus(120));
  const std::size_t labeled0 = run.initial_training_ids().size() -
                               run.state().unlabeled.size();
  PartialOracle oracle(run.data(), 4);
  CHECK(run.run(oracle) == RunStatus::kCompleted);
  const auto& st = run.state();
  CHECK(st.history[1].requested == 6);
  CHECK(st.history[1].received == 4);
  CHECK(st.labeled.size() == labeled0 + 8);
  check_bookkeeping(st, run.initial_training_ids());
}

TEST_CASE("human oracle suspends when nobody answers and resumes on labels") {
  TempDir tmp("human");
  auto cfg = run_config(1, 3);
  ActiveLearningRun run(cfg, tmp / "run", run_corpus(60));
  AnnotationQueue queue;
  RunMonitor monitor;
  {
    HumanOracle silent(run.data(), queue, 0.05);
    CHECK(run.run(silent, &monitor) == RunStatus::kSuspended);
  }
  CHECK(run.state().pending.size() == 3);
  CHECK(monitor.status()["phase"] == "suspended");
  CHECK(queue.counts().pending == 0);  // the expired tasks were withdrawn

  // A patient annotator answers with the reference segmentation.
  HumanOracle patient(run.data(), queue, 30.0);
  std::thread annotator([&] {
    int done = 0;
    while (done < 3) {
      for (const auto& task : queue.lease_batch(10)) {
        const auto& gold = run.data().training_by_id.at(task.sentence_id)->tags;
        CHECK(queue.submit(task.task_id, tags_to_boundaries(gold)).outcome ==
              SubmitOutcome::kAccepted);
        ++done;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  });
  const auto status = run.run(patient, &monitor);
  annotator.join();
  CHECK(status == RunStatus::kCompleted);
  CHECK(run.state().history.size() == 2);
  CHECK(run.state().history[1].received == 3);
  CHECK(monitor.curves().size() == 2);
}

TEST_CASE("strategy comparison writes one curve row per strategy, seed and iteration") {
  TempDir tmp("compare");
  auto cfg = run_config(2, 5);
  cfg.corpus.path = (tmp / "corpus.txt").string();
  write_labeled_corpus(tmp / "corpus.txt", run_corpus(60));
  const std::vector<StrategyKind> kinds = {StrategyKind::kRand, StrategyKind::kLc,
                                           StrategyKind::kMte, StrategyKind::kMtm,
                                           StrategyKind::kNelp};
  auto points = compare_strategies(cfg, kinds, 2, tmp / "cmp");
  CHECK(points.size() == 5 * 3 * 2);
  auto collected = collect_curves(tmp / "cmp");
  CHECK(collected.size() == points.size());
  const auto table = format_curves(collected);
  CHECK(std::count(table.begin(), table.end(), '\n') == 31);
  const auto summary = format_curve_summary(collected);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 5 * 3);
  const auto longf = format_curves_long(collected);
  CHECK(std::count(longf.begin(), longf.end(), '\n') == 1 + 2 * 30);
  CHECK(fs::exists(tmp / "cmp" / "curves.csv"));
  // Every run shares the split, so sizes line up across strategies and seeds.
  for (const auto& p : points) CHECK(p.train_size == points[0].train_size + 5 * p.iteration);
}
