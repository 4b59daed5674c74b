#include "alseg/al_loop.h"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "alseg/checkpoint.h"
#include "alseg/errors.h"
#include "alseg/io.h"
#include "alseg/skipgram.h"
#include "alseg/strategies.h"
#include "alseg/trainer.h"
#include "alseg/utf8.h"

namespace alseg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kStateFile = "state.json";
constexpr const char* kConfigFile = "config.json";

std::string iter_name(int iteration) { return fmt::format("iter_{:02d}", iteration); }

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// Keys that may differ when a run directory is reopened.
json comparable(json j) {
  j.erase("service");
  j.erase("threads");
  j.erase("execution");
  j["oracle"].erase("deadline_seconds");
  j["oracle"].erase("lease_seconds");
  return j;
}

}  // namespace

json state_to_json(const ALState& s) {
  json labels = json::object();
  for (const auto& [id, tags] : s.oracle_labels) labels[std::to_string(id)] = tags_to_string(tags);
  json history = json::array();
  for (const auto& r : s.history) {
    history.push_back({{"iteration", r.iteration},
                       {"train_size", r.train_size},
                       {"test_nll", r.test_nll},
                       {"test_f1", r.test_f1},
                       {"head_loss", r.head_loss},
                       {"seconds", r.seconds},
                       {"requested", r.requested},
                       {"received", r.received}});
  }
  return {{"labeled", s.labeled},
          {"unlabeled", s.unlabeled},
          {"pending", s.pending},
          {"oracle_labels", labels},
          {"history", history},
          {"best_iteration", s.best_iteration},
          {"best_loss", s.best_iteration < 0 ? json(nullptr) : json(s.best_loss)},
          {"exhausted", s.exhausted}};
}

ALState state_from_json(const json& j) {
  try {
    ALState s;
    s.labeled = j.at("labeled").get<std::vector<int>>();
    s.unlabeled = j.at("unlabeled").get<std::vector<int>>();
    s.pending = j.at("pending").get<std::vector<int>>();
    for (auto it = j.at("oracle_labels").begin(); it != j.at("oracle_labels").end(); ++it) {
      s.oracle_labels[std::stoi(it.key())] = tags_from_string(it.value().get<std::string>());
    }
    for (const auto& r : j.at("history")) {
      s.history.push_back({r.at("iteration").get<int>(), r.at("train_size").get<int>(),
                           r.at("test_nll").get<double>(), r.at("test_f1").get<double>(),
                           r.at("head_loss").get<double>(), r.at("seconds").get<double>(),
                           r.at("requested").get<int>(), r.at("received").get<int>()});
    }
    s.best_iteration = j.at("best_iteration").get<int>();
    if (!j.at("best_loss").is_null()) s.best_loss = j.at("best_loss").get<double>();
    s.exhausted = j.at("exhausted").get<bool>();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed run state: ") + e.what());
  }
}

void check_bookkeeping(const ALState& s, const std::vector<int>& initial) {
  std::set<int> seen;
  std::size_t total = 0;
  for (const auto* part : {&s.labeled, &s.unlabeled, &s.pending}) {
    for (int id : *part) {
      if (!seen.insert(id).second) {
        throw ContractError("sentence " + std::to_string(id) + " is in two sets");
      }
    }
    total += part->size();
  }
  const std::set<int> expected(initial.begin(), initial.end());
  if (seen != expected || total != initial.size()) {
    throw ContractError("labeled, unlabeled and pending do not cover the training ids");
  }
}

void PreparedData::index() {
  training_by_id.clear();
  for (const auto& s : split.training) training_by_id[s.sentence.id] = &s;
}

std::vector<LabeledSentence> load_corpus(const RunConfig& config) {
  if (config.corpus.path.empty()) throw ConfigError("corpus.path: not set");
  return read_labeled_corpus(config.corpus.path, config.corpus.max_length);
}

PreparedData prepare_data(const RunConfig& config, std::vector<LabeledSentence> corpus) {
  PreparedData d;
  d.split = split_dataset(corpus, config.split.ratios, config.split.labeled_fraction,
                          config.split.seed);
  d.index();

  std::vector<std::u32string> all_text, training_text;
  for (const auto* part : {&d.split.training, &d.split.testing, &d.split.validation}) {
    for (const auto& s : *part) all_text.push_back(s.sentence.chars);
  }
  for (const auto& s : d.split.training) training_text.push_back(s.sentence.chars);
  d.features = FeatureExtractor::build(all_text, config.features.extraction);

  if (d.features.uses_ngrams() && config.features.pretrain) {
    SkipGramOptions sg = config.features.skipgram;
    sg.dim = config.model.ngram_dim;
    sg.seed = derive_seed(config.seed, 0x534b4950ULL);
    const auto& text = config.features.pretrain_training_only ? training_text : all_text;
    auto result = train_skipgram(d.features.ngram_sequences(text), d.features.ngrams().size(), sg);
    d.ngram_table = std::move(result.table);
  }
  return d;
}

std::map<int, TagSeq> GoldOracle::label(int, const std::vector<int>& ids) {
  std::map<int, TagSeq> out;
  for (int id : ids) {
    auto it = data_.training_by_id.find(id);
    if (it == data_.training_by_id.end()) {
      throw ContractError("gold oracle: sentence " + std::to_string(id) + " is not in training");
    }
    out[id] = it->second->tags;
  }
  return out;
}

std::map<int, TagSeq> HumanOracle::label(int iteration, const std::vector<int>& ids) {
  std::vector<Sentence> sentences;
  for (int id : ids) sentences.push_back(data_.training_by_id.at(id)->sentence);
  auto tasks = queue_.enqueue(iteration, sentences);
  spdlog::info("iteration {}: {} sentences queued for annotation", iteration, tasks.size());
  const auto deadline = AnnotationQueue::Clock::now() +
                        std::chrono::duration_cast<AnnotationQueue::Clock::duration>(
                            std::chrono::duration<double>(deadline_seconds_));
  auto labels = queue_.wait_for(tasks, deadline);
  queue_.cancel(tasks);
  if (labels.size() < ids.size()) {
    spdlog::warn("iteration {}: {} of {} labels arrived before the deadline", iteration,
                 labels.size(), ids.size());
  }
  return labels;
}

void RunMonitor::publish(const ALState& state, std::string phase) {
  json curves = json::array();
  for (const auto& r : state.history) {
    curves.push_back({{"iteration", r.iteration},
                      {"train_size", r.train_size},
                      {"test_nll", r.test_nll},
                      {"test_f1", r.test_f1},
                      {"seconds", r.seconds}});
  }
  json status = {{"iteration", state.iteration()},
                 {"phase", std::move(phase)},
                 {"labeled", state.labeled.size()},
                 {"unlabeled", state.unlabeled.size()},
                 {"querying", state.pending.size()},
                 {"best_iteration", state.best_iteration},
                 {"test_f1", state.history.empty() ? json(nullptr)
                                                   : json(state.history.back().test_f1)}};
  std::lock_guard lock(mu_);
  status_ = std::move(status);
  curves_ = std::move(curves);
}

json RunMonitor::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

json RunMonitor::curves() const {
  std::lock_guard lock(mu_);
  return curves_;
}

ActiveLearningRun::ActiveLearningRun(const RunConfig& config, fs::path dir)
    : ActiveLearningRun(config, std::move(dir), load_corpus(config)) {}

ActiveLearningRun::ActiveLearningRun(const RunConfig& config, fs::path dir,
                                     std::vector<LabeledSentence> corpus)
    : config_(config), dir_(std::move(dir)) {
  validate(config_);
  if (fs::exists(dir_ / kConfigFile)) {
    RunConfig stored = load_config(dir_ / kConfigFile);
    if (comparable(to_json(stored)) != comparable(to_json(config_))) {
      throw ConfigError(dir_.string() + " holds a run with a different configuration");
    }
  }
  // Built in memory first so that a bad corpus never leaves a half-made directory.
  data_ = prepare_data(config_, std::move(corpus));
  if (fs::exists(dir_ / kConfigFile)) {
    resume();
  } else {
    initialise();
  }
}

std::vector<int> ActiveLearningRun::initial_training_ids() const {
  std::vector<int> ids;
  for (const auto& s : data_.split.training) ids.push_back(s.sentence.id);
  return ids;
}

void ActiveLearningRun::initialise() {
  if (fs::exists(dir_) && !fs::is_empty(dir_)) {
    throw ConfigError(dir_.string() + " exists and is not a run directory");
  }
  // Everything is staged in a sibling directory and renamed into place, so a
  // failure never leaves a partial run behind.
  fs::path final_dir = dir_;
  fs::path staging = final_dir;
  staging += ".staging";
  fs::remove_all(staging);
  dir_ = staging;
  try {
    fs::create_directories(dir_ / "checkpoints");
    fs::create_directories(dir_ / "selections");
    data_.features.chars().save(dir_ / "vocab.chars.txt");
    if (data_.features.uses_ngrams()) data_.features.ngrams().save(dir_ / "vocab.ngrams.txt");
    if (data_.ngram_table) save_embeddings(dir_ / "ngram_embeddings.txt", *data_.ngram_table);
    json split = {{"labeled", data_.split.labeled},
                  {"unlabeled", data_.split.unlabeled},
                  {"testing", json::array()},
                  {"validation", json::array()}};
    for (const auto& s : data_.split.testing) split["testing"].push_back(s.sentence.id);
    for (const auto& s : data_.split.validation) split["validation"].push_back(s.sentence.id);
    write_file_atomic(dir_ / "split.json", split.dump() + "\n");
    state_ = ALState{};
    state_.labeled = data_.split.labeled;
    state_.unlabeled = data_.split.unlabeled;
    persist_state();
    save_config(dir_ / kConfigFile, config_);
    if (fs::exists(final_dir)) fs::remove(final_dir);
    if (final_dir.has_parent_path()) fs::create_directories(final_dir.parent_path());
    fs::rename(staging, final_dir);
  } catch (...) {
    dir_ = final_dir;
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  dir_ = final_dir;
}

void ActiveLearningRun::resume() {
  state_ = state_from_json(json::parse(read_file(dir_ / kStateFile)));
  check_bookkeeping(state_, initial_training_ids());
  if (state_.iteration() >= 0) current_ = load_model(checkpoint_path(state_.iteration()));
  spdlog::info("resuming {} at iteration {}", dir_.string(), state_.iteration());
}

void ActiveLearningRun::persist_state() const {
  write_file_atomic(dir_ / kStateFile, state_to_json(state_).dump(1) + "\n");
}

void ActiveLearningRun::write_metrics() const {
  std::string csv = "iteration,train_size,test_nll,test_f1,seconds\n";
  for (const auto& r : state_.history) {
    csv += fmt::format("{},{},{:.10g},{:.10g},{:.3f}\n", r.iteration, r.train_size, r.test_nll,
                       r.test_f1, r.seconds);
  }
  write_file_atomic(dir_ / "metrics.csv", csv);
}

fs::path ActiveLearningRun::checkpoint_path(int iteration) const {
  return dir_ / "checkpoints" / (iter_name(iteration) + ".ckpt");
}

std::unique_ptr<JointModel> ActiveLearningRun::make_model(std::uint64_t seed) const {
  auto m = std::make_unique<JointModel>(config_.model, data_.features.chars().size(),
                                        data_.features.ngrams().size(),
                                        data_.features.uses_ngrams(), seed);
  if (data_.ngram_table) m->set_ngram_embeddings(*data_.ngram_table);
  return m;
}

std::unique_ptr<JointModel> ActiveLearningRun::load_model(const fs::path& checkpoint) const {
  auto m = make_model(0);
  load_checkpoint(checkpoint, m->params());
  return m;
}

std::unique_ptr<JointModel> ActiveLearningRun::best_model() const {
  if (state_.best_iteration < 0) throw ContractError("no model has been trained yet");
  return load_model(dir_ / "best.ckpt");
}

std::vector<LabeledSentence> ActiveLearningRun::labeled_sentences() const {
  std::vector<LabeledSentence> out;
  out.reserve(state_.labeled.size());
  for (int id : state_.labeled) {
    LabeledSentence s = *data_.training_by_id.at(id);
    if (auto it = state_.oracle_labels.find(id); it != state_.oracle_labels.end()) s.tags = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

std::unique_ptr<JointModel> ActiveLearningRun::train_iteration(int iteration,
                                                               IterationRecord& record) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = derive_seed(config_.seed, static_cast<std::uint64_t>(iteration));
  std::unique_ptr<JointModel> model;
  if (config_.train.warm_start && current_) {
    model = load_model(checkpoint_path(iteration - 1));
  } else {
    model = make_model(seed);
  }
  auto train = make_examples(data_.features, labeled_sentences());
  auto validation = make_examples(data_.features, data_.split.validation);
  train_joint(*model, train, config_.train_options(seed), &validation);
  auto ev = evaluate(*model, make_examples(data_.features, data_.split.testing),
                     config_.execution);
  record.iteration = iteration;
  record.train_size = static_cast<int>(train.size());
  record.test_nll = ev.mean_nll;
  record.test_f1 = ev.seg.f1;
  record.head_loss = ev.head_loss;
  record.seconds = elapsed_seconds(start);
  spdlog::info("iteration {}: train {} test nll {:.4f} f1 {:.4f} ({:.1f}s)", iteration,
               record.train_size, record.test_nll, record.test_f1, record.seconds);
  return model;
}

void ActiveLearningRun::record_iteration(const IterationRecord& record,
                                         std::unique_ptr<JointModel> model, RunMonitor* monitor) {
  const int i = record.iteration;
  save_checkpoint(checkpoint_path(i), model->params());
  if (record.test_nll < state_.best_loss) {
    state_.best_loss = record.test_nll;
    state_.best_iteration = i;
    save_checkpoint(dir_ / "best.ckpt", model->params());
  }
  state_.history.push_back(record);
  current_ = std::move(model);
  write_metrics();
  persist_state();
  if (monitor) monitor->publish(state_, "trained");
}

void ActiveLearningRun::train_initial(RunMonitor* monitor) {
  if (!state_.history.empty()) return;
  if (monitor) monitor->publish(state_, "training");
  IterationRecord r;
  auto model = train_iteration(0, r);
  // The initial model also labels the pool; kept for inspection only.
  std::string lines;
  for (int id : state_.unlabeled) {
    LabeledSentence s = *data_.training_by_id.at(id);
    s.tags = model->analyze(data_.features.extract(s.sentence.chars)).seg.viterbi_tags;
    lines += format_labeled_line(s) + "\n";
  }
  write_file_atomic(dir_ / "pool_predictions_iter_00.txt", lines);
  record_iteration(r, std::move(model), monitor);
}

RunStatus ActiveLearningRun::run(Oracle& oracle, RunMonitor* monitor) {
  auto publish = [&](const char* phase) {
    if (monitor) monitor->publish(state_, phase);
  };
  publish("starting");
  train_initial(monitor);

  while (state_.iteration() < config_.loop.iterations) {
    const int i = state_.iteration() + 1;
    if (state_.pending.empty()) {
      if (state_.unlabeled.empty()) {
        state_.exhausted = true;
        persist_state();
        publish("exhausted");
        spdlog::info("pool exhausted after iteration {}", i - 1);
        return RunStatus::kExhausted;
      }
      publish("scoring");
      std::vector<PoolSentence> pool;
      pool.reserve(state_.unlabeled.size());
      for (int id : state_.unlabeled) {
        pool.push_back({id, data_.features.extract(data_.training_by_id.at(id)->sentence.chars)});
      }
      auto scores = score_pool(*current_, pool, config_.strategy, config_.execution);
      auto selected = select_top_n(scores, config_.loop.n);
      std::map<int, const StrategyScore*> by_id;
      for (const auto& s : scores) by_id[s.sentence_id] = &s;
      std::vector<StrategyScore> chosen;
      for (int id : selected) chosen.push_back(*by_id.at(id));
      write_file_atomic(dir_ / "selections" / (iter_name(i) + ".csv"),
                        format_score_dump(chosen, config_.strategy.kind));
      std::set<int> picked(selected.begin(), selected.end());
      std::erase_if(state_.unlabeled, [&](int id) { return picked.contains(id); });
      state_.pending = selected;
      persist_state();
    }

    publish("labeling");
    auto labels = oracle.label(i, state_.pending);
    if (labels.empty()) {
      persist_state();
      publish("suspended");
      spdlog::warn("iteration {}: no labels arrived; run suspended", i);
      return RunStatus::kSuspended;
    }
    IterationRecord record;
    record.requested = static_cast<int>(state_.pending.size());
    record.received = static_cast<int>(labels.size());
    for (int id : state_.pending) {
      auto it = labels.find(id);
      if (it == labels.end()) {
        state_.unlabeled.push_back(id);
        continue;
      }
      const auto& chars = data_.training_by_id.at(id)->sentence.chars;
      if (it->second.size() != chars.size() || !is_valid_tag_seq(it->second)) {
        throw ContractError("oracle returned invalid tags for sentence " + std::to_string(id));
      }
      state_.oracle_labels[id] = it->second;
      state_.labeled.push_back(id);
    }
    std::sort(state_.unlabeled.begin(), state_.unlabeled.end());
    state_.pending.clear();
    check_bookkeeping(state_, initial_training_ids());
    persist_state();

    publish("training");
    auto model = train_iteration(i, record);
    record_iteration(record, std::move(model), monitor);
  }
  publish("completed");
  return RunStatus::kCompleted;
}

LoadedRun load_run(const fs::path& dir, const std::string& checkpoint) {
  if (!fs::exists(dir / kConfigFile)) throw ConfigError(dir.string() + " is not a run directory");
  LoadedRun r;
  r.config = load_config(dir / kConfigFile);
  const int order = r.config.features.extraction.ngram_order;
  Vocab ngrams;
  if (order > 0) ngrams = Vocab::load(dir / "vocab.ngrams.txt");
  r.features = FeatureExtractor(Vocab::load(dir / "vocab.chars.txt"), std::move(ngrams), order);
  r.model = std::make_unique<JointModel>(r.config.model, r.features.chars().size(),
                                         r.features.ngrams().size(), r.features.uses_ngrams(), 0);
  load_checkpoint(dir / checkpoint, r.model->params());
  const json split = json::parse(read_file(dir / "split.json"));
  r.testing_ids = split.at("testing").get<std::vector<int>>();
  return r;
}

std::vector<CurvePoint> compare_strategies(const RunConfig& config,
                                           const std::vector<StrategyKind>& strategies,
                                           int seeds, const fs::path& root) {
  if (strategies.empty() || seeds < 1) throw ConfigError("compare: need strategies and seeds >= 1");
  auto corpus = load_corpus(config);
  std::vector<CurvePoint> points;
  for (auto kind : strategies) {
    for (int k = 0; k < seeds; ++k) {
      RunConfig c = config;
      c.strategy.kind = kind;
      c.seed = config.seed + static_cast<std::uint64_t>(k);
      c.strategy.seed = c.seed;
      const auto dir = root / std::string(strategy_name(kind)) / fmt::format("seed_{}", k);
      ActiveLearningRun run(c, dir, corpus);
      GoldOracle oracle(run.data());
      run.run(oracle);
      for (const auto& r : run.state().history) {
        points.push_back({std::string(strategy_name(kind)), k, r.iteration, r.train_size,
                          r.test_f1, r.test_nll});
      }
    }
  }
  write_file_atomic(root / "curves.csv", format_curves(points));
  write_file_atomic(root / "curves_summary.csv", format_curve_summary(points));
  return points;
}

std::vector<CurvePoint> collect_curves(const fs::path& root) {
  std::vector<CurvePoint> points;
  if (!fs::is_directory(root)) throw ConfigError(root.string() + " is not a directory");
  std::vector<fs::path> metrics;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "metrics.csv") metrics.push_back(e.path());
  }
  std::sort(metrics.begin(), metrics.end());
  for (const auto& path : metrics) {
    const fs::path run_dir = path.parent_path();
    std::string strategy = "?";
    if (fs::exists(run_dir / kConfigFile)) {
      strategy = std::string(strategy_name(load_config(run_dir / kConfigFile).strategy.kind));
    }
    int seed = 0;
    const std::string leaf = run_dir.filename().string();
    if (leaf.rfind("seed_", 0) == 0) seed = std::stoi(leaf.substr(5));
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      CurvePoint p;
      p.strategy = strategy;
      p.seed = seed;
      char comma;
      std::istringstream row(line);
      double seconds;
      if (!(row >> p.iteration >> comma >> p.train_size >> comma >> p.test_nll >> comma >> p.f1 >>
            comma >> seconds)) {
        throw FormatError(path.string() + ": bad metrics row '" + line + "'");
      }
      points.push_back(p);
    }
  }
  return points;
}

std::string format_curves(const std::vector<CurvePoint>& points) {
  std::string out = "strategy,seed,iteration,train_size,f1\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{},{},{:.10g}\n", p.strategy, p.seed, p.iteration, p.train_size, p.f1);
  }
  return out;
}

std::string format_curve_summary(const std::vector<CurvePoint>& points) {
  struct Acc {
    double sum = 0, lo = INFINITY, hi = -INFINITY;
    int n = 0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  std::vector<std::string> order;
  for (const auto& p : points) {
    if (std::find(order.begin(), order.end(), p.strategy) == order.end()) order.push_back(p.strategy);
    auto& a = acc[{p.strategy, p.iteration}];
    a.sum += p.f1;
    a.lo = std::min(a.lo, p.f1);
    a.hi = std::max(a.hi, p.f1);
    ++a.n;
  }
  std::string out = "strategy,iteration,mean_f1,min_f1,max_f1,seeds\n";
  for (const auto& s : order) {
    for (const auto& [key, a] : acc) {
      if (key.first != s) continue;
      out += fmt::format("{},{},{:.10g},{:.10g},{:.10g},{}\n", s, key.second, a.sum / a.n, a.lo,
                         a.hi, a.n);
    }
  }
  return out;
}

std::string format_curves_long(const std::vector<CurvePoint>& points) {
  std::string out = "strategy,seed,iteration,train_size,metric,value\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{},{},f1,{:.10g}\n", p.strategy, p.seed, p.iteration, p.train_size,
                       p.f1);
    out += fmt::format("{},{},{},{},test_nll,{:.10g}\n", p.strategy, p.seed, p.iteration,
                       p.train_size, p.test_nll);
  }
  return out;
}

}  // namespace alseg
