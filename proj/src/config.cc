#include "alseg/config.h"

#include <cmath>
#include <set>

#include "alseg/errors.h"
#include "alseg/io.h"

namespace alseg {

using nlohmann::json;

int RunConfig::epochs() const {
  if (train.epochs) return *train.epochs;
  return features.extraction.ngram_order > 0 ? 30 : 50;
}

TrainOptions RunConfig::train_options(std::uint64_t run_seed) const {
  TrainOptions o;
  o.epochs = epochs();
  o.batch_size = train.batch_size;
  o.adam = train.adam;
  o.lambda = train.lambda;
  o.train_head = train.train_head;
  o.freeze_encoder_for_head = train.freeze_encoder_for_head;
  o.patience = train.patience;
  o.seed = run_seed;
  o.execution = execution;
  return o;
}

std::string_view oracle_name(OracleKind kind) {
  return kind == OracleKind::kGold ? "gold" : "human";
}

OracleKind parse_oracle(std::string_view name) {
  if (name == "gold") return OracleKind::kGold;
  if (name == "human") return OracleKind::kHuman;
  throw ConfigError("unknown oracle '" + std::string(name) + "' (expected gold or human)");
}

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace

void validate(const RunConfig& c) {
  const auto& r = c.split.ratios;
  require(r.train > 0 && r.test > 0 && r.validation >= 0, "split.ratios", "must be positive");
  require(std::abs(r.train + r.test + r.validation - 1.0) < 1e-9, "split.ratios",
          "must sum to 1");
  require(c.split.labeled_fraction > 0 && c.split.labeled_fraction < 1, "split.labeled_fraction",
          "must lie in (0, 1)");
  require(c.corpus.max_length >= 1, "corpus.max_length", "must be >= 1");
  const int order = c.features.extraction.ngram_order;
  require(order == 0 || (order >= 2 && order <= 4), "features.ngram_order",
          "must be 0 (off), 2, 3 or 4");
  require(c.features.extraction.char_min_frequency >= 1, "features.char_min_frequency", ">= 1");
  require(c.features.extraction.ngram_min_frequency >= 1, "features.ngram_min_frequency", ">= 1");
  const auto& sg = c.features.skipgram;
  require(sg.window >= 1 && sg.negatives >= 0 && sg.epochs >= 1 && sg.lr > 0,
          "features.skipgram", "window >= 1, negatives >= 0, epochs >= 1, lr > 0");
  const auto& m = c.model;
  require(m.char_dim >= 1, "model.char_dim", ">= 1");
  require(m.ngram_dim >= 1, "model.ngram_dim", ">= 1");
  require(m.hidden >= 1, "model.hidden", ">= 1");
  require(m.attention_dim >= 1, "model.attention_dim", ">= 1");
  require(m.dropout >= 0 && m.dropout < 1, "model.dropout", "must lie in [0, 1)");
  require(c.epochs() >= 1, "train.epochs", ">= 1");
  require(c.train.batch_size >= 1, "train.batch_size", ">= 1");
  require(c.train.adam.lr > 0, "train.lr", "> 0");
  require(c.train.lambda >= 0, "train.lambda", ">= 0");
  require(c.train.patience >= 0, "train.patience", ">= 0");
  try {
    validate(c.strategy, c.train.train_head);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("strategy: ") + e.what());
  }
  require(c.loop.iterations >= 1, "loop.iterations", ">= 1");
  require(c.loop.n >= 1, "loop.n", ">= 1");
  require(c.oracle.deadline_seconds > 0, "oracle.deadline_seconds", "> 0");
  require(c.oracle.lease_seconds > 0, "oracle.lease_seconds", "> 0");
  require(c.service.port >= 0 && c.service.port <= 65535, "service.port", "out of range");
  require(c.threads >= 0, "threads", ">= 0");
}

json to_json(const RunConfig& c) {
  json j;
  j["corpus"] = {{"path", c.corpus.path}, {"max_length", c.corpus.max_length}};
  j["split"] = {{"train", c.split.ratios.train},
                {"test", c.split.ratios.test},
                {"validation", c.split.ratios.validation},
                {"labeled_fraction", c.split.labeled_fraction},
                {"seed", c.split.seed}};
  const auto& f = c.features;
  j["features"] = {{"ngram_order", f.extraction.ngram_order},
                   {"char_min_frequency", f.extraction.char_min_frequency},
                   {"ngram_min_frequency", f.extraction.ngram_min_frequency},
                   {"pretrain", f.pretrain},
                   {"pretrain_training_only", f.pretrain_training_only},
                   {"skipgram",
                    {{"window", f.skipgram.window},
                     {"negatives", f.skipgram.negatives},
                     {"epochs", f.skipgram.epochs},
                     {"lr", f.skipgram.lr}}}};
  j["model"] = {{"char_dim", c.model.char_dim},
                {"ngram_dim", c.model.ngram_dim},
                {"hidden", c.model.hidden},
                {"dropout", c.model.dropout},
                {"attention_dim", c.model.attention_dim}};
  j["train"] = {{"epochs", c.train.epochs ? json(*c.train.epochs) : json(nullptr)},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.adam.lr},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"eps", c.train.adam.eps},
                {"clip_norm", c.train.adam.clip_norm},
                {"lambda", c.train.lambda},
                {"train_head", c.train.train_head},
                {"freeze_encoder_for_head", c.train.freeze_encoder_for_head},
                {"patience", c.train.patience},
                {"warm_start", c.train.warm_start}};
  j["strategy"] = {{"kind", std::string(strategy_name(c.strategy.kind))},
                   {"alpha", c.strategy.alpha},
                   {"beta", c.strategy.beta}};
  j["loop"] = {{"iterations", c.loop.iterations}, {"n", c.loop.n}};
  j["oracle"] = {{"kind", std::string(oracle_name(c.oracle.kind))},
                 {"deadline_seconds", c.oracle.deadline_seconds},
                 {"lease_seconds", c.oracle.lease_seconds}};
  j["service"] = {{"host", c.service.host}, {"port", c.service.port}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["execution"] = c.execution == Execution::kSerial ? "serial" : "parallel";
  return j;
}

namespace {

// Reads keys of one JSON object, remembering which were consumed so that
// leftovers (typos) can be reported.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(prefix_ + key + ": wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    T value{};
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    get(key, value);
    out = value;
  }

  Reader child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Reader(it == j_.end() ? empty : *it, prefix_ + key + ".");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError("unknown config key " + prefix_ + it.key());
    }
  }

 private:
  std::string where() const { return prefix_.empty() ? "" : prefix_ + " "; }
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader root(j, "");
  {
    auto r = root.child("corpus");
    r.get("path", c.corpus.path);
    r.get("max_length", c.corpus.max_length);
    r.finish();
  }
  {
    auto r = root.child("split");
    r.get("train", c.split.ratios.train);
    r.get("test", c.split.ratios.test);
    r.get("validation", c.split.ratios.validation);
    r.get("labeled_fraction", c.split.labeled_fraction);
    r.get("seed", c.split.seed);
    r.finish();
  }
  {
    auto r = root.child("features");
    r.get("ngram_order", c.features.extraction.ngram_order);
    r.get("char_min_frequency", c.features.extraction.char_min_frequency);
    r.get("ngram_min_frequency", c.features.extraction.ngram_min_frequency);
    r.get("pretrain", c.features.pretrain);
    r.get("pretrain_training_only", c.features.pretrain_training_only);
    auto s = r.child("skipgram");
    s.get("window", c.features.skipgram.window);
    s.get("negatives", c.features.skipgram.negatives);
    s.get("epochs", c.features.skipgram.epochs);
    s.get("lr", c.features.skipgram.lr);
    s.finish();
    r.finish();
  }
  {
    auto r = root.child("model");
    r.get("char_dim", c.model.char_dim);
    r.get("ngram_dim", c.model.ngram_dim);
    r.get("hidden", c.model.hidden);
    r.get("dropout", c.model.dropout);
    r.get("attention_dim", c.model.attention_dim);
    r.finish();
  }
  {
    auto r = root.child("train");
    r.get("epochs", c.train.epochs);
    r.get("batch_size", c.train.batch_size);
    r.get("lr", c.train.adam.lr);
    r.get("beta1", c.train.adam.beta1);
    r.get("beta2", c.train.adam.beta2);
    r.get("eps", c.train.adam.eps);
    r.get("clip_norm", c.train.adam.clip_norm);
    r.get("lambda", c.train.lambda);
    r.get("train_head", c.train.train_head);
    r.get("freeze_encoder_for_head", c.train.freeze_encoder_for_head);
    r.get("patience", c.train.patience);
    r.get("warm_start", c.train.warm_start);
    r.finish();
  }
  {
    auto r = root.child("strategy");
    std::string kind(strategy_name(c.strategy.kind));
    r.get("kind", kind);
    c.strategy.kind = parse_strategy(kind);
    r.get("alpha", c.strategy.alpha);
    r.get("beta", c.strategy.beta);
    r.finish();
  }
  {
    auto r = root.child("loop");
    r.get("iterations", c.loop.iterations);
    r.get("n", c.loop.n);
    r.finish();
  }
  {
    auto r = root.child("oracle");
    std::string kind(oracle_name(c.oracle.kind));
    r.get("kind", kind);
    c.oracle.kind = parse_oracle(kind);
    r.get("deadline_seconds", c.oracle.deadline_seconds);
    r.get("lease_seconds", c.oracle.lease_seconds);
    r.finish();
  }
  {
    auto r = root.child("service");
    r.get("host", c.service.host);
    r.get("port", c.service.port);
    r.finish();
  }
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  std::string exec = "parallel";
  root.get("execution", exec);
  if (exec == "serial") {
    c.execution = Execution::kSerial;
  } else if (exec == "parallel") {
    c.execution = Execution::kParallel;
  } else {
    throw ConfigError("execution: expected serial or parallel");
  }
  root.finish();
  c.strategy.seed = c.seed;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  write_file_atomic(path, to_json(config).dump(2) + "\n");
}

}  // namespace alseg
