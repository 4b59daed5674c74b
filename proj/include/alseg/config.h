#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "alseg/corpus.h"
#include "alseg/features.h"
#include "alseg/joint_model.h"
#include "alseg/skipgram.h"
#include "alseg/strategies.h"
#include "alseg/trainer.h"

namespace alseg {

enum class OracleKind { kGold, kHuman };

// Everything a run needs. Serialised verbatim into the run directory; JSON key
// paths mirror the field names (e.g. "model.hidden", "loop.n").
struct RunConfig {
  struct Corpus {
    std::string path;
    int max_length = kDefaultMaxLength;
  } corpus;

  struct Split {
    SplitRatios ratios;
    double labeled_fraction = 0.3;
    std::uint64_t seed = 1;
  } split;

  struct Features {
    FeatureConfig extraction;
    bool pretrain = true;
    // Restrict skip-gram text to the training split.
    bool pretrain_training_only = false;
    SkipGramOptions skipgram;  // dim is taken from model.ngram_dim
  } features;

  ModelConfig model;

  struct Train {
    std::optional<int> epochs;  // default: 30 with n-grams, 50 without
    int batch_size = 32;
    AdamOptions adam;
    double lambda = 1.0;
    bool train_head = true;
    bool freeze_encoder_for_head = false;
    int patience = 0;
    // Continue from the previous iteration's weights instead of retraining
    // from scratch. Faster; not the protocol described for the method.
    bool warm_start = false;
  } train;

  StrategyConfig strategy;

  struct Loop {
    int iterations = 10;
    int n = 1000;
  } loop;

  struct Oracle {
    OracleKind kind = OracleKind::kGold;
    double deadline_seconds = 3600.0;
    double lease_seconds = 300.0;
  } oracle;

  struct Service {
    std::string host = "127.0.0.1";
    int port = 8080;
  } service;

  std::uint64_t seed = 1;
  // 0 keeps the OpenMP default.
  int threads = 0;
  Execution execution = Execution::kParallel;

  int epochs() const;
  TrainOptions train_options(std::uint64_t seed) const;
};

// Throws ConfigError naming the offending key.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);

std::string_view oracle_name(OracleKind kind);
OracleKind parse_oracle(std::string_view name);

}  // namespace alseg
