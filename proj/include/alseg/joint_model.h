#pragma once

#include <cstdint>
#include <optional>

#include "alseg/features.h"
#include "alseg/loss_head.h"
#include "alseg/params.h"
#include "alseg/segmenter.h"

namespace alseg {

struct ModelConfig {
  int char_dim = 128;
  int ngram_dim = 128;
  int hidden = 256;  // per direction; the encoder output is 2 * hidden wide
  double dropout = 0.2;
  int attention_dim = 64;
};

// BiLSTM-CRF segmenter plus the self-attention loss head, sharing the
// embeddings and encoder. Parameter groups (checkpoint names):
//   embeddings.{char,ngram}, bilstm.{fwd,bwd}.{W,U,b},
//   crf.emission.{W,b}, crf.transitions, loss_head.{q,k,v,out.w,out.b}
class JointModel {
 public:
  JointModel(const ModelConfig& config, int char_vocab, int ngram_vocab, bool use_ngrams,
             std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  bool uses_ngrams() const { return use_ngrams_; }
  int input_dim() const { return config_.char_dim + (use_ngrams_ ? config_.ngram_dim : 0); }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Copies pretrained n-gram vectors into the n-gram table (PAD row stays 0).
  void set_ngram_embeddings(const Matrix& table);

  struct Graph {
    Var H;
    Var emissions;
    Var transitions;
    std::optional<Var> predicted_loss;
  };

  // Builds the forward graph for one sentence. With a sink, parameter leaves
  // accumulate their gradients into it. `detach_head_input` stops the head's
  // gradient at the encoder output.
  Graph forward(Tape& tape, const SentenceFeatures& features, Gradients* sink, bool train,
                Rng& rng, bool with_head = true, bool detach_head_input = false) const;

  struct Analysis {
    SegOutput seg;
    double predicted_loss = 0.0;
  };

  // Inference (dropout off). NLL is filled in when `gold` is given.
  Analysis analyze(const SentenceFeatures& features, const TagSeq* gold = nullptr) const;

  LstmVars lstm_vars(Tape& tape, bool forward_dir, Gradients* sink) const;
  CrfVars crf_vars(Tape& tape, Gradients* sink) const;
  AttentionVars attention_vars(Tape& tape, Gradients* sink) const;

 private:
  Var bind(Tape& tape, int index, Gradients* sink) const;

  ModelConfig config_;
  bool use_ngrams_ = false;
  ParameterSet params_;
  int char_emb_ = -1, ngram_emb_ = -1;
  int fwd_W_ = -1, fwd_U_ = -1, fwd_b_ = -1;
  int bwd_W_ = -1, bwd_U_ = -1, bwd_b_ = -1;
  int emit_W_ = -1, emit_b_ = -1, trans_ = -1;
  int q_ = -1, k_ = -1, v_ = -1, out_w_ = -1, out_b_ = -1;
};

}  // namespace alseg
