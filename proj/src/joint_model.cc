#include "alseg/joint_model.h"

#include "alseg/errors.h"
#include "alseg/ops.h"

namespace alseg {

namespace {

Matrix lstm_bias(int hidden) {
  Matrix b = Matrix::Zero(1, 4 * hidden);
  // Forget gate block first.
  b.leftCols(hidden).setConstant(1.0);
  return b;
}

}  // namespace

JointModel::JointModel(const ModelConfig& config, int char_vocab, int ngram_vocab,
                       bool use_ngrams, std::uint64_t seed)
    : config_(config), use_ngrams_(use_ngrams) {
  if (config.char_dim < 1 || config.hidden < 1 || config.attention_dim < 1 ||
      (use_ngrams && config.ngram_dim < 1)) {
    throw ConfigError("model dimensions must be positive");
  }
  if (config.dropout < 0 || config.dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  Rng rng(derive_seed(seed, 0x4d4f44454cULL));
  const int h = config.hidden;
  const int d_in = input_dim();
  const int d_enc = 2 * h;

  char_emb_ = params_.add("embeddings.char", init::embedding(char_vocab, config.char_dim, rng),
                          true);
  if (use_ngrams_) {
    ngram_emb_ = params_.add("embeddings.ngram",
                             init::embedding(ngram_vocab, config.ngram_dim, rng), true);
  }
  // Xavier bounds use the per-gate fan-out.
  auto gate_matrix = [&](int fan_in) {
    Matrix m(fan_in, 4 * h);
    for (int g = 0; g < 4; ++g) m.middleCols(g * h, h) = init::xavier(fan_in, h, rng);
    return m;
  };
  fwd_W_ = params_.add("bilstm.fwd.W", gate_matrix(d_in));
  fwd_U_ = params_.add("bilstm.fwd.U", gate_matrix(h));
  fwd_b_ = params_.add("bilstm.fwd.b", lstm_bias(h));
  bwd_W_ = params_.add("bilstm.bwd.W", gate_matrix(d_in));
  bwd_U_ = params_.add("bilstm.bwd.U", gate_matrix(h));
  bwd_b_ = params_.add("bilstm.bwd.b", lstm_bias(h));
  emit_W_ = params_.add("crf.emission.W", init::xavier(d_enc, kNumTags, rng));
  emit_b_ = params_.add("crf.emission.b", Matrix::Zero(1, kNumTags));
  trans_ = params_.add("crf.transitions", Matrix::Zero(crf::kStates, crf::kStates));
  const int dk = config.attention_dim;
  q_ = params_.add("loss_head.q", init::xavier(d_enc, dk, rng));
  k_ = params_.add("loss_head.k", init::xavier(d_enc, dk, rng));
  v_ = params_.add("loss_head.v", init::xavier(d_enc, dk, rng));
  out_w_ = params_.add("loss_head.out.w", init::xavier(dk, 1, rng));
  out_b_ = params_.add("loss_head.out.b", Matrix::Zero(1, 1));
}

void JointModel::set_ngram_embeddings(const Matrix& table) {
  if (!use_ngrams_) throw ConfigError("model has no n-gram embeddings");
  Matrix& dst = params_[static_cast<std::size_t>(ngram_emb_)].tensor.value();
  if (table.rows() != dst.rows() || table.cols() != dst.cols()) {
    throw ContractError("pretrained n-gram table is " + std::to_string(table.rows()) + "x" +
                        std::to_string(table.cols()) + ", model expects " +
                        std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));
  }
  dst = table;
  dst.row(0).setZero();
}

Var JointModel::bind(Tape& tape, int index, Gradients* sink) const {
  const auto i = static_cast<std::size_t>(index);
  return tape.leaf(params_[i].tensor.value(), sink ? &sink->grads[i] : nullptr);
}

LstmVars JointModel::lstm_vars(Tape& tape, bool forward_dir, Gradients* sink) const {
  if (forward_dir) return {bind(tape, fwd_W_, sink), bind(tape, fwd_U_, sink), bind(tape, fwd_b_, sink)};
  return {bind(tape, bwd_W_, sink), bind(tape, bwd_U_, sink), bind(tape, bwd_b_, sink)};
}

CrfVars JointModel::crf_vars(Tape& tape, Gradients* sink) const {
  return {bind(tape, emit_W_, sink), bind(tape, emit_b_, sink), bind(tape, trans_, sink)};
}

AttentionVars JointModel::attention_vars(Tape& tape, Gradients* sink) const {
  return {bind(tape, q_, sink), bind(tape, k_, sink), bind(tape, v_, sink),
          bind(tape, out_w_, sink), bind(tape, out_b_, sink)};
}

JointModel::Graph JointModel::forward(Tape& tape, const SentenceFeatures& features,
                                      Gradients* sink, bool train, Rng& rng, bool with_head,
                                      bool detach_head_input) const {
  if (features.length() < 1) throw ContractError("forward: empty sentence");
  auto table_ref = [&](int index) {
    const auto i = static_cast<std::size_t>(index);
    return EmbeddingRef{&params_[i].tensor.value(), sink ? &sink->grads[i] : nullptr};
  };
  EmbeddingRef ngrams;
  if (use_ngrams_) ngrams = table_ref(ngram_emb_);
  Var x = embed(tape, features, table_ref(char_emb_), ngrams);
  BiLstmVars bilstm{lstm_vars(tape, true, sink), lstm_vars(tape, false, sink)};
  Graph g;
  g.H = encode(x, bilstm, config_.dropout, train, rng);
  CrfVars crf = crf_vars(tape, sink);
  g.emissions = emission_scores(g.H, crf);
  g.transitions = crf.transitions;
  if (with_head) {
    Var head_in = detach_head_input ? ops::stop_gradient(g.H) : g.H;
    g.predicted_loss = predict_loss(head_in, attention_vars(tape, sink));
  }
  return g;
}

JointModel::Analysis JointModel::analyze(const SentenceFeatures& features,
                                         const TagSeq* gold) const {
  Tape tape;
  Rng unused(0);
  Graph g = forward(tape, features, nullptr, false, unused, true);
  Analysis a;
  a.seg = analyze_emissions(g.emissions.value(), g.transitions.value(), gold);
  a.predicted_loss = g.predicted_loss->scalar();
  return a;
}

}  // namespace alseg
