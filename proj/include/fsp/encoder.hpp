#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsp/autograd.hpp"
#include "fsp/corpus.hpp"

namespace fsp {

// Token vocabulary over lowercased surface forms. Id 0 is the unknown
// fallback; known words get ids 1..size-1 in sorted order.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(const std::vector<AnnotatedSentence>& corpus);

  int id(const std::string& token) const;  // 0 when absent
  int size() const { return static_cast<int>(words_.size()) + 1; }

  void save_file(const std::string& path) const;
  static Vocabulary load_file(const std::string& path);

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;  // sorted, unique, lowercased
};

enum class EncoderKind { TinyEmbedding, ExternalContextual };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::TinyEmbedding;
  int word_dim = 64;
  int hidden_size = 200;  // per direction
  int num_layers = 6;
  int max_span_length = 15;
  int width_embedding_dim = 20;
  int mlp_hidden = 150;  // shared by the classifier heads built on top
  double dropout_lstm = 0.4;
  double dropout_mlp = 0.2;
  int external_dim = 0;       // piece-vector dimension, external kind only
  bool freeze_external = false;

  int state_dim() const { return 2 * hidden_size; }
  int span_rep_dim() const { return 3 * state_dim() + width_embedding_dim; }
};

// Supplies per-token word-piece vectors (dim x n_pieces each) for the
// external-contextual kind; tokens are passed with sentence context so a
// provider can be genuinely contextual.
using PieceProvider =
    std::function<std::vector<Eigen::MatrixXd>(const std::vector<std::string>& tokens)>;

/// All spans with 1 <= length <= min(L, n), ordered by (start, end).
std::vector<Span> enumerate_spans(int n, int L);

// Token embedding, highway-gated bidirectional LSTM stack, and attention
// span pooling. Parameters are registered in the store at construction
// under the given name prefix, so checkpoints restore by name.
class Encoder {
 public:
  Encoder(EncoderConfig cfg, int vocab_size, ag::ParameterStore& store, std::mt19937_64& rng,
          const std::string& prefix = "enc");

  const EncoderConfig& config() const { return cfg_; }
  void set_piece_provider(PieceProvider p) { provider_ = std::move(p); }

  /// Token vectors, word_dim x n.
  ag::Var embed(ag::Graph& g, const std::vector<std::string>& tokens, const Vocabulary& vocab) const;
  /// Contextual states, 2*hidden x n.
  ag::Var contextualize(ag::Graph& g, ag::Var X, bool training, std::mt19937_64& rng) const;
  /// Span representations, span_rep_dim x spans.size().
  ag::Var represent_spans(ag::Graph& g, ag::Var H, const std::vector<Span>& spans) const;

  /// embed + contextualize + represent_spans in one call.
  ag::Var encode(ag::Graph& g, const std::vector<std::string>& tokens, const Vocabulary& vocab,
                 const std::vector<Span>& spans, bool training, std::mt19937_64& rng) const;

  /// True for parameters updated at the encoder-adapter learning rate.
  bool is_adapter_param(const std::string& name) const;

 private:
  ag::Var run_direction(ag::Graph& g, ag::Var X, int layer, bool backward_dir) const;

  EncoderConfig cfg_;
  std::string prefix_;
  PieceProvider provider_;

  ag::Parameter* embed_ = nullptr;     // word_dim x vocab_size (tiny kind)
  ag::Parameter* ext_W_ = nullptr;     // word_dim x external_dim (external kind)
  ag::Parameter* ext_b_ = nullptr;
  struct DirParams {
    ag::Parameter* W;  // 4h x in
    ag::Parameter* U;  // 4h x h
    ag::Parameter* b;  // 4h x 1, forget gate bias 1
  };
  struct LayerParams {
    DirParams fw, bw;
    ag::Parameter* hw_Wg;  // 2h x in
    ag::Parameter* hw_bg;
    ag::Parameter* hw_Wp;  // 2h x in
    ag::Parameter* hw_bp;
  };
  std::vector<LayerParams> layers_;
  ag::Parameter* attn_w_ = nullptr;  // 1 x 2h
  ag::Parameter* width_ = nullptr;   // width_dim x L
};

}  // namespace fsp
