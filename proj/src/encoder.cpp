#include "fsp/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace fsp {

namespace {
std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace

Vocabulary Vocabulary::build(const std::vector<AnnotatedSentence>& corpus) {
  std::set<std::string> seen;
  for (const auto& s : corpus)
    for (const auto& t : s.tokens) seen.insert(lowercase(t.text));
  Vocabulary v;
  v.words_.assign(seen.begin(), seen.end());
  return v;
}

int Vocabulary::id(const std::string& token) const {
  const std::string key = lowercase(token);
  auto it = std::lower_bound(words_.begin(), words_.end(), key);
  if (it != words_.end() && *it == key) return static_cast<int>(it - words_.begin()) + 1;
  return 0;
}

void Vocabulary::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
  for (const auto& w : words_) out << w << '\n';
}

Vocabulary Vocabulary::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) v.words_.push_back(line);
  }
  if (!std::is_sorted(v.words_.begin(), v.words_.end()))
    throw std::runtime_error("vocabulary file not sorted: " + path);
  return v;
}

std::vector<Span> enumerate_spans(int n, int L) {
  std::vector<Span> spans;
  for (int s = 0; s < n; ++s)
    for (int e = s; e < n && e - s + 1 <= L; ++e) spans.push_back(Span{s, e});
  return spans;
}

Encoder::Encoder(EncoderConfig cfg, int vocab_size, ag::ParameterStore& store,
                 std::mt19937_64& rng, const std::string& prefix)
    : cfg_(cfg), prefix_(prefix) {
  const int h = cfg_.hidden_size;
  if (cfg_.kind == EncoderKind::TinyEmbedding) {
    embed_ = store.add(prefix_ + "/embed", cfg_.word_dim, vocab_size, ag::Init::Gaussian, rng);
  } else {
    if (cfg_.external_dim <= 0)
      throw std::logic_error("external-contextual encoder requires external_dim > 0");
    ext_W_ = store.add(prefix_ + "/ext_proj_W", cfg_.word_dim, cfg_.external_dim,
                       ag::Init::Glorot, rng);
    ext_b_ = store.add(prefix_ + "/ext_proj_b", cfg_.word_dim, 1, ag::Init::Zero, rng);
  }
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const int in = l == 0 ? cfg_.word_dim : 2 * h;
    const std::string lp = prefix_ + "/l" + std::to_string(l);
    LayerParams layer{};
    for (const char* dname : {"fw", "bw"}) {
      DirParams d{};
      d.W = store.add(lp + "/" + dname + "/W", 4 * h, in, ag::Init::Glorot, rng);
      d.U = store.add(lp + "/" + dname + "/U", 4 * h, h, ag::Init::Glorot, rng);
      ag::Mat b = ag::Mat::Zero(4 * h, 1);
      b.block(h, 0, h, 1).setOnes();  // forget-gate bias
      d.b = store.add(lp + "/" + dname + "/b", std::move(b));
      (dname[0] == 'f' ? layer.fw : layer.bw) = d;
    }
    layer.hw_Wg = store.add(lp + "/hw_Wg", 2 * h, in, ag::Init::Glorot, rng);
    layer.hw_bg = store.add(lp + "/hw_bg", 2 * h, 1, ag::Init::Zero, rng);
    layer.hw_Wp = store.add(lp + "/hw_Wp", 2 * h, in, ag::Init::Glorot, rng);
    layer.hw_bp = store.add(lp + "/hw_bp", 2 * h, 1, ag::Init::Zero, rng);
    layers_.push_back(layer);
  }
  attn_w_ = store.add(prefix_ + "/attn_w", 1, 2 * h, ag::Init::Glorot, rng);
  width_ = store.add(prefix_ + "/width", cfg_.width_embedding_dim, cfg_.max_span_length,
                     ag::Init::Gaussian, rng);
}

bool Encoder::is_adapter_param(const std::string& name) const {
  return name.rfind(prefix_ + "/ext_proj", 0) == 0;
}

ag::Var Encoder::embed(ag::Graph& g, const std::vector<std::string>& tokens,
                       const Vocabulary& vocab) const {
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw std::logic_error("embed: empty sentence");
  if (cfg_.kind == EncoderKind::TinyEmbedding) {
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
    return ag::cols(g.param(*embed_), std::move(ids));
  }
  if (!provider_) throw std::logic_error("external-contextual encoder has no piece provider");
  std::vector<Eigen::MatrixXd> pieces = provider_(tokens);
  if (static_cast<int>(pieces.size()) != n)
    throw std::logic_error("piece provider returned wrong token count");
  ag::Mat E(cfg_.external_dim, n);
  for (int i = 0; i < n; ++i) {
    if (pieces[i].rows() != cfg_.external_dim || pieces[i].cols() == 0)
      throw std::logic_error("piece provider returned bad shape");
    E.col(i) = pieces[i].rowwise().mean();
  }
  return ag::add_colwise(ag::matmul(g.param(*ext_W_), g.constant(std::move(E))), g.param(*ext_b_));
}

ag::Var Encoder::run_direction(ag::Graph& g, ag::Var X, int layer, bool backward_dir) const {
  const int h = cfg_.hidden_size;
  const int n = X.cols();
  const DirParams& d = backward_dir ? layers_[layer].bw : layers_[layer].fw;
  ag::Var WX = ag::matmul(g.param(*d.W), X);
  ag::Var U = g.param(*d.U);
  ag::Var b = g.param(*d.b);
  ag::Var hstate = g.constant(ag::Mat::Zero(h, 1));
  ag::Var cstate = g.constant(ag::Mat::Zero(h, 1));
  std::vector<ag::Var> hs(n);
  for (int step = 0; step < n; ++step) {
    const int t = backward_dir ? n - 1 - step : step;
    ag::Var a = ag::add(ag::add(ag::col(WX, t), ag::matmul(U, hstate)), b);
    ag::Var i = ag::sigmoid(ag::rows(a, 0, h));
    ag::Var f = ag::sigmoid(ag::rows(a, h, h));
    ag::Var o = ag::sigmoid(ag::rows(a, 2 * h, h));
    ag::Var u = ag::tanh(ag::rows(a, 3 * h, h));
    cstate = ag::add(ag::cmul(f, cstate), ag::cmul(i, u));
    hstate = ag::cmul(o, ag::tanh(cstate));
    hs[t] = hstate;
  }
  return ag::hconcat(hs);
}

ag::Var Encoder::contextualize(ag::Graph& g, ag::Var X, bool training,
                               std::mt19937_64& rng) const {
  ag::Var cur = X;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    if (l > 0 && training && cfg_.dropout_lstm > 0.0)
      cur = ag::dropout(cur, cfg_.dropout_lstm, rng);
    ag::Var R = ag::vconcat({run_direction(g, cur, l, false), run_direction(g, cur, l, true)});
    const LayerParams& lp = layers_[l];
    ag::Var gate = ag::sigmoid(
        ag::add_colwise(ag::matmul(g.param(*lp.hw_Wg), cur), g.param(*lp.hw_bg)));
    ag::Var proj = ag::add_colwise(ag::matmul(g.param(*lp.hw_Wp), cur), g.param(*lp.hw_bp));
    ag::Var ones = g.constant(ag::Mat::Ones(gate.rows(), gate.cols()));
    cur = ag::add(ag::cmul(gate, R), ag::cmul(ag::add(ones, ag::scale(gate, -1.0)), proj));
  }
  return cur;
}

ag::Var Encoder::represent_spans(ag::Graph& g, ag::Var H, const std::vector<Span>& spans) const {
  if (spans.empty()) throw std::logic_error("represent_spans: no spans");
  std::vector<int> starts, ends, widths;
  std::vector<std::pair<int, int>> ranges;
  starts.reserve(spans.size());
  ends.reserve(spans.size());
  widths.reserve(spans.size());
  ranges.reserve(spans.size());
  for (const Span& s : spans) {
    if (s.start < 0 || s.end >= H.cols() || s.length() > cfg_.max_span_length)
      throw std::logic_error("represent_spans: span out of range");
    starts.push_back(s.start);
    ends.push_back(s.end);
    widths.push_back(s.length() - 1);
    ranges.emplace_back(s.start, s.end);
  }
  ag::Var scores = ag::matmul(g.param(*attn_w_), H);
  return ag::vconcat({ag::cols(H, std::move(starts)), ag::cols(H, std::move(ends)),
                      ag::span_attention(H, scores, ranges),
                      ag::cols(g.param(*width_), std::move(widths))});
}

ag::Var Encoder::encode(ag::Graph& g, const std::vector<std::string>& tokens,
                        const Vocabulary& vocab, const std::vector<Span>& spans, bool training,
                        std::mt19937_64& rng) const {
  ag::Var X = embed(g, tokens, vocab);
  ag::Var H = contextualize(g, X, training, rng);
  return represent_spans(g, H, spans);
}

}  // namespace fsp
