#include "fsp/encoder.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"

using namespace fsp;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.word_dim = 10;
  cfg.hidden_size = 8;
  cfg.num_layers = 2;
  cfg.max_span_length = 4;
  cfg.width_embedding_dim = 5;
  cfg.dropout_lstm = 0.0;
  cfg.dropout_mlp = 0.0;
  return cfg;
}

Vocabulary vocab_of(const std::vector<std::string>& words) {
  AnnotatedSentence s;
  for (int i = 0; i < (int)words.size(); ++i) s.tokens.push_back({words[i], i});
  return Vocabulary::build({s});
}

}  // namespace

TEST_CASE("span enumeration matches brute force") {
  for (int n : {0, 1, 2, 5, 9, 17, 30}) {
    for (int L : {1, 2, 3, 15, 30}) {
      auto spans = enumerate_spans(n, L);
      std::vector<Span> brute;
      for (int s = 0; s < n; ++s)
        for (int e = s; e < n && e - s + 1 <= L; ++e) brute.push_back({s, e});
      std::sort(brute.begin(), brute.end());
      REQUIRE(spans.size() == brute.size());
      CHECK(std::is_sorted(spans.begin(), spans.end()));
      for (std::size_t i = 0; i < spans.size(); ++i) CHECK(spans[i] == brute[i]);
    }
  }
  // closed forms: L >= n gives n(n+1)/2, L=1 gives n
  CHECK(enumerate_spans(9, 9).size() == 45);
  CHECK(enumerate_spans(9, 30).size() == 45);
  CHECK(enumerate_spans(9, 1).size() == 9);
  // and in general n*L - L*(L-1)/2 for L <= n
  for (int n : {5, 8, 12})
    for (int L = 1; L <= n; ++L)
      CHECK((int)enumerate_spans(n, L).size() == n * L - L * (L - 1) / 2);
}

TEST_CASE("vocabulary ids are sorted with unknown at zero") {
  Vocabulary v = vocab_of({"Walk", "the", "dog", "the", "DOG"});
  CHECK(v.size() == 4);  // dog, the, walk + unk
  CHECK(v.id("dog") == 1);
  CHECK(v.id("the") == 2);
  CHECK(v.id("walk") == 3);
  CHECK(v.id("Walk") == 3);  // lookups lowercase too
  CHECK(v.id("cat") == 0);

  auto path = std::filesystem::temp_directory_path() / "fsp_vocab_test.txt";
  v.save_file(path.string());
  Vocabulary back = Vocabulary::load_file(path.string());
  CHECK(back.words() == v.words());
  std::filesystem::remove(path);
}

TEST_CASE("encoder registers one parameter set per layer and direction") {
  std::mt19937_64 rng(1);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg, 11, store, rng);
  CHECK(store.find("enc/embed") != nullptr);
  for (int l = 0; l < cfg.num_layers; ++l) {
    for (const char* dir : {"fw", "bw"}) {
      const std::string base = "enc/l" + std::to_string(l) + "/" + dir + "/";
      auto* W = store.find(base + "W");
      auto* U = store.find(base + "U");
      auto* b = store.find(base + "b");
      REQUIRE(W != nullptr);
      REQUIRE(U != nullptr);
      REQUIRE(b != nullptr);
      const int in = l == 0 ? cfg.word_dim : cfg.state_dim();
      CHECK(W->rows() == 4 * cfg.hidden_size);
      CHECK(W->cols() == in);
      CHECK(U->cols() == cfg.hidden_size);
      // forget-gate rows start at one
      CHECK(b->value.block(cfg.hidden_size, 0, cfg.hidden_size, 1).isOnes());
    }
  }
  CHECK(store.find("enc/attn_w")->rows() == 1);
  CHECK(store.find("enc/width")->cols() == cfg.max_span_length);
}

TEST_CASE("encode output shape is span_rep_dim x span_count") {
  std::mt19937_64 rng(2);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  std::vector<std::string> toks = {"a", "b", "c", "d", "e"};
  Vocabulary v = vocab_of(toks);
  Encoder enc(cfg, v.size(), store, rng);
  auto spans = enumerate_spans((int)toks.size(), cfg.max_span_length);

  ag::Graph g;
  std::mt19937_64 drop(3);
  ag::Var G = enc.encode(g, toks, v, spans, false, drop);
  CHECK(G.rows() == cfg.span_rep_dim());
  CHECK(G.cols() == (int)spans.size());
  CHECK(G.value().allFinite());
}

TEST_CASE("inference is deterministic and ignores the dropout stream") {
  std::mt19937_64 rng(4);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  cfg.dropout_lstm = 0.5;  // must not fire when training=false
  std::vector<std::string> toks = {"one", "two", "three", "four"};
  Vocabulary v = vocab_of(toks);
  Encoder enc(cfg, v.size(), store, rng);
  auto spans = enumerate_spans(4, cfg.max_span_length);

  Eigen::MatrixXd first;
  {
    ag::Graph g;
    std::mt19937_64 drop(7);
    first = enc.encode(g, toks, v, spans, false, drop).value();
  }
  {
    ag::Graph g;
    std::mt19937_64 drop(999);  // different stream, same result
    CHECK(enc.encode(g, toks, v, spans, false, drop).value() == first);
  }
  {
    ag::Graph g;
    std::mt19937_64 drop(7);
    ag::Var G = enc.encode(g, toks, v, spans, true, drop);
    // training mode with dropout>0 changes the computation
    CHECK(G.value() != first);
  }
}

TEST_CASE("single-token spans tie start, end and attention states together") {
  // for a width-1 span, start state == end state == attention pool
  std::mt19937_64 rng(5);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  std::vector<std::string> toks = {"p", "q", "r"};
  Vocabulary v = vocab_of(toks);
  Encoder enc(cfg, v.size(), store, rng);

  ag::Graph g;
  std::mt19937_64 drop(1);
  ag::Var X = enc.embed(g, toks, v);
  ag::Var H = enc.contextualize(g, X, false, drop);
  ag::Var G = enc.represent_spans(g, H, {{1, 1}});
  const int d = cfg.state_dim();
  Eigen::VectorXd col = G.value().col(0);
  CHECK((col.segment(0, d) - H.value().col(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((col.segment(d, d) - H.value().col(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((col.segment(2 * d, d) - H.value().col(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((col.segment(3 * d, cfg.width_embedding_dim) -
         store.find("enc/width")->value.col(0))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("width embedding column tracks span length") {
  std::mt19937_64 rng(6);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  std::vector<std::string> toks = {"a", "b", "c", "d"};
  Vocabulary v = vocab_of(toks);
  Encoder enc(cfg, v.size(), store, rng);

  ag::Graph g;
  std::mt19937_64 drop(1);
  ag::Var H = enc.contextualize(g, enc.embed(g, toks, v), false, drop);
  ag::Var G = enc.represent_spans(g, H, {{0, 2}, {1, 3}});
  const int off = 3 * cfg.state_dim();
  const Eigen::VectorXd expect = store.find("enc/width")->value.col(2);  // length 3
  CHECK((G.value().col(0).segment(off, cfg.width_embedding_dim) - expect)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((G.value().col(1).segment(off, cfg.width_embedding_dim) - expect)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("context actually flows between tokens") {
  // perturbing one token must move the states of its neighbours
  std::mt19937_64 rng(7);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  std::vector<std::string> a = {"x", "y", "z"};
  std::vector<std::string> b = {"x", "y", "w"};
  Vocabulary v = vocab_of({"x", "y", "z", "w"});
  Encoder enc(cfg, v.size(), store, rng);

  std::mt19937_64 drop(1);
  ag::Graph g1, g2;
  Eigen::MatrixXd Ha = enc.contextualize(g1, enc.embed(g1, a, v), false, drop).value();
  Eigen::MatrixXd Hb = enc.contextualize(g2, enc.embed(g2, b, v), false, drop).value();
  // last token differs, so even the first column must change (backward pass)
  CHECK((Ha.col(0) - Hb.col(0)).cwiseAbs().maxCoeff() > 1e-10);
  CHECK((Ha.col(1) - Hb.col(1)).cwiseAbs().maxCoeff() > 1e-10);
}

TEST_CASE("gradients flow through the full encoder stack") {
  std::mt19937_64 rng(8);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  cfg.num_layers = 1;
  cfg.hidden_size = 4;
  cfg.word_dim = 5;
  cfg.width_embedding_dim = 3;
  std::vector<std::string> toks = {"m", "n", "o"};
  Vocabulary v = vocab_of(toks);
  Encoder enc(cfg, v.size(), store, rng);
  auto spans = enumerate_spans(3, cfg.max_span_length);

  const auto loss_value = [&]() {
    ag::Graph g;
    std::mt19937_64 drop(1);
    ag::Var G = enc.encode(g, toks, v, spans, false, drop);
    return ag::sum_all(ag::square(G)).value()(0, 0);
  };

  store.zero_grads();
  {
    ag::Graph g;
    std::mt19937_64 drop(1);
    ag::Var G = enc.encode(g, toks, v, spans, false, drop);
    g.backward(ag::sum_all(ag::square(G)));
  }
  const double eps = 1e-6;
  int checked = 0;
  std::mt19937_64 pick(99);
  for (const auto& p : store.all()) {
    // spot-check a handful of coordinates per parameter
    for (int trial = 0; trial < 3; ++trial) {
      const int i = (int)(pick() % p->rows());
      const int j = (int)(pick() % p->cols());
      const double keep = p->value(i, j);
      p->value(i, j) = keep + eps;
      const double up = loss_value();
      p->value(i, j) = keep - eps;
      const double down = loss_value();
      p->value(i, j) = keep;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p->grad(i, j);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1.0});
      INFO(p->name, "(", i, ",", j, ")");
      CHECK(std::abs(numeric - analytic) / denom < 1e-5);
      ++checked;
    }
  }
  CHECK(checked >= 30);
}

TEST_CASE("external kind averages pieces and projects") {
  std::mt19937_64 rng(9);
  ag::ParameterStore store;
  EncoderConfig cfg = tiny_config();
  cfg.kind = EncoderKind::ExternalContextual;
  cfg.external_dim = 6;
  Vocabulary v;  // unused by the external path
  Encoder enc(cfg, v.size(), store, rng);
  CHECK(store.find("enc/ext_proj_W") != nullptr);
  CHECK(enc.is_adapter_param("enc/ext_proj_W"));
  CHECK_FALSE(enc.is_adapter_param("enc/l0/fw/W"));
  CHECK_FALSE(enc.is_adapter_param("node/type/W1"));

  // without a provider the external path must refuse
  {
    ag::Graph g;
    CHECK_THROWS(enc.embed(g, {"a"}, v));
  }

  enc.set_piece_provider([&](const std::vector<std::string>& toks) {
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      Eigen::MatrixXd pieces(6, 2);  // two pieces per token
      pieces.col(0).setConstant((double)i);
      pieces.col(1).setConstant((double)i + 1.0);
      out.push_back(pieces);
    }
    return out;
  });
  ag::Graph g;
  ag::Var X = enc.embed(g, {"a", "b"}, v);
  CHECK(X.rows() == cfg.word_dim);
  CHECK(X.cols() == 2);
  // mean of pieces: token 0 -> 0.5, token 1 -> 1.5; X = W*mean + b
  const Eigen::MatrixXd& W = store.find("enc/ext_proj_W")->value;
  const Eigen::MatrixXd& b = store.find("enc/ext_proj_b")->value;
  Eigen::VectorXd mean0 = Eigen::VectorXd::Constant(6, 0.5);
  CHECK((X.value().col(0) - (W * mean0 + b)).cwiseAbs().maxCoeff() < 1e-12);
}
