#include "fsp/node_builder.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "fsp/fixtures.hpp"

using namespace fsp;

namespace {

FrameOntology meeting_ontology() {
  FrameOntology o;
  o.add_frame("Discussion", {"Interlocutors", "Topic"});
  o.add_frame("Social_event", {"Attendees", "Occasion"});
  o.add_frame("Arriving", {"Theme", "Goal"});
  o.add_lexicon_entry("meeting", "Social_event");
  o.add_lexicon_entry("meeting", "Discussion");
  o.add_lexicon_entry("arrive", "Arriving");
  o.finalize();
  return o;
}

}  // namespace

TEST_CASE("node type flags cover all eight combinations") {
  // membership table: (full, partial, role) -> type -> flags again
  struct Row {
    bool full, partial, role;
    NodeType type;
  };
  const Row rows[] = {
      {true, false, false, NodeType::FullPredicate},
      {false, true, false, NodeType::PartialPredicate},
      {false, false, true, NodeType::Role},
      {true, true, false, NodeType::FullPartialPredicate},
      {true, false, true, NodeType::FullPredicateRole},
      {false, true, true, NodeType::PartialPredicateRole},
      {true, true, true, NodeType::FullPartialPredicateRole},
      {false, false, false, NodeType::NullSpan},
  };
  for (const Row& r : rows) {
    CHECK(node_type_from_flags(r.full, r.partial, r.role) == r.type);
    CHECK(is_full_predicate(r.type) == r.full);
    CHECK(is_partial_predicate(r.type) == r.partial);
    CHECK(is_role(r.type) == r.role);
    CHECK(is_predicate(r.type) == (r.full || r.partial));
  }
  // softmax index order is fixed
  CHECK((int)NodeType::FullPredicate == 0);
  CHECK((int)NodeType::NullSpan == 7);
  CHECK(kNumNodeTypes == 8);
  CHECK(node_type_name(NodeType::NullSpan) == std::string("NULL"));
}

TEST_CASE("a lexical unit licenses exactly its lexicon frames") {
  FrameOntology o = meeting_ontology();
  std::vector<std::string> lemmas = {"the", "meeting", "arrive"};
  const auto* lic = license_frames({1, 1}, lemmas, o);
  REQUIRE(lic != nullptr);
  REQUIRE(lic->size() == 2);
  CHECK(o.frame_name((*lic)[0]) == "Discussion");
  CHECK(o.frame_name((*lic)[1]) == "Social_event");
  CHECK(license_frames({0, 0}, lemmas, o) == nullptr);      // "the" not an LU
  CHECK(license_frames({0, 1}, lemmas, o) == nullptr);      // "the meeting" absent
  CHECK(license_frames({2, 2}, lemmas, o) != nullptr);
}

TEST_CASE("gold annotations label spans by their structural memberships") {
  FrameOntology o = meeting_ontology();
  // tokens: the meeting arrive quickly
  AnnotatedSentence s;
  for (int i = 0; i < 4; ++i) s.tokens.push_back({"t" + std::to_string(i), i});
  s.lemmas = {"the", "meeting", "arrive", "quickly"};

  // tuple 1: single-piece predicate [1,1], role [3,3]
  FrameTuple t1;
  t1.predicate.pieces = {{1, 1}};
  t1.frame = "Discussion";
  t1.roles = {{"Topic", {3, 3}}};
  // tuple 2: discontinuous predicate [0,0]+[2,2]; role [1,1] (shared span)
  FrameTuple t2;
  t2.predicate.pieces = {{0, 0}, {2, 2}};
  t2.frame = "Arriving";
  t2.roles = {{"Theme", {1, 1}}};
  s.tuples = {t1, t2};

  auto spans = enumerate_spans(4, 3);
  auto role_labels = o.role_label_union();
  GoldAnnotations gold = build_gold(s, spans, o, role_labels);

  const auto idx = [&](int a, int b) {
    for (std::size_t k = 0; k < spans.size(); ++k)
      if (spans[k] == Span{a, b}) return (int)k;
    FAIL("span not found");
    return -1;
  };

  // [1,1] is a full predicate (tuple 1) and a role (tuple 2)
  CHECK(gold.node_labels[idx(1, 1)] == (int)NodeType::FullPredicateRole);
  // [0,0] and [2,2] are partial predicate pieces only
  CHECK(gold.node_labels[idx(0, 0)] == (int)NodeType::PartialPredicate);
  CHECK(gold.node_labels[idx(2, 2)] == (int)NodeType::PartialPredicate);
  CHECK(gold.node_labels[idx(3, 3)] == (int)NodeType::Role);
  CHECK(gold.node_labels[idx(0, 1)] == (int)NodeType::NullSpan);

  // frame labels sit on predicate spans; untargeted spans carry -1
  CHECK(gold.frame_labels[idx(1, 1)] == o.frame_index("Discussion"));
  CHECK(gold.frame_labels[idx(0, 0)] == o.frame_index("Arriving"));
  CHECK(gold.frame_labels[idx(2, 2)] == o.frame_index("Arriving"));
  CHECK(gold.frame_labels[idx(3, 3)] == -1);

  // the two pieces of tuple 2 are linked, canonically ordered
  REQUIRE(gold.pp_connected.size() == 1);
  CHECK(*gold.pp_connected.begin() == std::make_pair(idx(0, 0), idx(2, 2)));

  // role edges: every predicate piece connects to each of its roles
  const auto role_id = [&](const char* name) {
    return (int)(std::lower_bound(role_labels.begin(), role_labels.end(), name) -
                 role_labels.begin());
  };
  REQUIRE(gold.pr_labels.size() == 3);
  CHECK(gold.pr_labels.at({idx(1, 1), idx(3, 3)}) == role_id("Topic"));
  CHECK(gold.pr_labels.at({idx(0, 0), idx(1, 1)}) == role_id("Theme"));
  CHECK(gold.pr_labels.at({idx(2, 2), idx(1, 1)}) == role_id("Theme"));

  CHECK(gold.dropped_spans == 0);
  CHECK(gold.frame_collisions == 0);
  CHECK(gold.role_collisions == 0);
}

TEST_CASE("gold spans beyond the length cap are counted as dropped") {
  FrameOntology o = meeting_ontology();
  AnnotatedSentence s;
  for (int i = 0; i < 6; ++i) s.tokens.push_back({"w", i});
  FrameTuple t;
  t.predicate.pieces = {{0, 0}};
  t.frame = "Arriving";
  t.roles = {{"Theme", {1, 5}}};  // length 5
  s.tuples = {t};

  auto spans = enumerate_spans(6, 3);  // cap below the role span length
  GoldAnnotations gold = build_gold(s, spans, o, o.role_label_union());
  CHECK(gold.dropped_spans == 1);
  CHECK(gold.pr_labels.empty());
}

TEST_CASE("conflicting annotations keep the first and count collisions") {
  FrameOntology o = meeting_ontology();
  AnnotatedSentence s;
  for (int i = 0; i < 3; ++i) s.tokens.push_back({"w", i});
  FrameTuple t1, t2;
  t1.predicate.pieces = {{0, 0}};
  t1.frame = "Discussion";
  t1.roles = {{"Topic", {1, 1}}};
  t2.predicate.pieces = {{0, 0}};
  t2.frame = "Arriving";  // same span, different frame
  t2.roles = {{"Theme", {1, 1}}};  // same pair, different role
  s.tuples = {t1, t2};

  auto spans = enumerate_spans(3, 2);
  GoldAnnotations gold = build_gold(s, spans, o, o.role_label_union());
  CHECK(gold.frame_collisions == 1);
  CHECK(gold.role_collisions == 1);
  CHECK(gold.frame_labels[0] == o.frame_index("Discussion"));  // first wins
}

TEST_CASE("type head emits normalized distributions over eight types") {
  std::mt19937_64 rng(11);
  ag::ParameterStore store;
  EncoderConfig cfg;
  cfg.hidden_size = 6;
  cfg.width_embedding_dim = 4;
  cfg.mlp_hidden = 12;
  cfg.dropout_mlp = 0.0;
  NodeTyper typer(cfg, 3, store, rng);

  ag::Graph g;
  std::mt19937_64 drop(1);
  Eigen::MatrixXd Gv = Eigen::MatrixXd::Random(cfg.span_rep_dim(), 5);
  ag::Var lp = typer.type_log_probs(g, g.constant(Gv), false, drop);
  REQUIRE(lp.rows() == kNumNodeTypes);
  REQUIRE(lp.cols() == 5);
  for (int j = 0; j < 5; ++j)
    CHECK(lp.value().col(j).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("frame mask licenses exactly the lexicon frames") {
  FrameOntology o = meeting_ontology();
  std::mt19937_64 rng(13);
  ag::ParameterStore store;
  EncoderConfig cfg;
  cfg.hidden_size = 6;
  cfg.width_embedding_dim = 4;
  cfg.mlp_hidden = 12;
  cfg.dropout_mlp = 0.0;
  NodeTyper typer(cfg, o.num_frames(), store, rng);

  std::vector<std::string> lemmas = {"the", "meeting"};
  const std::vector<int>* lic = license_frames({1, 1}, lemmas, o);
  const std::vector<int> empty;

  ag::Graph g;
  std::mt19937_64 drop(1);
  Eigen::MatrixXd Gv = Eigen::MatrixXd::Random(cfg.span_rep_dim(), 3);
  ag::Var logits = typer.frame_logits(g, g.constant(Gv), false, drop);

  int warnings = 0;
  ag::Var lp = typer.masked_frame_log_probs(g, logits, {lic, nullptr, &empty}, &warnings);
  // column 0 masked: licensed frames carry all probability mass
  const int disc = o.frame_index("Discussion");
  const int social = o.frame_index("Social_event");
  const int arriving = o.frame_index("Arriving");
  CHECK(std::exp(lp.value()(arriving, 0)) == 0.0);
  CHECK(std::exp(lp.value()(disc, 0)) + std::exp(lp.value()(social, 0)) ==
        doctest::Approx(1.0).epsilon(1e-10));
  // column 1 unmasked: full softmax
  CHECK(lp.value().col(1).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::exp(lp.value()(arriving, 1)) > 0.0);
  // column 2 had an empty license set: falls back to no mask, warned once
  CHECK(lp.value().col(2).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(warnings == 1);

  // masked column renormalizes the unmasked logits: relative odds survive
  ag::Var plain = ag::log_softmax_cols(logits);
  const double odds_masked = lp.value()(disc, 0) - lp.value()(social, 0);
  const double odds_plain = plain.value()(disc, 0) - plain.value()(social, 0);
  CHECK(odds_masked == doctest::Approx(odds_plain).epsilon(1e-10));
}

TEST_CASE("node typer overfits three separable spans") {
  // tiny closed loop: three constant span vectors, three different types
  std::mt19937_64 rng(17);
  ag::ParameterStore store;
  EncoderConfig cfg;
  cfg.hidden_size = 4;
  cfg.width_embedding_dim = 2;
  cfg.mlp_hidden = 16;
  cfg.dropout_mlp = 0.0;
  NodeTyper typer(cfg, 2, store, rng);

  Eigen::MatrixXd Gv = Eigen::MatrixXd::Zero(cfg.span_rep_dim(), 3);
  Gv(0, 0) = 1.0;
  Gv(1, 1) = 1.0;
  Gv(2, 2) = 1.0;
  const std::vector<int> labels = {(int)NodeType::FullPredicate, (int)NodeType::Role,
                                   (int)NodeType::NullSpan};

  double last = 1e9;
  for (int step = 0; step < 400; ++step) {
    store.zero_grads();
    ag::Graph g;
    std::mt19937_64 drop(1);
    ag::Var lp = typer.type_log_probs(g, g.constant(Gv), true, drop);
    ag::Var loss = ag::pick_nll(lp, labels);
    g.backward(loss);
    last = loss.value()(0, 0);
    for (const auto& p : store.all()) p->value -= 0.5 * p->grad;
  }
  CHECK(last < 0.01);

  ag::Graph g;
  std::mt19937_64 drop(1);
  ag::Var lp = typer.type_log_probs(g, g.constant(Gv), false, drop);
  for (int j = 0; j < 3; ++j) {
    int best;
    lp.value().col(j).maxCoeff(&best);
    CHECK(best == labels[j]);
  }
}
