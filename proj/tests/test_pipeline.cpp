// System-comparison harness: the fixed system list, stage chaining semantics,
// throughput measurement, and the end-to-end comparison run on a small
// fixture corpus.

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "fsp/fixtures.hpp"
#include "fsp/pipeline.hpp"
#include "json.hpp"

using namespace fsp;

namespace {

ModelConfig tiny_config() {
  ModelConfig mc;
  mc.encoder.word_dim = 16;
  mc.encoder.hidden_size = 16;
  mc.encoder.num_layers = 1;
  mc.encoder.max_span_length = 4;
  mc.encoder.width_embedding_dim = 8;
  mc.encoder.mlp_hidden = 24;
  mc.encoder.dropout_lstm = 0.0;
  mc.encoder.dropout_mlp = 0.0;
  return mc;
}

TrainConfig quick_train(ModelVariant v) {
  TrainConfig tc;
  tc.variant = v;
  tc.max_epochs = 1;
  tc.batch_size = 4;
  tc.early_stop_patience = 99;
  return tc;
}

std::vector<std::vector<Span>> predicate_sets(const AnnotatedSentence& s) {
  std::vector<std::vector<Span>> out;
  for (const FrameTuple& t : s.tuples) out.push_back(t.predicate.pieces);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("the comparison harness lists the six fixed systems") {
  using V = ModelVariant;
  std::vector<ComparisonRow> rows = comparison_systems();
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].name == "Predicate + Frame + Role");
  CHECK(rows[0].stages == std::vector<V>{V::Predicate, V::Frame, V::Role});
  CHECK(rows[1].name == "Predicate o Frame + Role");
  CHECK(rows[1].stages == std::vector<V>{V::PredicateFrame, V::Role});
  CHECK(rows[2].name == "Predicate + Frame o Role");
  CHECK(rows[2].stages == std::vector<V>{V::Predicate, V::FrameRole});
  CHECK(rows[3].name == "Predicate o Frame + Semi-CRF");
  CHECK(rows[3].stages == std::vector<V>{V::PredicateFrame, V::SemiCrf});
  CHECK(rows[4].name == "Node + Edge");
  CHECK(rows[4].stages == std::vector<V>{V::NodeEdge});
  CHECK(rows[5].name == "Joint");
  CHECK(rows[5].stages == std::vector<V>{V::Joint});
  for (const auto& row : rows) {
    CHECK(row.report.target.gold_count == 0);  // scores are filled by the run
    CHECK(!row.stages.empty());
  }
}

TEST_CASE("pipeline stages consume the previous stage's predictions") {
  Fixture fx = generate_fixture(23, 8);
  std::vector<AnnotatedSentence> train_set(fx.sentences.begin(), fx.sentences.begin() + 6);
  std::vector<AnnotatedSentence> dev_set(fx.sentences.begin() + 6, fx.sentences.end());
  ModelConfig mc = tiny_config();

  TrainOutcome pred = train(train_set, dev_set, fx.ontology, mc,
                            quick_train(ModelVariant::Predicate));
  TrainOutcome frame = train(train_set, dev_set, fx.ontology, mc,
                             quick_train(ModelVariant::Frame));
  TrainOutcome role = train(train_set, dev_set, fx.ontology, mc,
                            quick_train(ModelVariant::Role));

  SUBCASE("no stages is an error") {
    CHECK_THROWS_AS(run_pipeline({}, dev_set), std::invalid_argument);
  }

  SUBCASE("a predicate-only stage leaves frames and roles unset") {
    std::vector<AnnotatedSentence> out = run_pipeline({&pred.model}, dev_set);
    REQUIRE(out.size() == dev_set.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].tokens == dev_set[i].tokens);
      CHECK_NOTHROW(validate_sentence(out[i], &fx.ontology));
      for (const FrameTuple& t : out[i].tuples) {
        // Without a frame head every tuple carries the first frame name.
        CHECK(t.frame == fx.ontology.frame_name(0));
        CHECK(t.roles.empty());
      }
    }
  }

  SUBCASE("the frame stage relabels but keeps the predicates") {
    std::vector<AnnotatedSentence> one = run_pipeline({&pred.model}, dev_set);
    std::vector<AnnotatedSentence> two = run_pipeline({&pred.model, &frame.model}, dev_set);
    REQUIRE(two.size() == one.size());
    for (std::size_t i = 0; i < two.size(); ++i) {
      CHECK(predicate_sets(two[i]) == predicate_sets(one[i]));
      CHECK_NOTHROW(validate_sentence(two[i], &fx.ontology));
      for (const FrameTuple& t : two[i].tuples) CHECK(t.roles.empty());
    }
  }

  SUBCASE("chaining equals folding parse_corpus") {
    std::vector<AnnotatedSentence> chained =
        run_pipeline({&pred.model, &frame.model, &role.model}, dev_set);
    std::vector<AnnotatedSentence> folded =
        parse_corpus(role.model, parse_corpus(frame.model, parse_corpus(pred.model, dev_set)));
    REQUIRE(chained.size() == folded.size());
    for (std::size_t i = 0; i < chained.size(); ++i) {
      CHECK(chained[i] == folded[i]);
      CHECK_NOTHROW(validate_sentence(chained[i], &fx.ontology));
    }
  }
}

TEST_CASE("median throughput picks the middle timed run") {
  std::vector<AnnotatedSentence> corpus(4);
  for (auto& s : corpus) s.tokens = {{"a", 0}, {"b", 1}};

  SUBCASE("input validation") {
    auto noop = [](const std::vector<AnnotatedSentence>&) {};
    CHECK_THROWS_AS(median_throughput(noop, corpus, 0), std::invalid_argument);
    CHECK_THROWS_AS(median_throughput(noop, {}, 3), std::invalid_argument);
  }

  SUBCASE("warmup plus one timed pass per run") {
    int calls = 0;
    auto counting = [&](const std::vector<AnnotatedSentence>&) { ++calls; };
    double rate = median_throughput(counting, corpus, 5);
    CHECK(calls == 6);
    CHECK(rate > 0.0);
  }

  SUBCASE("the median ignores one unusually fast run") {
    // Warmup call, then 5ms, 45ms, 45ms timed runs: the median must come
    // from a slow run even though one run was nine times faster.
    int call = 0;
    auto timed = [&](const std::vector<AnnotatedSentence>&) {
      const int sleep_ms[] = {0, 5, 45, 45};
      std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms[call]));
      ++call;
    };
    double rate = median_throughput(timed, corpus, 3);
    // 4 sentences / 45ms is about 89/s; allow wide scheduling slack but
    // stay clearly below the fast run's about 800/s.
    CHECK(rate > 20.0);
    CHECK(rate < 300.0);
  }
}

TEST_CASE("the comparison run trains each stage once and scores all systems") {
  Fixture fx = generate_fixture(29, 12);
  std::vector<AnnotatedSentence> train_set(fx.sentences.begin(), fx.sentences.begin() + 8);
  std::vector<AnnotatedSentence> dev_set(fx.sentences.begin() + 8, fx.sentences.begin() + 10);
  std::vector<AnnotatedSentence> test_set(fx.sentences.begin() + 10, fx.sentences.end());

  std::vector<std::string> progress;
  ComparisonTable table =
      run_comparison(train_set, dev_set, test_set, fx.ontology, tiny_config(),
                     quick_train(ModelVariant::Joint),
                     [&](const std::string& line) { progress.push_back(line); });

  REQUIRE(table.rows.size() == 6);

  // Eight distinct stage variants across the six systems, trained once each.
  int trainings = 0, evaluations = 0;
  for (const std::string& line : progress) {
    if (line.rfind("training stage model: ", 0) == 0) ++trainings;
    if (line.rfind("evaluating system: ", 0) == 0) ++evaluations;
  }
  CHECK(trainings == 8);
  CHECK(evaluations == 6);

  // Every system is scored against the same gold test split.
  const EvalReport& first = table.rows[0].report;
  CHECK(first.target.gold_count > 0);
  CHECK(first.role.gold_count > 0);
  for (const auto& row : table.rows) {
    CHECK(row.report.target.gold_count == first.target.gold_count);
    CHECK(row.report.frame.gold_count == first.frame.gold_count);
    CHECK(row.report.role.gold_count == first.role.gold_count);
    for (const PRF* m : {&row.report.target, &row.report.frame, &row.report.role}) {
      CHECK(m->f1() >= 0.0);
      CHECK(m->f1() <= 1.0);
    }
  }
  CHECK(table.joint_sents_per_sec > 0.0);
  CHECK(table.semicrf_pipeline_sents_per_sec > 0.0);

  SUBCASE("text rendering lists every system") {
    std::string text = comparison_to_text(table);
    for (const auto& row : table.rows) CHECK(text.find(row.name) != std::string::npos);
    CHECK(text.find("tgt-F1") != std::string::npos);
    CHECK(text.find("role-F1") != std::string::npos);
    CHECK(text.find("throughput (sent/s): joint ") != std::string::npos);
  }

  SUBCASE("json rendering round-trips the numbers") {
    nlohmann::json doc = nlohmann::json::parse(comparison_to_json(table));
    REQUIRE(doc.at("rows").size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      const nlohmann::json& r = doc.at("rows")[i];
      CHECK(r.at("system").get<std::string>() == table.rows[i].name);
      REQUIRE(r.at("stages").size() == table.rows[i].stages.size());
      for (std::size_t k = 0; k < table.rows[i].stages.size(); ++k)
        CHECK(r.at("stages")[k].get<std::string>() == variant_name(table.rows[i].stages[k]));
      CHECK(r.at("role").at("f1").get<double>() ==
            doctest::Approx(table.rows[i].report.role.f1()));
      CHECK(r.at("target").at("precision").get<double>() ==
            doctest::Approx(table.rows[i].report.target.precision()));
    }
    CHECK(doc.at("throughput").at("joint_sents_per_sec").get<double>() ==
          doctest::Approx(table.joint_sents_per_sec).epsilon(1e-9));
  }
}
