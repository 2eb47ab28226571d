#include "fsp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fsp {

using nlohmann::json;

std::vector<ComparisonRow> comparison_systems() {
  using V = ModelVariant;
  std::vector<ComparisonRow> rows;
  rows.push_back({"Predicate + Frame + Role", {V::Predicate, V::Frame, V::Role}, {}});
  rows.push_back({"Predicate o Frame + Role", {V::PredicateFrame, V::Role}, {}});
  rows.push_back({"Predicate + Frame o Role", {V::Predicate, V::FrameRole}, {}});
  rows.push_back({"Predicate o Frame + Semi-CRF", {V::PredicateFrame, V::SemiCrf}, {}});
  rows.push_back({"Node + Edge", {V::NodeEdge}, {}});
  rows.push_back({"Joint", {V::Joint}, {}});
  return rows;
}

std::vector<AnnotatedSentence> run_pipeline(const std::vector<const TrainedModel*>& stages,
                                            const std::vector<AnnotatedSentence>& input) {
  if (stages.empty()) throw std::invalid_argument("run_pipeline: no stages given");
  std::vector<AnnotatedSentence> current = parse_corpus(*stages.front(), input);
  for (std::size_t k = 1; k < stages.size(); ++k)
    current = parse_corpus(*stages[k], current);
  return current;
}

double median_throughput(
    const std::function<void(const std::vector<AnnotatedSentence>&)>& parse,
    const std::vector<AnnotatedSentence>& corpus, int runs) {
  if (runs < 1) throw std::invalid_argument("median_throughput: runs must be positive");
  if (corpus.empty()) throw std::invalid_argument("median_throughput: empty corpus");
  parse(corpus);  // warmup, not timed
  std::vector<double> rates;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    parse(corpus);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    rates.push_back(double(corpus.size()) / std::max(dt.count(), 1e-12));
  }
  std::sort(rates.begin(), rates.end());
  return rates[rates.size() / 2];
}

ComparisonTable run_comparison(const std::vector<AnnotatedSentence>& train_set,
                               const std::vector<AnnotatedSentence>& dev_set,
                               const std::vector<AnnotatedSentence>& test_set,
                               const FrameOntology& ontology, const ModelConfig& model_config,
                               const TrainConfig& train_config,
                               const std::function<void(const std::string&)>& progress) {
  const auto say = [&](const std::string& line) {
    if (progress) progress(line);
  };

  ComparisonTable table;
  table.rows = comparison_systems();

  // Each stage variant is trained once and shared between the rows that use it.
  std::map<ModelVariant, TrainOutcome> models;
  for (const auto& row : table.rows)
    for (ModelVariant v : row.stages)
      if (!models.count(v)) {
        TrainConfig tc = train_config;
        tc.variant = v;
        say(std::string("training stage model: ") + variant_name(v));
        models.emplace(v, train(train_set, dev_set, ontology, model_config, tc));
      }

  for (auto& row : table.rows) {
    say("evaluating system: " + row.name);
    std::vector<const TrainedModel*> chain;
    for (ModelVariant v : row.stages) chain.push_back(&models.at(v).model);
    row.report = eval_corpus(run_pipeline(chain, test_set), test_set);
  }

  say("timing joint model vs semi-CRF pipeline");
  const TrainedModel& joint = models.at(ModelVariant::Joint).model;
  const TrainedModel& pred_frame = models.at(ModelVariant::PredicateFrame).model;
  const TrainedModel& semicrf = models.at(ModelVariant::SemiCrf).model;
  table.joint_sents_per_sec = median_throughput(
      [&](const std::vector<AnnotatedSentence>& c) { parse_corpus(joint, c); }, test_set);
  table.semicrf_pipeline_sents_per_sec = median_throughput(
      [&](const std::vector<AnnotatedSentence>& c) {
        parse_corpus(semicrf, parse_corpus(pred_frame, c));
      },
      test_set);
  return table;
}

std::string comparison_to_text(const ComparisonTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(30) << "system" << std::right;
  for (const char* col : {"tgt-P", "tgt-R", "tgt-F1", "frm-P", "frm-R", "frm-F1", "role-P",
                          "role-R", "role-F1"})
    out << std::setw(9) << col;
  out << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& row : table.rows) {
    out << std::left << std::setw(30) << row.name << std::right;
    for (const PRF* m : {&row.report.target, &row.report.frame, &row.report.role})
      out << std::setw(9) << 100.0 * m->precision() << std::setw(9) << 100.0 * m->recall()
          << std::setw(9) << 100.0 * m->f1();
    out << '\n';
  }
  if (table.joint_sents_per_sec > 0.0)
    out << "throughput (sent/s): joint " << table.joint_sents_per_sec << ", semi-CRF pipeline "
        << table.semicrf_pipeline_sents_per_sec << '\n';
  return out.str();
}

std::string comparison_to_json(const ComparisonTable& table) {
  json doc;
  doc["rows"] = json::array();
  for (const auto& row : table.rows) {
    json r;
    r["system"] = row.name;
    r["stages"] = json::array();
    for (ModelVariant v : row.stages) r["stages"].push_back(variant_name(v));
    const auto block = [](const PRF& m) {
      return json{{"precision", m.precision()}, {"recall", m.recall()}, {"f1", m.f1()}};
    };
    r["target"] = block(row.report.target);
    r["frame"] = block(row.report.frame);
    r["role"] = block(row.report.role);
    doc["rows"].push_back(std::move(r));
  }
  doc["throughput"] = {{"joint_sents_per_sec", table.joint_sents_per_sec},
                       {"semicrf_pipeline_sents_per_sec", table.semicrf_pipeline_sents_per_sec}};
  return doc.dump(2);
}

}  // namespace fsp
