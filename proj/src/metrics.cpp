#include "fsp/metrics.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fsp {

namespace {

using PieceKey = std::vector<std::pair<int, int>>;

PieceKey piece_key(const Predicate& p) {
  PieceKey k;
  for (const Span& s : p.pieces) k.emplace_back(s.start, s.end);
  std::sort(k.begin(), k.end());
  return k;
}

template <typename Item>
PRF set_prf(std::set<Item> pred, std::set<Item> gold) {
  PRF out;
  out.pred_count = static_cast<long>(pred.size());
  out.gold_count = static_cast<long>(gold.size());
  for (const Item& it : pred) out.tp += gold.count(it);
  return out;
}

}  // namespace

PRF eval_target(const std::vector<FrameTuple>& pred, const std::vector<FrameTuple>& gold) {
  std::set<PieceKey> p, g;
  for (const auto& t : pred) p.insert(piece_key(t.predicate));
  for (const auto& t : gold) g.insert(piece_key(t.predicate));
  return set_prf(std::move(p), std::move(g));
}

PRF eval_frame(const std::vector<FrameTuple>& pred, const std::vector<FrameTuple>& gold) {
  using Item = std::pair<PieceKey, std::string>;
  std::set<Item> p, g;
  for (const auto& t : pred) p.insert({piece_key(t.predicate), t.frame});
  for (const auto& t : gold) g.insert({piece_key(t.predicate), t.frame});
  return set_prf(std::move(p), std::move(g));
}

PRF eval_role(const std::vector<FrameTuple>& pred, const std::vector<FrameTuple>& gold) {
  using Item = std::tuple<PieceKey, std::string, std::pair<int, int>>;
  std::set<Item> p, g;
  for (const auto& t : pred)
    for (const auto& r : t.roles)
      p.insert({piece_key(t.predicate), r.role_name, {r.value.start, r.value.end}});
  for (const auto& t : gold)
    for (const auto& r : t.roles)
      g.insert({piece_key(t.predicate), r.role_name, {r.value.start, r.value.end}});
  return set_prf(std::move(p), std::move(g));
}

EvalReport eval_corpus(const std::vector<AnnotatedSentence>& pred,
                       const std::vector<AnnotatedSentence>& gold) {
  if (pred.size() != gold.size())
    throw std::runtime_error("evaluation corpora differ in sentence count");
  EvalReport report;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].tokens.size() != gold[i].tokens.size())
      throw std::runtime_error("evaluation sentence " + std::to_string(i + 1) +
                               ": token counts differ");
    for (std::size_t t = 0; t < pred[i].tokens.size(); ++t)
      if (pred[i].tokens[t].text != gold[i].tokens[t].text)
        throw std::runtime_error("evaluation sentence " + std::to_string(i + 1) + ": token " +
                                 std::to_string(t) + " differs (\"" + pred[i].tokens[t].text +
                                 "\" vs \"" + gold[i].tokens[t].text + "\")");
    report.target += eval_target(pred[i].tuples, gold[i].tuples);
    report.frame += eval_frame(pred[i].tuples, gold[i].tuples);
    report.role += eval_role(pred[i].tuples, gold[i].tuples);
  }
  return report;
}

void eval_modules(const ModulePrediction& pred, const ModuleGold& gold, int pr_null_label,
                  PRF& node, PRF& frame_module, PRF& edge) {
  if (pred.node_labels.size() != gold.node_labels.size())
    throw std::logic_error("eval_modules: span list mismatch");
  const int null_type = static_cast<int>(NodeType::NullSpan);

  {
    std::set<std::pair<int, int>> p, g;
    for (std::size_t i = 0; i < pred.node_labels.size(); ++i)
      if (pred.node_labels[i] != null_type) p.insert({static_cast<int>(i), pred.node_labels[i]});
    for (std::size_t i = 0; i < gold.node_labels.size(); ++i)
      if (gold.node_labels[i] != null_type) g.insert({static_cast<int>(i), gold.node_labels[i]});
    node += set_prf(std::move(p), std::move(g));
  }
  {
    std::set<std::pair<int, int>> p(pred.frame_choices.begin(), pred.frame_choices.end());
    std::set<std::pair<int, int>> g;
    for (std::size_t i = 0; i < gold.frame_labels.size(); ++i)
      if (gold.frame_labels[i] >= 0) g.insert({static_cast<int>(i), gold.frame_labels[i]});
    frame_module += set_prf(std::move(p), std::move(g));
  }
  {
    // Pooled labeled edges; pp edges tagged with label -1 to keep them
    // distinct from pr labels.
    using EdgeItem = std::tuple<int, std::pair<int, int>, int>;  // kind, pair, label
    std::set<EdgeItem> p, g;
    for (const auto& [pair, connected] : pred.pp_choices)
      if (connected) p.insert({0, pair, -1});
    for (const auto& pair : gold.pp_connected) g.insert({0, pair, -1});
    for (const auto& [pair, label] : pred.pr_choices)
      if (label != pr_null_label) p.insert({1, pair, label});
    for (const auto& [pair, label] : gold.pr_labels) g.insert({1, pair, label});
    edge += set_prf(std::move(p), std::move(g));
  }
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  auto put = [&](const char* key, const PRF& m) {
    j[key] = {{"precision", m.precision()}, {"recall", m.recall()},   {"f1", m.f1()},
              {"tp", m.tp},                 {"pred_count", m.pred_count},
              {"gold_count", m.gold_count}};
  };
  put("target", report.target);
  put("frame", report.frame);
  put("role", report.role);
  put("node", report.node);
  put("frame_module", report.frame_module);
  put("edge", report.edge);
  return j.dump(2);
}

}  // namespace fsp
