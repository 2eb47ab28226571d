#include "fsp/edge_builder.hpp"

#include <stdexcept>

namespace fsp {

CandidatePairs build_candidate_pairs(const std::vector<NodeType>& types) {
  CandidatePairs out;
  const int k = static_cast<int>(types.size());
  std::vector<int> pprds, preds, roles;
  for (int i = 0; i < k; ++i) {
    if (is_partial_predicate(types[i])) pprds.push_back(i);
    if (is_predicate(types[i])) preds.push_back(i);
    if (is_role(types[i])) roles.push_back(i);
  }
  for (std::size_t a = 0; a < pprds.size(); ++a)
    for (std::size_t b = a + 1; b < pprds.size(); ++b)
      out.pp.emplace_back(pprds[a], pprds[b]);
  for (int p : preds)
    for (int r : roles) out.pr.emplace_back(p, r);
  return out;
}

EdgeScorer::EdgeScorer(const EncoderConfig& cfg, int num_role_labels, ag::ParameterStore& store,
                       std::mt19937_64& rng, const std::string& prefix)
    : pp_head_(prefix + "/pp", 3 * cfg.span_rep_dim(), cfg.mlp_hidden, 2, store, rng),
      pr_head_(prefix + "/pr", 3 * cfg.span_rep_dim(), cfg.mlp_hidden, num_role_labels + 1,
               store, rng),
      dropout_(cfg.dropout_mlp) {}

ag::Var EdgeScorer::pair_features(ag::Graph&, ag::Var G,
                                  const std::vector<std::pair<int, int>>& pairs) const {
  if (pairs.empty()) throw std::logic_error("pair_features: no pairs");
  std::vector<int> lhs, rhs;
  lhs.reserve(pairs.size());
  rhs.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    lhs.push_back(i);
    rhs.push_back(j);
  }
  ag::Var gi = ag::cols(G, std::move(lhs));
  ag::Var gj = ag::cols(G, std::move(rhs));
  return ag::vconcat({gi, gj, ag::cmul(gi, gj)});
}

ag::Var EdgeScorer::pp_log_probs(ag::Graph& g, ag::Var G,
                                 const std::vector<std::pair<int, int>>& pairs, bool training,
                                 std::mt19937_64& rng) const {
  for (const auto& [i, j] : pairs)
    if (i == j) throw std::logic_error("pp edge with identical spans");
  return ag::log_softmax_cols(
      pp_head_.logits(g, pair_features(g, G, pairs), training, dropout_, rng));
}

ag::Var EdgeScorer::pr_log_probs(ag::Graph& g, ag::Var G,
                                 const std::vector<std::pair<int, int>>& pairs, bool training,
                                 std::mt19937_64& rng) const {
  return ag::log_softmax_cols(
      pr_head_.logits(g, pair_features(g, G, pairs), training, dropout_, rng));
}

}  // namespace fsp
