#pragma once

#include <utility>
#include <vector>

#include "fsp/encoder.hpp"
#include "fsp/mlp.hpp"
#include "fsp/node_builder.hpp"

namespace fsp {

// Candidate edge index pairs over a typed span list. pp pairs are unordered
// partial-predicate pairs stored canonically (i < j in span order); pr pairs
// run from every predicate-typed span to every role-typed span.
struct CandidatePairs {
  std::vector<std::pair<int, int>> pp;
  std::vector<std::pair<int, int>> pr;
};

CandidatePairs build_candidate_pairs(const std::vector<NodeType>& types);

inline constexpr int kPpConnected = 0;
inline constexpr int kPpNull = 1;

// MLP scorers over [g_i; g_j; g_i*g_j] pair features. The pr label space is
// the global role union plus NULL as the final index.
class EdgeScorer {
 public:
  EdgeScorer(const EncoderConfig& cfg, int num_role_labels, ag::ParameterStore& store,
             std::mt19937_64& rng, const std::string& prefix = "edge");

  /// 3*span_rep_dim x pairs.size()
  ag::Var pair_features(ag::Graph& g, ag::Var G,
                        const std::vector<std::pair<int, int>>& pairs) const;

  /// 2 x m log-probabilities, row kPpConnected then kPpNull.
  ag::Var pp_log_probs(ag::Graph& g, ag::Var G, const std::vector<std::pair<int, int>>& pairs,
                       bool training, std::mt19937_64& rng) const;

  /// (num_role_labels + 1) x m log-probabilities, NULL last.
  ag::Var pr_log_probs(ag::Graph& g, ag::Var G, const std::vector<std::pair<int, int>>& pairs,
                       bool training, std::mt19937_64& rng) const;

  int pr_null_label() const { return pr_head_.out_dim() - 1; }

 private:
  MlpHead pp_head_;
  MlpHead pr_head_;
  double dropout_;
};

}  // namespace fsp
