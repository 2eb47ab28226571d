#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "fsp/corpus.hpp"
#include "fsp/node_builder.hpp"

namespace fsp {

struct GraphNode {
  Span span;
  NodeType type = NodeType::NullSpan;
  std::optional<Eigen::VectorXd> frame_dist;  // probabilities over all frames
};

// Scored graph over typed span nodes. Edge keys are node indices; pp keys
// are canonical (i < j) pairs of partial-predicate nodes, pr keys run from a
// predicate-typed node to a role-typed node. Edge vectors are probabilities:
// pp = (connected, null), pr over the global role union with NULL last.
struct ParseGraph {
  std::vector<GraphNode> nodes;
  std::map<std::pair<int, int>, Eigen::Vector2d> pp_edges;
  std::map<std::pair<int, int>, Eigen::VectorXd> pr_edges;
};

struct DecodedPredicate {
  std::vector<Span> pieces;        // sorted by start
  std::vector<int> source_nodes;   // graph node indices it was assembled from
};

struct DecodeFlags {
  bool promote_singleton_pprd = false;
};

struct DecodeCounters {
  int overlapping_components = 0;  // components whose pieces overlap
  int singleton_pprds = 0;         // discarded (or promoted) lone partials
};

/// Full-predicate nodes become single-piece predicates; partial-predicate
/// nodes connected by argmax-Connected edges form multi-piece predicates
/// (components of size >= 2). Results deduplicated by piece list.
std::vector<DecodedPredicate> decode_targets(const ParseGraph& graph,
                                             const DecodeFlags& flags = {},
                                             DecodeCounters* counters = nullptr);

/// Frame index maximizing the summed frame distribution over source nodes;
/// ties resolve to the lowest frame index.
int decode_frame(const DecodedPredicate& predicate, const ParseGraph& graph);

/// Role assignments for one predicate under its decoded frame: per role
/// node, the argmax of the mean pr distribution restricted to the frame's
/// roles plus NULL; NULL wins ties and suppresses the assignment.
std::vector<RoleAssignment> decode_roles(const DecodedPredicate& predicate, int frame_idx,
                                         const ParseGraph& graph, const FrameOntology& ontology,
                                         const std::vector<std::string>& role_labels);

}  // namespace fsp
