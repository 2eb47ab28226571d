#include "fsp/decoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace fsp {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<DecodedPredicate> decode_targets(const ParseGraph& graph, const DecodeFlags& flags,
                                             DecodeCounters* counters) {
  const int k = static_cast<int>(graph.nodes.size());
  std::vector<DecodedPredicate> out;
  for (int i = 0; i < k; ++i)
    if (is_full_predicate(graph.nodes[i].type))
      out.push_back(DecodedPredicate{{graph.nodes[i].span}, {i}});

  UnionFind uf(k);
  for (const auto& [pair, dist] : graph.pp_edges) {
    const auto& [i, j] = pair;
    if (i < 0 || j < 0 || i >= k || j >= k || i == j)
      throw std::logic_error("pp edge with bad endpoints");
    if (!is_partial_predicate(graph.nodes[i].type) ||
        !is_partial_predicate(graph.nodes[j].type))
      throw std::logic_error("pp edge between non-partial nodes");
    if (dist(0) > dist(1)) uf.unite(i, j);  // ties stay disconnected
  }
  std::map<int, std::vector<int>> components;
  for (int i = 0; i < k; ++i)
    if (is_partial_predicate(graph.nodes[i].type)) components[uf.find(i)].push_back(i);

  for (auto& [root, members] : components) {
    if (members.size() == 1) {
      if (counters) ++counters->singleton_pprds;
      if (!flags.promote_singleton_pprd) continue;
    }
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      return graph.nodes[a].span < graph.nodes[b].span;
    });
    DecodedPredicate pred;
    for (int m : members) pred.pieces.push_back(graph.nodes[m].span);
    pred.source_nodes = members;
    bool overlap = false;
    for (std::size_t a = 0; a + 1 < pred.pieces.size(); ++a)
      if (pred.pieces[a].end >= pred.pieces[a + 1].start) overlap = true;
    if (overlap) {
      // Pieces of one predicate must be disjoint for the output tuple to be
      // well formed; distinct predicates may still overlap each other.
      if (counters) ++counters->overlapping_components;
      continue;
    }
    out.push_back(std::move(pred));
  }

  std::vector<DecodedPredicate> deduped;
  std::map<std::vector<Span>, bool> seen;
  for (auto& p : out) {
    if (seen.contains(p.pieces)) continue;
    seen[p.pieces] = true;
    deduped.push_back(std::move(p));
  }
  return deduped;
}

int decode_frame(const DecodedPredicate& predicate, const ParseGraph& graph) {
  if (predicate.source_nodes.empty()) throw std::logic_error("predicate without source nodes");
  Eigen::VectorXd sum;
  for (int i : predicate.source_nodes) {
    const auto& dist = graph.nodes[i].frame_dist;
    if (!dist) throw std::logic_error("source node missing frame distribution");
    if (sum.size() == 0)
      sum = *dist;
    else
      sum += *dist;
  }
  int best = 0;
  for (int f = 1; f < sum.size(); ++f)
    if (sum(f) > sum(best)) best = f;  // strict: ties keep the lower index
  return best;
}

std::vector<RoleAssignment> decode_roles(const DecodedPredicate& predicate, int frame_idx,
                                         const ParseGraph& graph, const FrameOntology& ontology,
                                         const std::vector<std::string>& role_labels) {
  if (frame_idx < 0 || frame_idx >= ontology.num_frames())
    throw std::logic_error("decode_roles: frame outside ontology");
  const int null_id = static_cast<int>(role_labels.size());
  std::vector<int> allowed;
  for (const std::string& r : ontology.roles_of(frame_idx)) {
    auto it = std::lower_bound(role_labels.begin(), role_labels.end(), r);
    if (it == role_labels.end() || *it != r)
      throw std::logic_error("frame role missing from global union: " + r);
    allowed.push_back(static_cast<int>(it - role_labels.begin()));
  }
  std::sort(allowed.begin(), allowed.end());

  std::vector<RoleAssignment> out;
  for (int r = 0; r < static_cast<int>(graph.nodes.size()); ++r) {
    if (!is_role(graph.nodes[r].type)) continue;
    Eigen::VectorXd mean;
    for (int p : predicate.source_nodes) {
      auto it = graph.pr_edges.find({p, r});
      if (it == graph.pr_edges.end())
        throw std::logic_error("missing pr edge distribution");
      if (mean.size() == 0)
        mean = it->second;
      else
        mean += it->second;
    }
    mean /= static_cast<double>(predicate.source_nodes.size());
    // NULL wins ties against any role; among roles, the lower global label
    // index wins (allowed is ascending and comparisons are strict).
    int best = null_id;
    for (int label : allowed)
      if (mean(label) > mean(null_id) && (best == null_id || mean(label) > mean(best)))
        best = label;
    if (best != null_id)
      out.push_back(RoleAssignment{role_labels[best], graph.nodes[r].span});
  }
  return out;
}

}  // namespace fsp
