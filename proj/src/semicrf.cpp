#include "fsp/semicrf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fsp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

SegmentLattice::SegmentLattice(int n_, int L_, int num_labels) : n(n_), L(L_) {
  if (n < 1 || L < 1 || num_labels < 1) throw std::logic_error("lattice dimensions");
  scores = Eigen::MatrixXd::Zero(num_labels, enumerate_spans(n, L).size());
}

int SegmentLattice::col(int start, int len) const {
  if (start < 0 || start >= n || len < 1 || len > max_len(start))
    throw std::out_of_range("segment [" + std::to_string(start) + ", len " +
                            std::to_string(len) + ") outside an n=" + std::to_string(n) +
                            " L=" + std::to_string(L) + " lattice");
  // Spans sorted by (start, end): starts before `start` contribute
  // min(L, n - s) columns each.
  int off = 0;
  for (int s = 0; s < start; ++s) off += std::min(L, n - s);
  return off + (len - 1);
}

bool valid_segmentation(const Segmentation& seg, int n, int L, int num_labels) {
  int pos = 0;
  for (const LabeledSegment& s : seg) {
    if (s.start != pos || s.len < 1 || s.len > L) return false;
    if (s.label < 0 || s.label >= num_labels) return false;
    pos += s.len;
  }
  return pos == n;
}

double segmentation_score(const SegmentLattice& lattice, const Segmentation& seg) {
  double total = 0.0;
  for (const LabeledSegment& s : seg) total += lattice.score(s.start, s.len, s.label);
  return total;
}

double forward_logZ(const SegmentLattice& lattice) {
  const int n = lattice.n;
  std::vector<double> alpha(n + 1, kNegInf);
  alpha[0] = 0.0;
  for (int e = 1; e <= n; ++e) {
    std::vector<double> terms;
    for (int len = 1; len <= std::min(lattice.L, e); ++len) {
      const int s = e - len;
      if (alpha[s] == kNegInf) continue;
      for (int l = 0; l < lattice.num_labels(); ++l)
        terms.push_back(alpha[s] + lattice.score(s, len, l));
    }
    alpha[e] = ag::logsumexp(Eigen::Map<const Eigen::VectorXd>(
        terms.data(), static_cast<Eigen::Index>(terms.size())));
  }
  return alpha[n];
}

Segmentation viterbi(const SegmentLattice& lattice) {
  const int n = lattice.n;
  // Suffix-best DP so the left-to-right reconstruction can prefer the
  // shorter first segment, then the lower label, among ties.
  std::vector<double> best(n + 1, kNegInf);
  best[n] = 0.0;
  for (int s = n - 1; s >= 0; --s)
    for (int len = 1; len <= lattice.max_len(s); ++len)
      for (int l = 0; l < lattice.num_labels(); ++l)
        best[s] = std::max(best[s], lattice.score(s, len, l) + best[s + len]);
  Segmentation out;
  int pos = 0;
  while (pos < n) {
    bool found = false;
    for (int len = 1; len <= lattice.max_len(pos) && !found; ++len)
      for (int l = 0; l < lattice.num_labels() && !found; ++l)
        if (lattice.score(pos, len, l) + best[pos + len] == best[pos]) {
          out.push_back(LabeledSegment{pos, len, l});
          pos += len;
          found = true;
        }
    if (!found) throw std::logic_error("viterbi reconstruction failed");
  }
  return out;
}

Eigen::MatrixXd marginals(const SegmentLattice& lattice) {
  const int n = lattice.n;
  std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
  alpha[0] = 0.0;
  for (int e = 1; e <= n; ++e) {
    std::vector<double> terms;
    for (int len = 1; len <= std::min(lattice.L, e); ++len)
      for (int l = 0; l < lattice.num_labels(); ++l)
        terms.push_back(alpha[e - len] + lattice.score(e - len, len, l));
    alpha[e] = ag::logsumexp(Eigen::Map<const Eigen::VectorXd>(
        terms.data(), static_cast<Eigen::Index>(terms.size())));
  }
  beta[n] = 0.0;
  for (int s = n - 1; s >= 0; --s) {
    std::vector<double> terms;
    for (int len = 1; len <= lattice.max_len(s); ++len)
      for (int l = 0; l < lattice.num_labels(); ++l)
        terms.push_back(lattice.score(s, len, l) + beta[s + len]);
    beta[s] = ag::logsumexp(Eigen::Map<const Eigen::VectorXd>(
        terms.data(), static_cast<Eigen::Index>(terms.size())));
  }
  const double logZ = alpha[n];
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(lattice.num_labels(), lattice.scores.cols());
  for (int s = 0; s < n; ++s)
    for (int len = 1; len <= lattice.max_len(s); ++len)
      for (int l = 0; l < lattice.num_labels(); ++l)
        m(l, lattice.col(s, len)) =
            std::exp(alpha[s] + lattice.score(s, len, l) + beta[s + len] - logZ);
  return m;
}

double semicrf_nll(const SegmentLattice& lattice, const Segmentation& gold) {
  if (!valid_segmentation(gold, lattice.n, lattice.L, lattice.num_labels()))
    throw std::logic_error("invalid gold segmentation");
  return forward_logZ(lattice) - segmentation_score(lattice, gold);
}

Eigen::MatrixXd semicrf_nll_grad(const SegmentLattice& lattice, const Segmentation& gold) {
  Eigen::MatrixXd g = marginals(lattice);
  for (const LabeledSegment& s : gold) g(s.label, lattice.col(s.start, s.len)) -= 1.0;
  return g;
}

ag::Var semicrf_nll_node(ag::Var scores, int n, int L, const Segmentation& gold) {
  SegmentLattice lattice(n, L, scores.rows());
  if (lattice.scores.cols() != scores.cols())
    throw std::logic_error("semicrf_nll_node: score column count mismatch");
  lattice.scores = scores.value();
  ag::Mat v(1, 1);
  v(0, 0) = semicrf_nll(lattice, gold);
  auto grad = std::make_shared<Eigen::MatrixXd>(semicrf_nll_grad(lattice, gold));
  return scores.g->make(std::move(v), [scores, grad](ag::Graph& g, const ag::Mat& go) {
    g.accum(scores, go(0, 0) * (*grad));
  });
}

SemiCrfInstance build_semicrf_instance(const FrameTuple& tuple, int n, int L,
                                       const FrameOntology& ontology,
                                       const std::vector<std::string>& role_labels,
                                       bool with_gold) {
  SemiCrfInstance inst;
  auto global_role_id = [&](const std::string& name) {
    auto it = std::lower_bound(role_labels.begin(), role_labels.end(), name);
    if (it == role_labels.end() || *it != name)
      throw std::logic_error("role label missing from global union: " + name);
    return static_cast<int>(it - role_labels.begin());
  };
  const int frame = ontology.frame_index(tuple.frame);
  if (frame < 0) throw std::logic_error("unknown frame: " + tuple.frame);
  std::vector<int> locals;
  for (const std::string& r : ontology.roles_of(frame)) locals.push_back(global_role_id(r));
  std::sort(locals.begin(), locals.end());
  locals.erase(std::unique(locals.begin(), locals.end()), locals.end());
  inst.local_to_global = locals;
  inst.local_to_global.push_back(static_cast<int>(role_labels.size()));  // O row

  if (!with_gold) return inst;

  const int o = static_cast<int>(locals.size());
  auto local_of = [&](int global) {
    auto it = std::lower_bound(locals.begin(), locals.end(), global);
    if (it == locals.end() || *it != global)
      throw std::logic_error("gold role outside the frame's role set");
    return static_cast<int>(it - locals.begin());
  };
  // Overlap policy: keep the longer role; over-length roles cannot become
  // segments at all.
  std::vector<RoleAssignment> kept;
  std::vector<RoleAssignment> sorted_roles = tuple.roles;
  std::stable_sort(sorted_roles.begin(), sorted_roles.end(),
                   [](const RoleAssignment& a, const RoleAssignment& b) {
                     return a.value.length() > b.value.length();
                   });
  for (const RoleAssignment& r : sorted_roles) {
    if (r.value.length() > L) {
      ++inst.dropped_roles;
      continue;
    }
    bool clash = false;
    for (const RoleAssignment& k : kept)
      if (r.value.overlaps(k.value)) clash = true;
    if (clash) {
      ++inst.dropped_roles;
      continue;
    }
    kept.push_back(r);
  }
  std::sort(kept.begin(), kept.end(),
            [](const RoleAssignment& a, const RoleAssignment& b) { return a.value < b.value; });
  int pos = 0;
  auto pad_o = [&](int upto) {
    while (pos < upto) {
      const int len = std::min(L, upto - pos);
      inst.gold.push_back(LabeledSegment{pos, len, o});
      pos += len;
    }
  };
  for (const RoleAssignment& r : kept) {
    pad_o(r.value.start);
    inst.gold.push_back(LabeledSegment{r.value.start, r.value.length(), local_of(global_role_id(r.role_name))});
    pos = r.value.end + 1;
  }
  pad_o(n);
  return inst;
}

SemiCrfHead::SemiCrfHead(const EncoderConfig& cfg, int num_role_labels,
                         ag::ParameterStore& store, std::mt19937_64& rng,
                         const std::string& prefix)
    : num_role_labels_(num_role_labels) {
  W_ = store.add(prefix + "/W", num_role_labels + 1, 3 * cfg.span_rep_dim(), ag::Init::Glorot,
                 rng);
  b_ = store.add(prefix + "/b", num_role_labels + 1, 1, ag::Init::Zero, rng);
}

ag::Var SemiCrfHead::segment_scores(ag::Graph& g, ag::Var G,
                                    const std::vector<int>& pred_piece_spans) const {
  if (pred_piece_spans.empty()) throw std::logic_error("segment_scores: no predicate pieces");
  const int k = G.cols();
  const int m = static_cast<int>(pred_piece_spans.size());
  ag::Var pieces = ag::cols(G, pred_piece_spans);
  ag::Var pred = ag::matmul(pieces, g.constant(ag::Mat::Constant(m, 1, 1.0 / m)));
  ag::Var pred_b = ag::matmul(pred, g.constant(ag::Mat::Ones(1, k)));
  ag::Var feats = ag::vconcat({G, pred_b, ag::cmul(G, pred_b)});
  return ag::add_colwise(ag::matmul(g.param(*W_), feats), g.param(*b_));
}

ag::Var SemiCrfHead::restrict_labels(ag::Graph& g, ag::Var scores,
                                     const std::vector<int>& label_rows) {
  (void)g;
  return ag::transpose(ag::cols(ag::transpose(scores), label_rows));
}

std::vector<RoleAssignment> semicrf_decode_roles(const Eigen::MatrixXd& restricted_scores,
                                                 int n, int L,
                                                 const SemiCrfInstance& instance,
                                                 const std::vector<std::string>& role_labels) {
  SegmentLattice lattice(n, L, static_cast<int>(restricted_scores.rows()));
  if (lattice.scores.cols() != restricted_scores.cols())
    throw std::logic_error("semicrf_decode_roles: score column count mismatch");
  lattice.scores = restricted_scores;
  const int o = static_cast<int>(instance.local_to_global.size()) - 1;
  std::vector<RoleAssignment> out;
  for (const LabeledSegment& s : viterbi(lattice)) {
    if (s.label == o) continue;
    const int global = instance.local_to_global[s.label];
    out.push_back(RoleAssignment{role_labels[global], Span{s.start, s.start + s.len - 1}});
  }
  return out;
}

}  // namespace fsp
