#pragma once

#include <string>
#include <vector>

#include "fsp/corpus.hpp"
#include "fsp/encoder.hpp"

namespace fsp {

// Segment scores for a zeroth-order semi-Markov CRF. Columns follow the
// enumerate_spans(n, L) order, so column col(start, len) holds the score of
// the segment covering tokens [start, start+len-1] and rows are labels; the
// last label is the outside label O.
struct SegmentLattice {
  int n = 0;
  int L = 1;
  Eigen::MatrixXd scores;  // num_labels x span_count

  SegmentLattice() = default;
  SegmentLattice(int n_, int L_, int num_labels);

  int num_labels() const { return static_cast<int>(scores.rows()); }
  int max_len(int start) const { return std::min(L, n - start); }
  int col(int start, int len) const;
  double score(int start, int len, int label) const { return scores(label, col(start, len)); }
  double& score(int start, int len, int label) { return scores(label, col(start, len)); }
};

struct LabeledSegment {
  int start = 0;
  int len = 1;
  int label = 0;
  auto operator<=>(const LabeledSegment&) const = default;
};

// Ordered labeled segments exactly covering tokens 0..n-1.
using Segmentation = std::vector<LabeledSegment>;

bool valid_segmentation(const Segmentation& seg, int n, int L, int num_labels);
double segmentation_score(const SegmentLattice& lattice, const Segmentation& seg);

/// log of the partition sum over all valid labeled segmentations.
double forward_logZ(const SegmentLattice& lattice);

/// Argmax segmentation; ties broken toward the shorter first segment, then
/// the lower label index, applied left to right.
Segmentation viterbi(const SegmentLattice& lattice);

/// Posterior segment probabilities, same layout as lattice.scores.
Eigen::MatrixXd marginals(const SegmentLattice& lattice);

/// logZ minus the gold segmentation score. Throws on an invalid gold.
double semicrf_nll(const SegmentLattice& lattice, const Segmentation& gold);

/// d nll / d scores = marginals - gold indicator.
Eigen::MatrixXd semicrf_nll_grad(const SegmentLattice& lattice, const Segmentation& gold);

/// Autograd node over a scores matrix laid out like SegmentLattice.scores.
ag::Var semicrf_nll_node(ag::Var scores, int n, int L, const Segmentation& gold);

// One SRL training or decoding instance: the label space restricted to the
// tuple's frame, and the gold role spans as a segmentation when training.
struct SemiCrfInstance {
  std::vector<int> local_to_global;  // local label -> global role id; O last
  Segmentation gold;                 // empty outside training
  int dropped_roles = 0;             // overlaps and over-length spans
  bool skipped = false;              // no usable predicate pieces
};

SemiCrfInstance build_semicrf_instance(const FrameTuple& tuple, int n, int L,
                                       const FrameOntology& ontology,
                                       const std::vector<std::string>& role_labels,
                                       bool with_gold);

// Per-label linear scorer over [g_span; g_pred; g_span*g_pred] pair features,
// conditioning each lattice on its predicate.
class SemiCrfHead {
 public:
  SemiCrfHead(const EncoderConfig& cfg, int num_role_labels, ag::ParameterStore& store,
              std::mt19937_64& rng, const std::string& prefix = "semicrf");

  /// (num_role_labels + 1) x span_count scores; rows are global role ids
  /// with O last; pred_piece_spans index into the enumerated span list.
  ag::Var segment_scores(ag::Graph& g, ag::Var G,
                         const std::vector<int>& pred_piece_spans) const;

  /// Row-gathered view of a score matrix for a restricted label list.
  static ag::Var restrict_labels(ag::Graph& g, ag::Var scores,
                                 const std::vector<int>& label_rows);

  int o_label() const { return num_role_labels_; }

 private:
  int num_role_labels_;
  ag::Parameter* W_;
  ag::Parameter* b_;
};

/// Viterbi roles for one tuple with a gold predicate and frame. Upstream
/// supplies the restricted score matrix already (rows follow
/// instance.local_to_global plus O last).
std::vector<RoleAssignment> semicrf_decode_roles(const Eigen::MatrixXd& restricted_scores,
                                                 int n, int L,
                                                 const SemiCrfInstance& instance,
                                                 const std::vector<std::string>& role_labels);

}  // namespace fsp
