#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fsp/corpus.hpp"
#include "fsp/encoder.hpp"
#include "fsp/mlp.hpp"

namespace fsp {

// The eight span node types. Enum order is the softmax index order.
enum class NodeType {
  FullPredicate = 0,
  PartialPredicate = 1,
  Role = 2,
  FullPartialPredicate = 3,
  FullPredicateRole = 4,
  PartialPredicateRole = 5,
  FullPartialPredicateRole = 6,
  NullSpan = 7,
};
inline constexpr int kNumNodeTypes = 8;

bool is_full_predicate(NodeType t);
bool is_partial_predicate(NodeType t);
bool is_role(NodeType t);
inline bool is_predicate(NodeType t) { return is_full_predicate(t) || is_partial_predicate(t); }
NodeType node_type_from_flags(bool full_predicate, bool partial_predicate, bool role);
const char* node_type_name(NodeType t);

/// Licensed frame indices for the pseudo lexical unit of a span, or nullptr
/// when the lexicon has no entry for the span's space-joined lemmas.
const std::vector<int>* license_frames(const Span& span, const std::vector<std::string>& lemmas,
                                       const FrameOntology& ontology);

// Gold supervision for one sentence over a fixed candidate span list, plus
// coverage counters for annotations the candidate set cannot express.
struct GoldAnnotations {
  std::vector<int> node_labels;   // per span, NodeType as int
  std::vector<int> frame_labels;  // per span, frame index, -1 when untargeted
  std::set<std::pair<int, int>> pp_connected;       // canonical (i, j), i < j
  std::map<std::pair<int, int>, int> pr_labels;     // non-NULL role edges only
  int dropped_spans = 0;     // gold spans absent from the candidate list
  int frame_collisions = 0;  // span shared by tuples with different frames
  int role_collisions = 0;   // pair annotated with two different role labels
};

GoldAnnotations build_gold(const AnnotatedSentence& sentence, const std::vector<Span>& spans,
                           const FrameOntology& ontology,
                           const std::vector<std::string>& role_labels);

// Node-type and frame classifier heads over span representations.
class NodeTyper {
 public:
  NodeTyper(const EncoderConfig& cfg, int num_frames, ag::ParameterStore& store,
            std::mt19937_64& rng, const std::string& prefix = "node");

  /// Log-probabilities over the 8 node types, 8 x k.
  ag::Var type_log_probs(ag::Graph& g, ag::Var G, bool training, std::mt19937_64& rng) const;

  /// Raw frame logits, F x k.
  ag::Var frame_logits(ag::Graph& g, ag::Var G, bool training, std::mt19937_64& rng) const;

  /// Masked log-softmax per column. licensed[j] == nullptr means no mask;
  /// an empty licensed set also falls back to no mask, counted in
  /// empty_license_warnings when given.
  ag::Var masked_frame_log_probs(ag::Graph& g, ag::Var frame_logits,
                                 const std::vector<const std::vector<int>*>& licensed,
                                 int* empty_license_warnings = nullptr) const;

  int num_frames() const { return frame_head_.out_dim(); }

 private:
  MlpHead type_head_;
  MlpHead frame_head_;
  double dropout_;
};

}  // namespace fsp
