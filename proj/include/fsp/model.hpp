#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsp/corpus.hpp"
#include "fsp/decoder.hpp"
#include "fsp/edge_builder.hpp"
#include "fsp/encoder.hpp"
#include "fsp/node_builder.hpp"
#include "fsp/semicrf.hpp"

namespace fsp {

enum class ModelVariant {
  Joint,
  Predicate,
  Frame,
  Role,
  PredicateFrame,
  FrameRole,
  NodeEdge,
  SemiCrf,
};

std::string variant_name(ModelVariant v);
std::optional<ModelVariant> variant_from_string(const std::string& name);

// Which classifier heads a model trains and uses, how gold node labels are
// projected for its node-type loss, and which inputs inference consumes
// from upstream instead of predicting.
struct HeadSet {
  bool node_types = false;
  bool frames = false;
  bool pp = false;
  bool pr = false;
  bool semicrf = false;
  bool clear_role_bit = false;        // drop the role component from gold types
  bool clear_predicate_bits = false;  // drop both predicate components
  bool gold_predicates_input = false;
  bool gold_frames_input = false;
};

/// One entry per training stage: single-stage for every variant except
/// node+edge, which trains its node heads and edge heads separately.
std::vector<HeadSet> stage_head_sets(ModelVariant v);

struct ModelConfig {
  EncoderConfig encoder;
  bool lu_mask = true;             // lexical-unit mask at inference
  bool mask_in_training = true;    // and inside the frame loss
  bool promote_singleton_pprd = false;
};

// One encoder plus the heads a stage needs, with end-to-end inference for
// the stage's variant semantics. Heads are built in groups (the node typer
// bundles the type and frame heads, the edge scorer bundles pp and pr), so a
// stage can register slightly more parameters than it trains; the optimizer
// filter keeps the unused ones untouched. Parameters live in an owned store
// keyed by stable names, so checkpoints restore by name.
class JointModel {
 public:
  JointModel(const ModelConfig& cfg, const HeadSet& heads, FrameOntology ontology,
             Vocabulary vocab, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  const HeadSet& heads() const { return heads_; }
  const FrameOntology& ontology() const { return ontology_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<std::string>& role_labels() const { return role_labels_; }
  ag::ParameterStore& params() { return store_; }
  const ag::ParameterStore& params() const { return store_; }
  Encoder& encoder() { return *encoder_; }
  const Encoder& encoder() const { return *encoder_; }
  const NodeTyper& node_typer() const;
  const EdgeScorer& edge_scorer() const;
  const SemiCrfHead& semicrf_head() const;
  int pr_null_label() const { return static_cast<int>(role_labels_.size()); }

  std::vector<Span> candidate_spans(int n) const;
  /// Sentence lemmas, falling back to the rule lemmatizer when absent.
  std::vector<std::string> effective_lemmas(const AnnotatedSentence& s) const;

  ag::Var span_reps(ag::Graph& g, const AnnotatedSentence& s, const std::vector<Span>& spans,
                    bool training, std::mt19937_64& rng) const;
  ag::Var node_log_probs(ag::Graph& g, ag::Var G, bool training, std::mt19937_64& rng) const;

  /// Per-column licensed frame sets for selected spans; nullptr = no mask.
  /// Honors apply_mask == false by returning all nullptr.
  std::vector<const std::vector<int>*> licenses_for(const std::vector<Span>& spans,
                                                    const std::vector<int>& span_idx,
                                                    const std::vector<std::string>& lemmas,
                                                    bool apply_mask) const;
  /// Masked frame log-probs for the selected span columns of G.
  ag::Var frame_log_probs(ag::Graph& g, ag::Var G, const std::vector<int>& span_idx,
                          const std::vector<const std::vector<int>*>& licenses, bool training,
                          std::mt19937_64& rng, int* empty_license_warnings = nullptr) const;

  // Inference products for one sentence: the scored graph, final tuples,
  // and per-module argmax choices for module-level scoring.
  struct SentenceAnalysis {
    std::vector<Span> spans;
    std::vector<int> node_argmax;  // NodeType per span (NullSpan when untyped)
    ParseGraph graph;
    std::vector<FrameTuple> tuples;
    std::vector<std::pair<int, int>> frame_choices;
    std::vector<std::pair<std::pair<int, int>, bool>> pp_choices;
    std::vector<std::pair<std::pair<int, int>, int>> pr_choices;
    int missing_pieces = 0;  // gold-input pieces outside the candidate set
  };

  /// Runs the variant end to end. When edge_model is given, its edge heads
  /// score the pairs (the two-stage composition); otherwise this model's.
  SentenceAnalysis analyze(const AnnotatedSentence& s,
                           const JointModel* edge_model = nullptr) const;
  std::vector<FrameTuple> parse(const AnnotatedSentence& s) const { return analyze(s).tuples; }

 private:
  ModelConfig cfg_;
  HeadSet heads_;
  FrameOntology ontology_;
  Vocabulary vocab_;
  std::vector<std::string> role_labels_;
  ag::ParameterStore store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<NodeTyper> typer_;
  std::unique_ptr<EdgeScorer> edges_;
  std::unique_ptr<SemiCrfHead> semicrf_;
};

/// Gold node labels projected per a head set's clear_* flags.
std::vector<int> project_node_labels(const std::vector<int>& labels, const HeadSet& heads);

}  // namespace fsp
