#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsp/metrics.hpp"
#include "fsp/model.hpp"

namespace fsp {

struct TrainConfig {
  int batch_size = 8;
  double lr_encoder = 1e-5;  // external-adapter parameters
  double lr_other = 1e-3;
  double grad_clip = 5.0;
  int early_stop_patience = 20;
  int max_epochs = 100;
  std::uint64_t seed = 1;
  ModelVariant variant = ModelVariant::Joint;
  double weight_decay = 0.0;
  double null_downsample = 1.0;  // keep probability for NULL-gold spans
};

struct LossBreakdown {
  double loss_n = 0.0;  // node typing + frame terms (and the semicrf NLL)
  double loss_e = 0.0;  // pp + pr edge terms
  double total() const { return loss_n + loss_e; }
};

struct TrainCounters {
  long dropped_spans = 0;       // gold spans beyond the candidate set
  long frame_collisions = 0;
  long role_collisions = 0;
  long unlicensed_gold = 0;     // gold frame outside its licensed set
  long empty_licenses = 0;
  long semicrf_dropped_roles = 0;
  long semicrf_skipped_tuples = 0;
};

/// Joint objective over one batch, built into the caller's graph. Terms for
/// heads the model does not own contribute exactly zero.
struct BatchLoss {
  ag::Var total;
  LossBreakdown values;
};
BatchLoss compute_loss(ag::Graph& g, JointModel& model,
                       const std::vector<const AnnotatedSentence*>& batch, bool training,
                       std::mt19937_64& rng, const TrainConfig& tc,
                       TrainCounters* counters = nullptr);

// Decoupled-weight-decay Adam over the parameters an `active` filter admits,
// with the adapter learning rate where `use_encoder_lr` says so.
class AdamW {
 public:
  AdamW(ag::ParameterStore& store, std::function<bool(const std::string&)> use_encoder_lr,
        std::function<bool(const std::string&)> active, double lr_encoder, double lr_other,
        double weight_decay);

  /// Scales gradients to the clip norm when they exceed it, applies one
  /// update, and reports the post-clip global norm. Caller zeroes grads.
  double clip_and_step(double grad_clip);

 private:
  struct Slot {
    ag::Parameter* p;
    double lr;
    ag::Mat m, v;
  };
  std::vector<Slot> slots_;
  double weight_decay_;
  int t_ = 0;
};

struct EpochLog {
  int stage = 0;
  int epoch = 0;
  double loss_n = 0.0;
  double loss_e = 0.0;
  double dev_target_f1 = 0.0;
  double dev_frame_f1 = 0.0;
  double dev_role_f1 = 0.0;
};

struct StageResult {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_metric = 0.0;
  std::string selection_metric;  // "role" | "frame" | "target"
};

// A trained variant: one stage for everything except node+edge, which keeps
// its node stage first and edge stage second.
struct TrainedModel {
  ModelConfig config;
  ModelVariant variant = ModelVariant::Joint;
  std::vector<std::unique_ptr<JointModel>> stages;

  JointModel& primary() { return *stages.front(); }
  const JointModel& primary() const { return *stages.front(); }
  JointModel::SentenceAnalysis analyze(const AnnotatedSentence& s) const;
  std::vector<FrameTuple> parse(const AnnotatedSentence& s) const { return analyze(s).tuples; }
};

TrainedModel build_variant(const ModelConfig& mc, ModelVariant variant,
                           const FrameOntology& ontology, const Vocabulary& vocab,
                           std::uint64_t seed);

/// Copies of the inputs with predicted tuples in place of gold ones.
std::vector<AnnotatedSentence> parse_corpus(const TrainedModel& model,
                                            const std::vector<AnnotatedSentence>& input);

/// End-to-end plus module-level scores against gold.
EvalReport evaluate_model(const TrainedModel& model,
                          const std::vector<AnnotatedSentence>& gold);

/// Dev-selection metric for a head set: role F1 when roles are produced,
/// else frame F1, else target F1.
const char* selection_metric_name(const HeadSet& heads);

struct TrainOutcome {
  TrainedModel model;
  std::vector<StageResult> stage_results;
  TrainCounters counters;
};

/// Builds the variant's stages and trains them in order. The piece provider
/// is installed on every stage's encoder and is required for (and only used
/// by) the external-contextual encoder kind.
TrainOutcome train(const std::vector<AnnotatedSentence>& train_set,
                   const std::vector<AnnotatedSentence>& dev_set, const FrameOntology& ontology,
                   const ModelConfig& mc, const TrainConfig& tc,
                   const std::function<void(const EpochLog&)>& on_epoch = {},
                   PieceProvider piece_provider = nullptr);

// Checkpoint directory: meta.json (variant + model config + digests + best
// metric), params.bin per stage, vocab.txt, ontology.json, metrics.jsonl,
// and a verbatim copy of the run config when one is supplied.
void save_checkpoint(const std::string& dir, const TrainOutcome& outcome,
                     const std::string& config_echo_json = "");
TrainedModel load_checkpoint(const std::string& dir);

std::string model_config_to_json(const ModelConfig& mc);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace fsp
