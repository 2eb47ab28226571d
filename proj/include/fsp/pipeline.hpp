#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fsp/metrics.hpp"
#include "fsp/training.hpp"

namespace fsp {

// One row of the system-comparison table: a named system (single model or a
// chain of stage models) and its end-to-end scores on the evaluation split.
struct ComparisonRow {
  std::string name;
  std::vector<ModelVariant> stages;
  EvalReport report;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  // Median parse throughput in sentences/second, measured on the evaluation
  // split. "joint" is the joint model; "semicrf_pipeline" is the two-stage
  // predicate-frame + semi-Markov CRF system.
  double joint_sents_per_sec = 0.0;
  double semicrf_pipeline_sents_per_sec = 0.0;
};

// The fixed list of systems the harness compares. Pipelines are written with
// '+' between separately trained stages and 'o' for stages trained as one
// model (e.g. "Predicate o Frame + Role" trains span/predicate and frame heads
// together, then a role-only model on top of its output).
std::vector<ComparisonRow> comparison_systems();

// Trains every distinct stage variant once on (train, dev), then runs each
// system over `test`: stage k+1 parses the output of stage k, and the final
// output is scored against gold. Also times the joint model against the
// semi-CRF pipeline. `progress`, when set, receives one line per major step.
ComparisonTable run_comparison(const std::vector<AnnotatedSentence>& train,
                               const std::vector<AnnotatedSentence>& dev,
                               const std::vector<AnnotatedSentence>& test,
                               const FrameOntology& ontology,
                               const ModelConfig& model_config,
                               const TrainConfig& train_config,
                               const std::function<void(const std::string&)>& progress = {});

// Chains already trained stage models over `input`: the first stage parses the
// raw sentences, later stages parse the previous stage's predictions.
std::vector<AnnotatedSentence> run_pipeline(
    const std::vector<const TrainedModel*>& stages,
    const std::vector<AnnotatedSentence>& input);

// Median wall-clock throughput of `parse` over `corpus`, in sentences/second,
// taken over `runs` timed repetitions after one untimed warmup pass.
double median_throughput(
    const std::function<void(const std::vector<AnnotatedSentence>&)>& parse,
    const std::vector<AnnotatedSentence>& corpus, int runs = 3);

// Fixed-width text rendering: one row per system, P/R/F1 for target, frame
// and role extraction.
std::string comparison_to_text(const ComparisonTable& table);
std::string comparison_to_json(const ComparisonTable& table);

}  // namespace fsp
