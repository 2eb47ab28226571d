#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fsp/corpus.hpp"
#include "fsp/node_builder.hpp"

namespace fsp {

struct PRF {
  long tp = 0;
  long pred_count = 0;
  long gold_count = 0;
  double precision() const { return pred_count == 0 ? 0.0 : double(tp) / double(pred_count); }
  double recall() const { return gold_count == 0 ? 0.0 : double(tp) / double(gold_count); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  PRF& operator+=(const PRF& o) {
    tp += o.tp;
    pred_count += o.pred_count;
    gold_count += o.gold_count;
    return *this;
  }
};

struct EvalReport {
  PRF target;
  PRF frame;
  PRF role;
  PRF node;
  PRF frame_module;
  PRF edge;
};

// End-to-end exact-match scores for one sentence's tuple lists. Items are
// deduplicated on both sides before counting so repeats cannot inflate tp:
// target items are sorted piece lists, frame items (piece list, frame),
// role items (piece list, role name, role span).
PRF eval_target(const std::vector<FrameTuple>& pred, const std::vector<FrameTuple>& gold);
PRF eval_frame(const std::vector<FrameTuple>& pred, const std::vector<FrameTuple>& gold);
PRF eval_role(const std::vector<FrameTuple>& pred, const std::vector<FrameTuple>& gold);

// Aligned corpus sums. Both sides must have equal length and matching token
// sequences sentence by sentence.
EvalReport eval_corpus(const std::vector<AnnotatedSentence>& pred,
                       const std::vector<AnnotatedSentence>& gold);

// Module-level scores for one sentence, comparing predicted module outputs
// to gold labels over one shared span list: node = (span, non-NULL type)
// exact pairs; frame_module = (span, frame) over predicate-typed nodes,
// partial pieces included; edge = non-NULL labeled pp and pr edges pooled.
struct ModulePrediction {
  std::vector<int> node_labels;                                  // per span
  std::vector<std::pair<int, int>> frame_choices;                // (span idx, frame)
  std::vector<std::pair<std::pair<int, int>, bool>> pp_choices;  // pair -> connected?
  std::vector<std::pair<std::pair<int, int>, int>> pr_choices;   // pair -> label
};

struct ModuleGold {
  std::vector<int> node_labels;
  std::vector<int> frame_labels;                                // -1 when none
  std::vector<std::pair<int, int>> pp_connected;                // gold connected pairs
  std::vector<std::pair<std::pair<int, int>, int>> pr_labels;   // gold non-NULL role edges
};

void eval_modules(const ModulePrediction& pred, const ModuleGold& gold, int pr_null_label,
                  PRF& node, PRF& frame_module, PRF& edge);

std::string report_to_json(const EvalReport& report);

}  // namespace fsp
