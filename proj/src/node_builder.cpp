#include "fsp/node_builder.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fsp {

namespace {
// Membership bits per enum value, in enum order.
constexpr int kFprd = 1, kPprd = 2, kRole = 4;
constexpr int kTypeBits[kNumNodeTypes] = {
    kFprd,                 // FullPredicate
    kPprd,                 // PartialPredicate
    kRole,                 // Role
    kFprd | kPprd,         // FullPartialPredicate
    kFprd | kRole,         // FullPredicateRole
    kPprd | kRole,         // PartialPredicateRole
    kFprd | kPprd | kRole, // FullPartialPredicateRole
    0,                     // NullSpan
};
}  // namespace

bool is_full_predicate(NodeType t) { return kTypeBits[static_cast<int>(t)] & kFprd; }
bool is_partial_predicate(NodeType t) { return kTypeBits[static_cast<int>(t)] & kPprd; }
bool is_role(NodeType t) { return kTypeBits[static_cast<int>(t)] & kRole; }

NodeType node_type_from_flags(bool full_predicate, bool partial_predicate, bool role) {
  const int bits = (full_predicate ? kFprd : 0) | (partial_predicate ? kPprd : 0) |
                   (role ? kRole : 0);
  for (int i = 0; i < kNumNodeTypes; ++i)
    if (kTypeBits[i] == bits) return static_cast<NodeType>(i);
  throw std::logic_error("node_type_from_flags: unreachable");
}

const char* node_type_name(NodeType t) {
  static const char* kNames[kNumNodeTypes] = {
      "FPRD", "PPRD", "ROLE", "FPRD-PPRD", "FPRD-ROLE", "PPRD-ROLE", "FPRD-PPRD-ROLE", "NULL"};
  return kNames[static_cast<int>(t)];
}

const std::vector<int>* license_frames(const Span& span, const std::vector<std::string>& lemmas,
                                       const FrameOntology& ontology) {
  return ontology.licensed(lemma_key(span, lemmas));
}

GoldAnnotations build_gold(const AnnotatedSentence& sentence, const std::vector<Span>& spans,
                           const FrameOntology& ontology,
                           const std::vector<std::string>& role_labels) {
  GoldAnnotations gold;
  const int k = static_cast<int>(spans.size());
  std::map<Span, int> index;
  for (int i = 0; i < k; ++i) index[spans[i]] = i;
  auto find_span = [&](const Span& s) -> int {
    auto it = index.find(s);
    if (it == index.end()) {
      ++gold.dropped_spans;
      return -1;
    }
    return it->second;
  };
  auto role_id = [&](const std::string& name) -> int {
    auto it = std::lower_bound(role_labels.begin(), role_labels.end(), name);
    if (it == role_labels.end() || *it != name)
      throw std::logic_error("role label missing from global union: " + name);
    return static_cast<int>(it - role_labels.begin());
  };

  std::vector<bool> fprd(k, false), pprd(k, false), role(k, false);
  gold.frame_labels.assign(k, -1);

  for (const FrameTuple& tuple : sentence.tuples) {
    const int frame = ontology.frame_index(tuple.frame);
    std::vector<int> piece_idx;
    const bool multi = tuple.predicate.pieces.size() > 1;
    for (const Span& piece : tuple.predicate.pieces) {
      const int i = find_span(piece);
      if (i < 0) continue;
      piece_idx.push_back(i);
      (multi ? pprd : fprd)[i] = true;
      if (gold.frame_labels[i] == -1)
        gold.frame_labels[i] = frame;
      else if (gold.frame_labels[i] != frame)
        ++gold.frame_collisions;
    }
    if (multi)
      for (std::size_t a = 0; a < piece_idx.size(); ++a)
        for (std::size_t b = a + 1; b < piece_idx.size(); ++b)
          gold.pp_connected.insert(std::minmax(piece_idx[a], piece_idx[b]));
    for (const RoleAssignment& r : tuple.roles) {
      const int ri = find_span(r.value);
      if (ri < 0) continue;
      role[ri] = true;
      const int label = role_id(r.role_name);
      for (int pi : piece_idx) {
        auto [it, inserted] = gold.pr_labels.emplace(std::make_pair(pi, ri), label);
        if (!inserted && it->second != label) ++gold.role_collisions;
      }
    }
  }

  gold.node_labels.resize(k);
  for (int i = 0; i < k; ++i)
    gold.node_labels[i] = static_cast<int>(node_type_from_flags(fprd[i], pprd[i], role[i]));
  return gold;
}

NodeTyper::NodeTyper(const EncoderConfig& cfg, int num_frames, ag::ParameterStore& store,
                     std::mt19937_64& rng, const std::string& prefix)
    : type_head_(prefix + "/type", cfg.span_rep_dim(), cfg.mlp_hidden, kNumNodeTypes, store, rng),
      frame_head_(prefix + "/frame", cfg.span_rep_dim(), cfg.mlp_hidden, num_frames, store, rng),
      dropout_(cfg.dropout_mlp) {}

ag::Var NodeTyper::type_log_probs(ag::Graph& g, ag::Var G, bool training,
                                  std::mt19937_64& rng) const {
  return ag::log_softmax_cols(type_head_.logits(g, G, training, dropout_, rng));
}

ag::Var NodeTyper::frame_logits(ag::Graph& g, ag::Var G, bool training,
                                std::mt19937_64& rng) const {
  return frame_head_.logits(g, G, training, dropout_, rng);
}

ag::Var NodeTyper::masked_frame_log_probs(ag::Graph& g, ag::Var frame_logits,
                                          const std::vector<const std::vector<int>*>& licensed,
                                          int* empty_license_warnings) const {
  const int F = frame_logits.rows();
  const int k = frame_logits.cols();
  if (static_cast<int>(licensed.size()) != k)
    throw std::logic_error("masked_frame_log_probs: license count mismatch");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  ag::Mat mask = ag::Mat::Zero(F, k);
  for (int j = 0; j < k; ++j) {
    if (licensed[j] == nullptr) continue;
    if (licensed[j]->empty()) {
      if (empty_license_warnings) ++*empty_license_warnings;
      continue;
    }
    mask.col(j).setConstant(kNegInf);
    for (int f : *licensed[j]) mask(f, j) = 0.0;
  }
  return ag::log_softmax_cols(ag::add(frame_logits, g.constant(std::move(mask))));
}

}  // namespace fsp
