#include "fsp/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace fsp {

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Joint: return "joint";
    case ModelVariant::Predicate: return "predicate";
    case ModelVariant::Frame: return "frame";
    case ModelVariant::Role: return "role";
    case ModelVariant::PredicateFrame: return "predicate_frame";
    case ModelVariant::FrameRole: return "frame_role";
    case ModelVariant::NodeEdge: return "node_edge";
    case ModelVariant::SemiCrf: return "semicrf";
  }
  throw std::logic_error("variant_name: unreachable");
}

std::optional<ModelVariant> variant_from_string(const std::string& name) {
  if (name == "joint") return ModelVariant::Joint;
  if (name == "predicate") return ModelVariant::Predicate;
  if (name == "frame") return ModelVariant::Frame;
  if (name == "role") return ModelVariant::Role;
  if (name == "predicate_frame" || name == "predicate∘frame")
    return ModelVariant::PredicateFrame;
  if (name == "frame_role" || name == "frame∘role") return ModelVariant::FrameRole;
  if (name == "node_edge" || name == "node+edge") return ModelVariant::NodeEdge;
  if (name == "semicrf") return ModelVariant::SemiCrf;
  return std::nullopt;
}

std::vector<HeadSet> stage_head_sets(ModelVariant v) {
  HeadSet h;
  switch (v) {
    case ModelVariant::Joint:
      h.node_types = h.frames = h.pp = h.pr = true;
      return {h};
    case ModelVariant::Predicate:
      h.node_types = h.pp = h.clear_role_bit = true;
      return {h};
    case ModelVariant::Frame:
      h.frames = h.gold_predicates_input = true;
      return {h};
    case ModelVariant::Role:
      h.node_types = h.pr = h.clear_predicate_bits = true;
      h.gold_predicates_input = h.gold_frames_input = true;
      return {h};
    case ModelVariant::PredicateFrame:
      h.node_types = h.frames = h.pp = h.clear_role_bit = true;
      return {h};
    case ModelVariant::FrameRole:
      h.node_types = h.frames = h.pr = h.clear_predicate_bits = true;
      h.gold_predicates_input = true;
      return {h};
    case ModelVariant::NodeEdge: {
      HeadSet nodes;
      nodes.node_types = nodes.frames = true;
      HeadSet edges;
      edges.pp = edges.pr = true;
      return {nodes, edges};
    }
    case ModelVariant::SemiCrf:
      h.semicrf = h.gold_predicates_input = h.gold_frames_input = true;
      return {h};
  }
  throw std::logic_error("stage_head_sets: unreachable");
}

std::vector<int> project_node_labels(const std::vector<int>& labels, const HeadSet& heads) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    NodeType t = static_cast<NodeType>(l);
    bool f = is_full_predicate(t), p = is_partial_predicate(t), r = is_role(t);
    if (heads.clear_role_bit) r = false;
    if (heads.clear_predicate_bits) f = p = false;
    out.push_back(static_cast<int>(node_type_from_flags(f, p, r)));
  }
  return out;
}

JointModel::JointModel(const ModelConfig& cfg, const HeadSet& heads, FrameOntology ontology,
                       Vocabulary vocab, std::uint64_t init_seed)
    : cfg_(cfg), heads_(heads), ontology_(std::move(ontology)), vocab_(std::move(vocab)) {
  role_labels_ = ontology_.role_label_union();
  std::mt19937_64 rng(init_seed);
  encoder_ = std::make_unique<Encoder>(cfg_.encoder, vocab_.size(), store_, rng);
  if (heads_.node_types || heads_.frames)
    typer_ = std::make_unique<NodeTyper>(cfg_.encoder, ontology_.num_frames(), store_, rng);
  if (heads_.pp || heads_.pr)
    edges_ = std::make_unique<EdgeScorer>(cfg_.encoder, static_cast<int>(role_labels_.size()),
                                          store_, rng);
  if (heads_.semicrf)
    semicrf_ = std::make_unique<SemiCrfHead>(cfg_.encoder,
                                             static_cast<int>(role_labels_.size()), store_, rng);
}

const NodeTyper& JointModel::node_typer() const {
  if (!typer_) throw std::logic_error("node typer not built for this head set");
  return *typer_;
}

const EdgeScorer& JointModel::edge_scorer() const {
  if (!edges_) throw std::logic_error("edge scorer not built for this head set");
  return *edges_;
}

const SemiCrfHead& JointModel::semicrf_head() const {
  if (!semicrf_) throw std::logic_error("semicrf head not built for this head set");
  return *semicrf_;
}

std::vector<Span> JointModel::candidate_spans(int n) const {
  return enumerate_spans(n, cfg_.encoder.max_span_length);
}

std::vector<std::string> JointModel::effective_lemmas(const AnnotatedSentence& s) const {
  if (s.has_lemmas()) return s.lemmas;
  std::vector<std::string> tokens;
  for (const Token& t : s.tokens) tokens.push_back(t.text);
  return default_lemmatizer()(tokens);
}

ag::Var JointModel::span_reps(ag::Graph& g, const AnnotatedSentence& s,
                              const std::vector<Span>& spans, bool training,
                              std::mt19937_64& rng) const {
  std::vector<std::string> tokens;
  for (const Token& t : s.tokens) tokens.push_back(t.text);
  return encoder_->encode(g, tokens, vocab_, spans, training, rng);
}

ag::Var JointModel::node_log_probs(ag::Graph& g, ag::Var G, bool training,
                                   std::mt19937_64& rng) const {
  return node_typer().type_log_probs(g, G, training, rng);
}

std::vector<const std::vector<int>*> JointModel::licenses_for(
    const std::vector<Span>& spans, const std::vector<int>& span_idx,
    const std::vector<std::string>& lemmas, bool apply_mask) const {
  std::vector<const std::vector<int>*> out(span_idx.size(), nullptr);
  if (!apply_mask) return out;
  for (std::size_t j = 0; j < span_idx.size(); ++j)
    out[j] = license_frames(spans[span_idx[j]], lemmas, ontology_);
  return out;
}

ag::Var JointModel::frame_log_probs(ag::Graph& g, ag::Var G, const std::vector<int>& span_idx,
                                    const std::vector<const std::vector<int>*>& licenses,
                                    bool training, std::mt19937_64& rng,
                                    int* empty_license_warnings) const {
  ag::Var sel = ag::cols(G, span_idx);
  ag::Var logits = node_typer().frame_logits(g, sel, training, rng);
  return node_typer().masked_frame_log_probs(g, logits, licenses, empty_license_warnings);
}

namespace {

int argmax_col(const Eigen::MatrixXd& m, int col) {
  int best = 0;
  for (int r = 1; r < m.rows(); ++r)
    if (m(r, col) > m(best, col)) best = r;
  return best;
}

}  // namespace

JointModel::SentenceAnalysis JointModel::analyze(const AnnotatedSentence& s,
                                                 const JointModel* edge_model) const {
  SentenceAnalysis out;
  const int n = s.size();
  if (n == 0) return out;
  out.spans = candidate_spans(n);
  const int k = static_cast<int>(out.spans.size());
  const std::vector<std::string> lemmas = effective_lemmas(s);

  ag::Graph g;
  std::mt19937_64 rng(0);  // inference draws nothing from it
  ag::Var G = span_reps(g, s, out.spans, false, rng);

  std::vector<NodeType> types(k, NodeType::NullSpan);
  if (heads_.node_types) {
    ag::Var lp = node_log_probs(g, G, false, rng);
    for (int j = 0; j < k; ++j) types[j] = static_cast<NodeType>(argmax_col(lp.value(), j));
  }
  out.node_argmax.resize(k);
  for (int j = 0; j < k; ++j) out.node_argmax[j] = static_cast<int>(types[j]);
  out.graph.nodes.resize(k);
  for (int j = 0; j < k; ++j) out.graph.nodes[j] = GraphNode{out.spans[j], types[j], {}};

  // The edge stage of the two-stage variant scores pairs with its own
  // encoder; every other path scores them with this model.
  const JointModel& em = edge_model ? *edge_model : *this;
  ag::Var Ge = edge_model ? em.span_reps(g, s, out.spans, false, rng) : G;

  std::map<Span, int> span_index;
  for (int j = 0; j < k; ++j) span_index[out.spans[j]] = j;

  // Predicates, and the gold frame name for variants that consume one.
  std::vector<DecodedPredicate> preds;
  std::vector<std::string> given_frames;
  if (heads_.gold_predicates_input) {
    std::set<std::vector<Span>> seen;
    for (const FrameTuple& t : s.tuples) {
      if (!seen.insert(t.predicate.pieces).second) continue;
      DecodedPredicate p;
      p.pieces = t.predicate.pieces;
      for (const Span& piece : t.predicate.pieces) {
        auto it = span_index.find(piece);
        if (it == span_index.end())
          ++out.missing_pieces;
        else
          p.source_nodes.push_back(it->second);
      }
      preds.push_back(std::move(p));
      given_frames.push_back(t.frame);
    }
  } else {
    if (heads_.pp || (edge_model && em.heads().pp)) {
      CandidatePairs pairs = build_candidate_pairs(types);
      if (!pairs.pp.empty()) {
        ag::Var lp = em.edge_scorer().pp_log_probs(g, Ge, pairs.pp, false, rng);
        for (std::size_t m = 0; m < pairs.pp.size(); ++m) {
          Eigen::Vector2d prob = lp.value().col(static_cast<int>(m)).array().exp();
          out.graph.pp_edges[pairs.pp[m]] = prob;
          out.pp_choices.push_back({pairs.pp[m], prob(kPpConnected) > prob(kPpNull)});
        }
      }
    }
    preds = decode_targets(out.graph, DecodeFlags{cfg_.promote_singleton_pprd});
  }

  // Frame distributions for every node a predicate covers.
  std::vector<int> frame_of_pred(preds.size(), 0);
  if (heads_.gold_frames_input) {
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const int f = ontology_.frame_index(given_frames[i]);
      if (f < 0) throw std::runtime_error("unknown frame in input: " + given_frames[i]);
      frame_of_pred[i] = f;
    }
  } else if (heads_.frames) {
    std::set<int> need_set;
    for (const auto& p : preds)
      for (int src : p.source_nodes) need_set.insert(src);
    std::vector<int> need(need_set.begin(), need_set.end());
    if (!need.empty()) {
      ag::Var flp = frame_log_probs(g, G, need,
                                    licenses_for(out.spans, need, lemmas, cfg_.lu_mask), false,
                                    rng);
      for (std::size_t j = 0; j < need.size(); ++j) {
        Eigen::VectorXd dist = flp.value().col(static_cast<int>(j)).array().exp();
        out.graph.nodes[need[j]].frame_dist = dist;
        out.frame_choices.push_back({need[j], argmax_col(flp.value(), static_cast<int>(j))});
      }
    }
    for (std::size_t i = 0; i < preds.size(); ++i)
      frame_of_pred[i] = preds[i].source_nodes.empty() ? 0 : decode_frame(preds[i], out.graph);
  }

  // Roles.
  std::vector<std::vector<RoleAssignment>> roles_of_pred(preds.size());
  const bool pr_active = heads_.pr || (edge_model && em.heads().pr);
  if (pr_active) {
    std::vector<int> role_nodes;
    for (int j = 0; j < k; ++j)
      if (is_role(types[j])) role_nodes.push_back(j);
    std::set<std::pair<int, int>> pair_set;
    for (const auto& p : preds)
      for (int src : p.source_nodes)
        for (int r : role_nodes) pair_set.insert({src, r});
    std::vector<std::pair<int, int>> pairs(pair_set.begin(), pair_set.end());
    if (!pairs.empty()) {
      ag::Var lp = em.edge_scorer().pr_log_probs(g, Ge, pairs, false, rng);
      for (std::size_t m = 0; m < pairs.size(); ++m) {
        Eigen::VectorXd prob = lp.value().col(static_cast<int>(m)).array().exp();
        out.graph.pr_edges[pairs[m]] = prob;
        out.pr_choices.push_back({pairs[m], argmax_col(lp.value(), static_cast<int>(m))});
      }
    }
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (!preds[i].source_nodes.empty())
        roles_of_pred[i] =
            decode_roles(preds[i], frame_of_pred[i], out.graph, ontology_, role_labels_);
  } else if (heads_.semicrf) {
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].source_nodes.empty()) continue;
      FrameTuple shell;
      shell.predicate.pieces = preds[i].pieces;
      shell.frame = ontology_.frame_name(frame_of_pred[i]);
      SemiCrfInstance inst = build_semicrf_instance(shell, n, cfg_.encoder.max_span_length,
                                                    ontology_, role_labels_, false);
      ag::Var scores = semicrf_head().segment_scores(g, G, preds[i].source_nodes);
      ag::Var restricted = SemiCrfHead::restrict_labels(g, scores, inst.local_to_global);
      roles_of_pred[i] = semicrf_decode_roles(restricted.value(), n,
                                              cfg_.encoder.max_span_length, inst, role_labels_);
    }
  }

  for (std::size_t i = 0; i < preds.size(); ++i) {
    FrameTuple t;
    t.predicate.pieces = preds[i].pieces;
    t.frame = ontology_.frame_name(frame_of_pred[i]);
    t.roles = roles_of_pred[i];
    std::sort(t.roles.begin(), t.roles.end());
    out.tuples.push_back(std::move(t));
  }
  std::sort(out.tuples.begin(), out.tuples.end());
  return out;
}

}  // namespace fsp
