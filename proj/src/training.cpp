#include "fsp/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fsp {

namespace {

using json = nlohmann::json;

double u01(std::mt19937_64& rng) { return (rng() >> 11) * (1.0 / 9007199254740992.0); }

ag::Var sum_vars(ag::Graph& g, const std::vector<ag::Var>& terms) {
  if (terms.empty()) return g.constant(ag::Mat::Zero(1, 1));
  ag::Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ag::add(acc, terms[i]);
  return acc;
}

struct SentenceTerms {
  std::optional<ag::Var> node, frame, pp, pr, crf;
};

SentenceTerms sentence_loss(ag::Graph& g, JointModel& model, const AnnotatedSentence& s,
                            bool training, std::mt19937_64& rng, const TrainConfig& tc,
                            TrainCounters* counters) {
  SentenceTerms out;
  const HeadSet& heads = model.heads();
  const int n = s.size();
  const std::vector<Span> spans = model.candidate_spans(n);
  const std::vector<std::string> lemmas = model.effective_lemmas(s);
  GoldAnnotations gold = build_gold(s, spans, model.ontology(), model.role_labels());
  if (counters) {
    counters->dropped_spans += gold.dropped_spans;
    counters->frame_collisions += gold.frame_collisions;
    counters->role_collisions += gold.role_collisions;
  }

  ag::Var G = model.span_reps(g, s, spans, training, rng);

  if (heads.node_types) {
    std::vector<int> labels = project_node_labels(gold.node_labels, heads);
    if (tc.null_downsample < 1.0) {
      const int null_label = static_cast<int>(NodeType::NullSpan);
      for (int& l : labels)
        if (l == null_label && u01(rng) >= tc.null_downsample) l = -1;
    }
    out.node = ag::pick_nll(model.node_log_probs(g, G, training, rng), std::move(labels));
  }

  if (heads.frames) {
    std::vector<int> pred_idx, labels;
    for (std::size_t i = 0; i < gold.frame_labels.size(); ++i)
      if (gold.frame_labels[i] >= 0) {
        pred_idx.push_back(static_cast<int>(i));
        labels.push_back(gold.frame_labels[i]);
      }
    if (!pred_idx.empty()) {
      const bool apply = model.config().lu_mask && model.config().mask_in_training;
      auto licenses = model.licenses_for(spans, pred_idx, lemmas, apply);
      for (std::size_t j = 0; j < licenses.size(); ++j) {
        if (!licenses[j]) continue;
        if (std::find(licenses[j]->begin(), licenses[j]->end(), labels[j]) ==
            licenses[j]->end()) {
          // The mask would zero out the gold frame; fall back to the full
          // softmax for this span so the loss stays finite.
          licenses[j] = nullptr;
          if (counters) ++counters->unlicensed_gold;
        }
      }
      int empty_warn = 0;
      ag::Var flp = model.frame_log_probs(g, G, pred_idx, licenses, training, rng, &empty_warn);
      if (counters) counters->empty_licenses += empty_warn;
      out.frame = ag::pick_nll(flp, std::move(labels));
    }
  }

  std::vector<NodeType> gold_types;
  for (int l : gold.node_labels) gold_types.push_back(static_cast<NodeType>(l));
  CandidatePairs pairs = build_candidate_pairs(gold_types);

  if (heads.pp && !pairs.pp.empty()) {
    std::vector<int> labels;
    for (const auto& pr : pairs.pp)
      labels.push_back(gold.pp_connected.contains(pr) ? kPpConnected : kPpNull);
    out.pp = ag::pick_nll(
        model.edge_scorer().pp_log_probs(g, G, pairs.pp, training, rng), std::move(labels));
  }

  if (heads.pr && !pairs.pr.empty()) {
    std::vector<int> labels;
    for (const auto& pr : pairs.pr) {
      auto it = gold.pr_labels.find(pr);
      labels.push_back(it == gold.pr_labels.end() ? model.pr_null_label() : it->second);
    }
    out.pr = ag::pick_nll(
        model.edge_scorer().pr_log_probs(g, G, pairs.pr, training, rng), std::move(labels));
  }

  if (heads.semicrf) {
    std::map<Span, int> span_index;
    for (std::size_t i = 0; i < spans.size(); ++i) span_index[spans[i]] = static_cast<int>(i);
    std::vector<ag::Var> terms;
    for (const FrameTuple& tuple : s.tuples) {
      std::vector<int> piece_idx;
      for (const Span& piece : tuple.predicate.pieces) {
        auto it = span_index.find(piece);
        if (it != span_index.end()) piece_idx.push_back(it->second);
      }
      if (piece_idx.empty()) {
        if (counters) ++counters->semicrf_skipped_tuples;
        continue;
      }
      SemiCrfInstance inst =
          build_semicrf_instance(tuple, n, model.config().encoder.max_span_length,
                                 model.ontology(), model.role_labels(), true);
      if (counters) counters->semicrf_dropped_roles += inst.dropped_roles;
      ag::Var scores = model.semicrf_head().segment_scores(g, G, piece_idx);
      ag::Var restricted = SemiCrfHead::restrict_labels(g, scores, inst.local_to_global);
      terms.push_back(semicrf_nll_node(restricted, n, model.config().encoder.max_span_length,
                                       inst.gold));
    }
    if (!terms.empty()) out.crf = sum_vars(g, terms);
  }
  return out;
}

}  // namespace

BatchLoss compute_loss(ag::Graph& g, JointModel& model,
                       const std::vector<const AnnotatedSentence*>& batch, bool training,
                       std::mt19937_64& rng, const TrainConfig& tc, TrainCounters* counters) {
  std::vector<ag::Var> n_terms, e_terms;
  for (const AnnotatedSentence* s : batch) {
    SentenceTerms t = sentence_loss(g, model, *s, training, rng, tc, counters);
    if (t.node) n_terms.push_back(*t.node);
    if (t.frame) n_terms.push_back(*t.frame);
    if (t.crf) n_terms.push_back(*t.crf);
    if (t.pp) e_terms.push_back(*t.pp);
    if (t.pr) e_terms.push_back(*t.pr);
  }
  ag::Var ln = sum_vars(g, n_terms);
  ag::Var le = sum_vars(g, e_terms);
  BatchLoss out{ag::add(ln, le), {}};
  out.values.loss_n = ln.value()(0, 0);
  out.values.loss_e = le.value()(0, 0);
  return out;
}

AdamW::AdamW(ag::ParameterStore& store, std::function<bool(const std::string&)> use_encoder_lr,
             std::function<bool(const std::string&)> active, double lr_encoder, double lr_other,
             double weight_decay)
    : weight_decay_(weight_decay) {
  for (const auto& p : store.all()) {
    if (active && !active(p->name)) continue;
    Slot s;
    s.p = p.get();
    s.lr = (use_encoder_lr && use_encoder_lr(p->name)) ? lr_encoder : lr_other;
    s.m = ag::Mat::Zero(p->value.rows(), p->value.cols());
    s.v = ag::Mat::Zero(p->value.rows(), p->value.cols());
    slots_.push_back(std::move(s));
  }
}

double AdamW::clip_and_step(double grad_clip) {
  double sq = 0.0;
  for (const Slot& s : slots_) sq += s.p->grad.squaredNorm();
  double norm = std::sqrt(sq);
  if (grad_clip > 0.0 && norm > grad_clip) {
    const double scale = grad_clip / norm;
    for (Slot& s : slots_) s.p->grad *= scale;
    norm = grad_clip;
  }
  ++t_;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
  for (Slot& s : slots_) {
    s.m = b1 * s.m + (1.0 - b1) * s.p->grad;
    s.v = b2 * s.v + (1.0 - b2) * s.p->grad.cwiseProduct(s.p->grad).eval();
    ag::Mat update = (s.m / c1).array() / ((s.v / c2).array().sqrt() + eps);
    if (weight_decay_ > 0.0) update += weight_decay_ * s.p->value;
    s.p->value -= s.lr * update;
  }
  return norm;
}

JointModel::SentenceAnalysis TrainedModel::analyze(const AnnotatedSentence& s) const {
  if (variant == ModelVariant::NodeEdge) return stages[0]->analyze(s, stages[1].get());
  return stages[0]->analyze(s);
}

TrainedModel build_variant(const ModelConfig& mc, ModelVariant variant,
                           const FrameOntology& ontology, const Vocabulary& vocab,
                           std::uint64_t seed) {
  TrainedModel out;
  out.config = mc;
  out.variant = variant;
  int stage = 0;
  for (const HeadSet& heads : stage_head_sets(variant))
    out.stages.push_back(
        std::make_unique<JointModel>(mc, heads, ontology, vocab, seed + 1000003ULL * stage++));
  return out;
}

std::vector<AnnotatedSentence> parse_corpus(const TrainedModel& model,
                                            const std::vector<AnnotatedSentence>& input) {
  std::vector<AnnotatedSentence> out;
  out.reserve(input.size());
  for (const AnnotatedSentence& s : input) {
    AnnotatedSentence copy = s;
    copy.tuples = model.parse(s);
    out.push_back(std::move(copy));
  }
  return out;
}

namespace {

EvalReport evaluate_with(
    const std::function<JointModel::SentenceAnalysis(const AnnotatedSentence&)>& analyze,
    const JointModel& primary, const std::vector<AnnotatedSentence>& gold) {
  EvalReport report;
  for (const AnnotatedSentence& s : gold) {
    JointModel::SentenceAnalysis a = analyze(s);
    report.target += eval_target(a.tuples, s.tuples);
    report.frame += eval_frame(a.tuples, s.tuples);
    report.role += eval_role(a.tuples, s.tuples);

    GoldAnnotations g = build_gold(s, a.spans, primary.ontology(), primary.role_labels());
    ModuleGold mg;
    mg.node_labels = g.node_labels;
    mg.frame_labels = g.frame_labels;
    mg.pp_connected.assign(g.pp_connected.begin(), g.pp_connected.end());
    mg.pr_labels.assign(g.pr_labels.begin(), g.pr_labels.end());
    ModulePrediction mp;
    mp.node_labels = a.node_argmax;
    mp.frame_choices = a.frame_choices;
    mp.pp_choices = a.pp_choices;
    mp.pr_choices = a.pr_choices;
    eval_modules(mp, mg, primary.pr_null_label(), report.node, report.frame_module,
                 report.edge);
  }
  return report;
}

}  // namespace

EvalReport evaluate_model(const TrainedModel& model,
                          const std::vector<AnnotatedSentence>& gold) {
  return evaluate_with([&](const AnnotatedSentence& s) { return model.analyze(s); },
                       model.primary(), gold);
}

const char* selection_metric_name(const HeadSet& heads) {
  if (heads.pr || heads.semicrf) return "role";
  if (heads.frames) return "frame";
  return "target";
}

namespace {

double metric_value(const EvalReport& r, const std::string& name) {
  if (name == "role") return r.role.f1();
  if (name == "frame") return r.frame.f1();
  return r.target.f1();
}

StageResult train_stage(TrainedModel& model, int stage_idx,
                        const std::vector<AnnotatedSentence>& train_set,
                        const std::vector<AnnotatedSentence>& dev_set, const TrainConfig& tc,
                        TrainCounters& counters,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  JointModel& stage = *model.stages[stage_idx];
  const HeadSet& heads = stage.heads();
  // The node stage of the two-stage variant is judged alone (frame F1); the
  // edge stage is judged on the full two-stage parse (role F1).
  const bool node_stage_alone = model.variant == ModelVariant::NodeEdge && stage_idx == 0;
  HeadSet judged = heads;
  if (model.variant == ModelVariant::NodeEdge && stage_idx == 1)
    judged.node_types = judged.frames = judged.pp = judged.pr = true;
  auto eval_dev = [&]() {
    if (node_stage_alone)
      return evaluate_with([&](const AnnotatedSentence& s) { return stage.analyze(s); }, stage,
                           dev_set);
    return evaluate_model(model, dev_set);
  };
  StageResult result;
  result.selection_metric = selection_metric_name(judged);

  std::vector<std::string> active_prefixes{"enc/"};
  if (heads.node_types) active_prefixes.push_back("node/type/");
  if (heads.frames) active_prefixes.push_back("node/frame/");
  if (heads.pp) active_prefixes.push_back("edge/pp/");
  if (heads.pr) active_prefixes.push_back("edge/pr/");
  if (heads.semicrf) active_prefixes.push_back("semicrf/");
  const bool freeze_adapter = stage.config().encoder.freeze_external;
  auto is_adapter = [&stage](const std::string& name) {
    return stage.encoder().is_adapter_param(name);
  };
  auto active = [active_prefixes, freeze_adapter, &stage](const std::string& name) {
    if (freeze_adapter && stage.encoder().is_adapter_param(name)) return false;
    for (const auto& p : active_prefixes)
      if (name.rfind(p, 0) == 0) return true;
    return false;
  };
  AdamW opt(stage.params(), is_adapter, active, tc.lr_encoder, tc.lr_other, tc.weight_decay);

  std::mt19937_64 rng(tc.seed + 7919ULL * static_cast<std::uint64_t>(stage_idx));
  std::vector<int> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<ag::Mat> best_values = stage.params().snapshot_values();
  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng() % i]);
    LossBreakdown epoch_loss;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      std::vector<const AnnotatedSentence*> batch;
      for (std::size_t i = start;
           i < std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size)); ++i)
        batch.push_back(&train_set[order[i]]);
      ag::Graph g;
      BatchLoss loss = compute_loss(g, stage, batch, true, rng, tc, &counters);
      if (!std::isfinite(loss.values.total()))
        throw std::runtime_error("non-finite training loss (n=" +
                                 std::to_string(loss.values.loss_n) +
                                 ", e=" + std::to_string(loss.values.loss_e) + ")");
      stage.params().zero_grads();
      g.backward(loss.total);
      opt.clip_and_step(tc.grad_clip);
      epoch_loss.loss_n += loss.values.loss_n;
      epoch_loss.loss_e += loss.values.loss_e;
    }
    stage.params().zero_grads();

    EvalReport dev = eval_dev();
    EpochLog log;
    log.stage = stage_idx;
    log.epoch = epoch;
    log.loss_n = epoch_loss.loss_n;
    log.loss_e = epoch_loss.loss_e;
    log.dev_target_f1 = dev.target.f1();
    log.dev_frame_f1 = dev.frame.f1();
    log.dev_role_f1 = dev.role.f1();
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);

    const double metric = metric_value(dev, result.selection_metric);
    if (result.best_epoch < 0 || metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      best_values = stage.params().snapshot_values();
      epochs_since_best = 0;
    } else if (++epochs_since_best >= tc.early_stop_patience) {
      break;
    }
  }
  stage.params().restore_values(best_values);
  return result;
}

}  // namespace

TrainOutcome train(const std::vector<AnnotatedSentence>& train_set,
                   const std::vector<AnnotatedSentence>& dev_set, const FrameOntology& ontology,
                   const ModelConfig& mc, const TrainConfig& tc,
                   const std::function<void(const EpochLog&)>& on_epoch,
                   PieceProvider piece_provider) {
  if (train_set.empty()) throw std::runtime_error("empty training corpus");
  for (const AnnotatedSentence& s : train_set) validate_sentence(s, &ontology);
  for (const AnnotatedSentence& s : dev_set) validate_sentence(s, &ontology);

  TrainOutcome out;
  out.model = build_variant(mc, tc.variant, ontology, Vocabulary::build(train_set), tc.seed);
  if (piece_provider)
    for (auto& stage : out.model.stages) stage->encoder().set_piece_provider(piece_provider);
  for (std::size_t stage = 0; stage < out.model.stages.size(); ++stage)
    out.stage_results.push_back(train_stage(out.model, static_cast<int>(stage), train_set,
                                            dev_set, tc, out.counters, on_epoch));
  return out;
}

std::string model_config_to_json(const ModelConfig& mc) {
  json j;
  j["encoder"] = {
      {"kind", mc.encoder.kind == EncoderKind::TinyEmbedding ? "tiny-embedding"
                                                             : "external-contextual"},
      {"word_dim", mc.encoder.word_dim},
      {"hidden_size", mc.encoder.hidden_size},
      {"num_layers", mc.encoder.num_layers},
      {"max_span_length", mc.encoder.max_span_length},
      {"width_embedding_dim", mc.encoder.width_embedding_dim},
      {"mlp_hidden", mc.encoder.mlp_hidden},
      {"dropout_lstm", mc.encoder.dropout_lstm},
      {"dropout_mlp", mc.encoder.dropout_mlp},
      {"external_dim", mc.encoder.external_dim},
      {"freeze_external", mc.encoder.freeze_external},
  };
  j["flags"] = {
      {"lu_mask", mc.lu_mask},
      {"mask_in_training", mc.mask_in_training},
      {"promote_singleton_pprd", mc.promote_singleton_pprd},
  };
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig mc;
  const json& e = j.at("encoder");
  const std::string kind = e.at("kind").get<std::string>();
  if (kind == "tiny-embedding")
    mc.encoder.kind = EncoderKind::TinyEmbedding;
  else if (kind == "external-contextual")
    mc.encoder.kind = EncoderKind::ExternalContextual;
  else
    throw std::runtime_error("unknown encoder kind: " + kind);
  mc.encoder.word_dim = e.at("word_dim").get<int>();
  mc.encoder.hidden_size = e.at("hidden_size").get<int>();
  mc.encoder.num_layers = e.at("num_layers").get<int>();
  mc.encoder.max_span_length = e.at("max_span_length").get<int>();
  mc.encoder.width_embedding_dim = e.at("width_embedding_dim").get<int>();
  mc.encoder.mlp_hidden = e.at("mlp_hidden").get<int>();
  mc.encoder.dropout_lstm = e.at("dropout_lstm").get<double>();
  mc.encoder.dropout_mlp = e.at("dropout_mlp").get<double>();
  mc.encoder.external_dim = e.at("external_dim").get<int>();
  mc.encoder.freeze_external = e.at("freeze_external").get<bool>();
  const json& f = j.at("flags");
  mc.lu_mask = f.at("lu_mask").get<bool>();
  mc.mask_in_training = f.at("mask_in_training").get<bool>();
  mc.promote_singleton_pprd = f.at("promote_singleton_pprd").get<bool>();
  return mc;
}

namespace {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash file: " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::string& dir, const TrainOutcome& outcome,
                     const std::string& config_echo_json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const TrainedModel& model = outcome.model;
  const JointModel& primary = model.primary();

  model.stages[0]->params().save_file((fs::path(dir) / "params.bin").string());
  if (model.stages.size() > 1)
    model.stages[1]->params().save_file((fs::path(dir) / "params_edge.bin").string());
  primary.vocab().save_file((fs::path(dir) / "vocab.txt").string());
  primary.ontology().save((fs::path(dir) / "ontology.json").string());
  if (!config_echo_json.empty()) {
    std::ofstream echo(fs::path(dir) / "config.json");
    echo << config_echo_json;
    if (config_echo_json.back() != '\n') echo << '\n';
  }
  {
    std::ofstream log(fs::path(dir) / "metrics.jsonl");
    for (const StageResult& stage : outcome.stage_results)
      for (const EpochLog& e : stage.epochs) {
        json j{{"epoch", e.epoch},
               {"loss_n", e.loss_n},
               {"loss_e", e.loss_e},
               {"dev_target_f1", e.dev_target_f1},
               {"dev_frame_f1", e.dev_frame_f1},
               {"dev_role_f1", e.dev_role_f1}};
        if (outcome.stage_results.size() > 1) j["stage"] = e.stage;
        log << j.dump() << '\n';
      }
  }
  json meta;
  meta["variant"] = variant_name(model.variant);
  meta["model_config"] = json::parse(model_config_to_json(model.config));
  meta["ontology_digest"] = primary.ontology().digest();
  meta["vocab_digest"] = fnv1a_file(fs::path(dir) / "vocab.txt");
  meta["params_digest"] = fnv1a_file(fs::path(dir) / "params.bin");
  if (model.stages.size() > 1)
    meta["params_edge_digest"] = fnv1a_file(fs::path(dir) / "params_edge.bin");
  if (!outcome.stage_results.empty()) {
    meta["best_epoch"] = outcome.stage_results.back().best_epoch;
    meta["best_metric"] = outcome.stage_results.back().best_metric;
    meta["selection_metric"] = outcome.stage_results.back().selection_metric;
  }
  std::ofstream mf(fs::path(dir) / "meta.json");
  mf << meta.dump(2) << '\n';
}

TrainedModel load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("checkpoint missing meta.json: " + dir);
  json meta = json::parse(mf);
  const auto variant = variant_from_string(meta.at("variant").get<std::string>());
  if (!variant) throw std::runtime_error("checkpoint has unknown variant");
  ModelConfig mc = model_config_from_json(meta.at("model_config").dump());
  FrameOntology ontology = FrameOntology::load((fs::path(dir) / "ontology.json").string());
  if (meta.contains("ontology_digest") &&
      meta.at("ontology_digest").get<std::uint64_t>() != ontology.digest())
    throw std::runtime_error("checkpoint ontology digest mismatch");
  if (meta.contains("vocab_digest") &&
      meta.at("vocab_digest").get<std::uint64_t>() != fnv1a_file(fs::path(dir) / "vocab.txt"))
    throw std::runtime_error("checkpoint vocabulary digest mismatch");
  if (meta.contains("params_digest") &&
      meta.at("params_digest").get<std::uint64_t>() != fnv1a_file(fs::path(dir) / "params.bin"))
    throw std::runtime_error("checkpoint parameter digest mismatch");
  Vocabulary vocab = Vocabulary::load_file((fs::path(dir) / "vocab.txt").string());

  TrainedModel model = build_variant(mc, *variant, ontology, vocab, 0);
  model.stages[0]->params().load_file((fs::path(dir) / "params.bin").string());
  if (model.stages.size() > 1) {
    if (meta.contains("params_edge_digest") &&
        meta.at("params_edge_digest").get<std::uint64_t>() !=
            fnv1a_file(fs::path(dir) / "params_edge.bin"))
      throw std::runtime_error("checkpoint parameter digest mismatch");
    model.stages[1]->params().load_file((fs::path(dir) / "params_edge.bin").string());
  }
  return model;
}

}  // namespace fsp
