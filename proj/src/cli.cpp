#include "fsp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsp/fixtures.hpp"
#include "fsp/metrics.hpp"
#include "fsp/pipeline.hpp"
#include "json.hpp"

namespace fsp {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void reject_unknown(const json& obj, const char* section,
                    std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw std::runtime_error(std::string("unknown config key \"") + item.key() + "\" in " +
                               section);
  }
}

template <typename T>
void take(const json& obj, const char* key, T& value) {
  if (obj.contains(key)) value = obj.at(key).get<T>();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// The effective settings plus the command and its paths, written next to the
// artifact the command produced.
void write_config_echo(const fs::path& path, const RunConfig& rc, const std::string& command,
                       const json& paths) {
  json doc = json::parse(run_config_to_json(rc));
  doc["command"] = command;
  doc["paths"] = paths;
  write_text_file(path, doc.dump(2));
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::runtime_error("config root must be a JSON object");
  reject_unknown(j, "config root", {"encoder", "train", "flags"});

  RunConfig rc;
  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    reject_unknown(e, "\"encoder\"",
                   {"kind", "word_dim", "hidden_size", "num_layers", "max_span_length",
                    "width_embedding_dim", "mlp_hidden", "dropout_lstm", "dropout_mlp",
                    "external_dim", "freeze_external"});
    if (e.contains("kind")) {
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "tiny-embedding")
        rc.model.encoder.kind = EncoderKind::TinyEmbedding;
      else if (kind == "external-contextual")
        rc.model.encoder.kind = EncoderKind::ExternalContextual;
      else
        throw std::runtime_error("unknown encoder kind: " + kind);
    }
    take(e, "word_dim", rc.model.encoder.word_dim);
    take(e, "hidden_size", rc.model.encoder.hidden_size);
    take(e, "num_layers", rc.model.encoder.num_layers);
    take(e, "max_span_length", rc.model.encoder.max_span_length);
    take(e, "width_embedding_dim", rc.model.encoder.width_embedding_dim);
    take(e, "mlp_hidden", rc.model.encoder.mlp_hidden);
    take(e, "dropout_lstm", rc.model.encoder.dropout_lstm);
    take(e, "dropout_mlp", rc.model.encoder.dropout_mlp);
    take(e, "external_dim", rc.model.encoder.external_dim);
    take(e, "freeze_external", rc.model.encoder.freeze_external);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "\"train\"",
                   {"batch_size", "lr_encoder", "lr_other", "grad_clip", "early_stop_patience",
                    "max_epochs", "seed", "variant", "weight_decay", "null_downsample"});
    take(t, "batch_size", rc.train.batch_size);
    take(t, "lr_encoder", rc.train.lr_encoder);
    take(t, "lr_other", rc.train.lr_other);
    take(t, "grad_clip", rc.train.grad_clip);
    take(t, "early_stop_patience", rc.train.early_stop_patience);
    take(t, "max_epochs", rc.train.max_epochs);
    take(t, "seed", rc.train.seed);
    take(t, "weight_decay", rc.train.weight_decay);
    take(t, "null_downsample", rc.train.null_downsample);
    if (t.contains("variant")) {
      const std::string name = t.at("variant").get<std::string>();
      const auto v = variant_from_string(name);
      if (!v) throw std::runtime_error("unknown variant: " + name);
      rc.train.variant = *v;
    }
  }
  if (j.contains("flags")) {
    const json& f = j.at("flags");
    reject_unknown(f, "\"flags\"",
                   {"lu_mask", "mask_in_training", "promote_singleton_pprd", "deterministic"});
    take(f, "lu_mask", rc.model.lu_mask);
    take(f, "mask_in_training", rc.model.mask_in_training);
    take(f, "promote_singleton_pprd", rc.model.promote_singleton_pprd);
    take(f, "deterministic", rc.deterministic);
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

std::string run_config_to_json(const RunConfig& rc) {
  json doc = json::parse(model_config_to_json(rc.model));
  doc["train"] = {
      {"batch_size", rc.train.batch_size},
      {"lr_encoder", rc.train.lr_encoder},
      {"lr_other", rc.train.lr_other},
      {"grad_clip", rc.train.grad_clip},
      {"early_stop_patience", rc.train.early_stop_patience},
      {"max_epochs", rc.train.max_epochs},
      {"seed", rc.train.seed},
      {"variant", variant_name(rc.train.variant)},
      {"weight_decay", rc.train.weight_decay},
      {"null_downsample", rc.train.null_downsample},
  };
  doc["flags"]["deterministic"] = rc.deterministic;
  return doc.dump(2);
}

namespace {

void cmd_generate(std::uint64_t seed, int n_sentences, const std::string& out_dir) {
  if (n_sentences < 3)
    throw std::runtime_error("need at least 3 sentences to produce all three splits");
  const Fixture fx = generate_fixture(seed, n_sentences);

  const int n_train = n_sentences * 8 / 10;
  const int n_dev = n_sentences / 10;
  const int n_test = n_sentences - n_train - n_dev;
  const auto slice = [&](int from, int count) {
    return std::vector<AnnotatedSentence>(fx.sentences.begin() + from,
                                          fx.sentences.begin() + from + count);
  };

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  fx.ontology.save((dir / "ontology.json").string());
  save_corpus((dir / "train.jsonl").string(), slice(0, n_train));
  save_corpus((dir / "dev.jsonl").string(), slice(n_train, n_dev));
  save_corpus((dir / "test.jsonl").string(), slice(n_train + n_dev, n_test));

  json echo;
  echo["command"] = "generate";
  echo["seed"] = seed;
  echo["sentences"] = n_sentences;
  echo["split"] = {{"train", n_train}, {"dev", n_dev}, {"test", n_test}};
  echo["paths"] = {{"out", out_dir}};
  write_text_file(dir / "config.json", echo.dump(2));

  std::cout << "wrote " << n_train << "/" << n_dev << "/" << n_test << " sentences and "
            << fx.ontology.num_frames() << "-frame ontology to " << out_dir << '\n';
}

void cmd_train(const std::string& config_path, const std::string& train_path,
               const std::string& dev_path, const std::string& ontology_path,
               const std::string& out_dir) {
  // Surface a missing ontology before any heavier work.
  const FrameOntology ontology = FrameOntology::load(ontology_path);
  const RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  const auto train_set = load_corpus(train_path, ontology);
  const auto dev_set = load_corpus(dev_path, ontology);

  const auto on_epoch = [](const EpochLog& log) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "stage %d epoch %d: loss_n=%.6f loss_e=%.6f dev_target_f1=%.4f "
                  "dev_frame_f1=%.4f dev_role_f1=%.4f",
                  log.stage, log.epoch, log.loss_n, log.loss_e, log.dev_target_f1,
                  log.dev_frame_f1, log.dev_role_f1);
    std::cout << line << '\n';
  };
  const TrainOutcome outcome = train(train_set, dev_set, ontology, rc.model, rc.train, on_epoch);

  json paths = {{"config", config_path}, {"train", train_path},    {"dev", dev_path},
                {"ontology", ontology_path}, {"checkpoint", out_dir}};
  json echo = json::parse(run_config_to_json(rc));
  echo["command"] = "train";
  echo["paths"] = paths;
  save_checkpoint(out_dir, outcome, echo.dump(2));

  const EvalReport dev_report = evaluate_model(outcome.model, dev_set);
  write_text_file(fs::path(out_dir) / "dev_report.json", report_to_json(dev_report));

  const StageResult& last = outcome.stage_results.back();
  std::cout << "checkpoint written to " << out_dir << " (best " << last.selection_metric << "="
            << last.best_metric << " at epoch " << last.best_epoch << ")\n";
}

void cmd_parse(const std::string& checkpoint, const std::string& input_path,
               const std::string& output_path) {
  const TrainedModel model = load_checkpoint(checkpoint);
  const auto input = load_corpus(input_path, model.primary().ontology());
  const auto parsed = parse_corpus(model, input);
  if (fs::path(output_path).has_parent_path())
    fs::create_directories(fs::path(output_path).parent_path());
  save_corpus(output_path, parsed);

  RunConfig rc;
  rc.model = model.config;
  rc.train.variant = model.variant;
  write_config_echo(output_path + ".config.json", rc, "parse",
                    {{"checkpoint", checkpoint}, {"input", input_path}, {"output", output_path}});
  std::cout << "parsed " << parsed.size() << " sentences -> " << output_path << '\n';
}

void cmd_evaluate(const std::string& pred_path, const std::string& gold_path,
                  const std::string& out_path, bool per_sentence) {
  const auto pred = load_corpus(pred_path, static_cast<const FrameOntology*>(nullptr));
  const auto gold = load_corpus(gold_path, static_cast<const FrameOntology*>(nullptr));
  const EvalReport report = eval_corpus(pred, gold);

  json doc = json::parse(report_to_json(report));
  if (per_sentence) {
    doc["per_sentence"] = json::array();
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const auto block = [](const PRF& m) {
        return json{{"precision", m.precision()}, {"recall", m.recall()}, {"f1", m.f1()}};
      };
      json row;
      row["index"] = i;
      row["target"] = block(eval_target(pred[i].tuples, gold[i].tuples));
      row["frame"] = block(eval_frame(pred[i].tuples, gold[i].tuples));
      row["role"] = block(eval_role(pred[i].tuples, gold[i].tuples));
      doc["per_sentence"].push_back(std::move(row));
    }
  }
  const std::string text = doc.dump(2);
  std::cout << text << '\n';
  if (!out_path.empty()) {
    write_text_file(out_path, text);
    write_config_echo(out_path + ".config.json", RunConfig{}, "evaluate",
                      {{"pred", pred_path}, {"gold", gold_path}, {"out", out_path}});
  }
}

void cmd_benchmark(const std::vector<std::string>& checkpoints, const std::string& corpus_path,
                   int runs, const std::string& out_path) {
  if (runs < 3) throw std::runtime_error("benchmark requires at least 3 timed runs");
  if (checkpoints.empty()) throw std::runtime_error("benchmark requires a checkpoint");
  std::vector<TrainedModel> models;
  models.reserve(checkpoints.size());
  for (const auto& dir : checkpoints) models.push_back(load_checkpoint(dir));
  const auto corpus = load_corpus(corpus_path, models.front().primary().ontology());

  std::vector<const TrainedModel*> chain;
  for (const auto& m : models) chain.push_back(&m);
  const double rate = median_throughput(
      [&](const std::vector<AnnotatedSentence>& c) { run_pipeline(chain, c); }, corpus, runs);

  json doc;
  doc["command"] = "benchmark";
  doc["checkpoints"] = checkpoints;
  doc["corpus"] = corpus_path;
  doc["sentences"] = corpus.size();
  doc["runs"] = runs;
  doc["sentences_per_second"] = rate;
  const std::string text = doc.dump(2);
  std::cout << text << '\n';
  if (!out_path.empty()) write_text_file(out_path, text);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"frame-semantic graph parser"};
  app.require_subcommand(1);

  std::uint64_t gen_seed = 1;
  int gen_sentences = 100;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic corpus + ontology");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--sentences", gen_sentences, "total sentences across splits");
  gen->add_option("--out", gen_out, "output directory")->required();

  std::string tr_config, tr_train, tr_dev, tr_ontology, tr_out;
  auto* tr = app.add_subcommand("train", "train a parsing variant");
  tr->add_option("--config", tr_config, "JSON config (sections encoder/train/flags)");
  tr->add_option("--train", tr_train, "training corpus (jsonl)")->required();
  tr->add_option("--dev", tr_dev, "development corpus (jsonl)")->required();
  tr->add_option("--ontology", tr_ontology, "ontology JSON")->required();
  tr->add_option("--out", tr_out, "checkpoint directory")->required();

  std::string pa_checkpoint, pa_input, pa_output;
  auto* pa = app.add_subcommand("parse", "parse a corpus with a checkpoint");
  pa->add_option("--checkpoint", pa_checkpoint, "checkpoint directory")->required();
  pa->add_option("--input", pa_input, "input corpus (jsonl)")->required();
  pa->add_option("--output", pa_output, "output corpus (jsonl)")->required();

  std::string ev_pred, ev_gold, ev_out;
  bool ev_per_sentence = false;
  auto* ev = app.add_subcommand("evaluate", "score predictions against gold");
  ev->add_option("--pred", ev_pred, "predicted corpus (jsonl)")->required();
  ev->add_option("--gold", ev_gold, "gold corpus (jsonl)")->required();
  ev->add_option("--out", ev_out, "also write the report here");
  ev->add_flag("--per-sentence", ev_per_sentence, "include a per-sentence breakdown");

  std::vector<std::string> be_checkpoints;
  std::string be_corpus, be_out;
  int be_runs = 3;
  auto* be = app.add_subcommand("benchmark", "measure parse throughput");
  be->add_option("--checkpoint", be_checkpoints,
                 "checkpoint directory; repeat to time a pipeline of stages")
      ->required();
  be->add_option("--corpus", be_corpus, "corpus to parse (jsonl)")->required();
  be->add_option("--runs", be_runs, "timed repetitions (>= 3)");
  be->add_option("--out", be_out, "also write the result here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed())
      cmd_generate(gen_seed, gen_sentences, gen_out);
    else if (tr->parsed())
      cmd_train(tr_config, tr_train, tr_dev, tr_ontology, tr_out);
    else if (pa->parsed())
      cmd_parse(pa_checkpoint, pa_input, pa_output);
    else if (ev->parsed())
      cmd_evaluate(ev_pred, ev_gold, ev_out, ev_per_sentence);
    else if (be->parsed())
      cmd_benchmark(be_checkpoints, be_corpus, be_runs, be_out);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fsp
