#include "fsp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fsp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// FrameOntology

void FrameOntology::add_frame(const std::string& name, std::vector<std::string> roles) {
  if (pending_frames_.count(name)) throw CorpusError("duplicate frame '" + name + "'");
  pending_frames_[name] = std::move(roles);
  finalized_ = false;
}

void FrameOntology::add_lexicon_entry(const std::string& lemma_key, const std::string& frame) {
  auto& v = pending_lexicon_[lemma_key];
  if (std::find(v.begin(), v.end(), frame) == v.end()) v.push_back(frame);
  finalized_ = false;
}

void FrameOntology::finalize() {
  frames_.clear();
  frame_index_.clear();
  roles_.clear();
  lexicon_.clear();
  for (const auto& [name, roles] : pending_frames_) {
    if (roles.empty()) throw CorpusError("frame '" + name + "' has an empty role list");
    frames_.push_back(name);  // std::map iteration is already sorted
  }
  for (int i = 0; i < static_cast<int>(frames_.size()); ++i) {
    frame_index_[frames_[i]] = i;
    roles_.push_back(pending_frames_[frames_[i]]);
  }
  for (const auto& [key, frame_names] : pending_lexicon_) {
    std::vector<int> ids;
    for (const auto& fn : frame_names) {
      auto it = frame_index_.find(fn);
      if (it == frame_index_.end())
        throw CorpusError("lexicon entry '" + key + "' references unknown frame '" + fn + "'");
      ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    lexicon_[key] = std::move(ids);
  }
  finalized_ = true;
}

int FrameOntology::frame_index(const std::string& name) const {
  auto it = frame_index_.find(name);
  return it == frame_index_.end() ? -1 : it->second;
}

const std::vector<std::string>& FrameOntology::roles_of(int frame_idx) const {
  return roles_.at(frame_idx);
}

const std::vector<std::string>* FrameOntology::roles_of(const std::string& frame) const {
  int idx = frame_index(frame);
  return idx < 0 ? nullptr : &roles_[idx];
}

const std::vector<int>* FrameOntology::licensed(const std::string& lemma_key) const {
  auto it = lexicon_.find(lemma_key);
  return it == lexicon_.end() ? nullptr : &it->second;
}

std::vector<std::string> FrameOntology::role_label_union() const {
  std::vector<std::string> all;
  for (const auto& rs : roles_) all.insert(all.end(), rs.begin(), rs.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

FrameOntology FrameOntology::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorpusError(std::string("malformed ontology JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("frames"))
    throw CorpusError("ontology JSON must be an object with a 'frames' key");
  FrameOntology onto;
  for (const auto& [name, body] : j.at("frames").items()) {
    if (!body.is_object() || !body.contains("roles"))
      throw CorpusError("frame '" + name + "' must be an object with a 'roles' array");
    std::vector<std::string> roles;
    for (const auto& r : body.at("roles")) roles.push_back(r.get<std::string>());
    onto.add_frame(name, std::move(roles));
  }
  if (j.contains("lexicon")) {
    for (const auto& [key, frames] : j.at("lexicon").items())
      for (const auto& f : frames) onto.add_lexicon_entry(key, f.get<std::string>());
  }
  onto.finalize();
  return onto;
}

FrameOntology FrameOntology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open ontology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string FrameOntology::to_json_text() const {
  json frames = json::object();
  for (int i = 0; i < num_frames(); ++i) frames[frames_[i]] = {{"roles", roles_[i]}};
  json lex = json::object();
  for (const auto& [key, ids] : lexicon_) {
    std::vector<std::string> names;
    for (int id : ids) names.push_back(frames_[id]);
    lex[key] = names;
  }
  return json{{"frames", frames}, {"lexicon", lex}}.dump();
}

void FrameOntology::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write ontology file: " + path);
  out << to_json_text() << "\n";
}

std::uint64_t FrameOntology::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_json_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Validation

static void check_span(const Span& s, int n, const std::string& what) {
  if (s.start < 0 || s.end < s.start || s.end >= n)
    throw CorpusError(what + " span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                      "] out of bounds for sentence of length " + std::to_string(n));
}

void validate_sentence(const AnnotatedSentence& sentence, const FrameOntology* ontology) {
  const int n = sentence.size();
  if (n == 0) throw CorpusError("sentence has no tokens");
  for (int i = 0; i < n; ++i) {
    if (sentence.tokens[i].text.empty()) throw CorpusError("empty token text at index " + std::to_string(i));
    if (sentence.tokens[i].index != i)
      throw CorpusError("token indices not contiguous from 0 (position " + std::to_string(i) + ")");
  }
  if (sentence.has_lemmas() && static_cast<int>(sentence.lemmas.size()) != n)
    throw CorpusError("lemma count does not match token count");
  for (const auto& tuple : sentence.tuples) {
    if (tuple.predicate.pieces.empty()) throw CorpusError("predicate with zero pieces");
    for (const auto& p : tuple.predicate.pieces) check_span(p, n, "predicate");
    for (size_t i = 1; i < tuple.predicate.pieces.size(); ++i) {
      const Span& prev = tuple.predicate.pieces[i - 1];
      const Span& cur = tuple.predicate.pieces[i];
      if (cur.start < prev.start) throw CorpusError("predicate pieces not sorted by start");
      if (prev.overlaps(cur)) throw CorpusError("predicate pieces overlap");
    }
    const std::vector<std::string>* roles = nullptr;
    if (ontology) {
      roles = ontology->roles_of(tuple.frame);
      if (!roles) throw CorpusError("frame '" + tuple.frame + "' not in ontology");
    }
    for (const auto& ra : tuple.roles) {
      check_span(ra.value, n, "role");
      if (roles && std::find(roles->begin(), roles->end(), ra.role_name) == roles->end())
        throw CorpusError("role '" + ra.role_name + "' not in role inventory of frame '" + tuple.frame + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// JSONL

static Span parse_span(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw CorpusError(what + " span must be a [start,end] integer pair");
  return Span{j[0].get<int>(), j[1].get<int>()};
}

AnnotatedSentence sentence_from_jsonl(const std::string& line, const FrameOntology* ontology, int line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw CorpusError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  try {
    if (!j.is_object() || !j.contains("tokens")) throw CorpusError("missing 'tokens' key");
    AnnotatedSentence s;
    int idx = 0;
    for (const auto& t : j.at("tokens")) s.tokens.push_back({t.get<std::string>(), idx++});
    if (j.contains("lemmas") && !j.at("lemmas").is_null())
      for (const auto& l : j.at("lemmas")) s.lemmas.push_back(l.get<std::string>());
    if (j.contains("tuples")) {
      for (const auto& tj : j.at("tuples")) {
        FrameTuple tuple;
        for (const auto& pj : tj.at("predicate")) tuple.predicate.pieces.push_back(parse_span(pj, "predicate"));
        tuple.frame = tj.at("frame").get<std::string>();
        if (tj.contains("roles")) {
          for (const auto& rj : tj.at("roles"))
            tuple.roles.push_back({rj.at("name").get<std::string>(), parse_span(rj.at("span"), "role")});
        }
        s.tuples.push_back(std::move(tuple));
      }
    }
    validate_sentence(s, ontology);
    return s;
  } catch (const CorpusError& e) {
    if (e.line() > 0) throw;
    throw CorpusError(e.what(), line_no);
  } catch (const json::exception& e) {
    throw CorpusError(std::string("bad sentence record: ") + e.what(), line_no);
  }
}

std::vector<AnnotatedSentence> load_corpus(const std::string& path, const FrameOntology* ontology) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  std::vector<AnnotatedSentence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(sentence_from_jsonl(line, ontology, line_no));
  }
  return out;
}

std::vector<AnnotatedSentence> load_corpus(const std::string& path, const FrameOntology& ontology) {
  return load_corpus(path, &ontology);
}

std::string sentence_to_jsonl(const AnnotatedSentence& sentence) {
  json j;
  std::vector<std::string> toks;
  for (const auto& t : sentence.tokens) toks.push_back(t.text);
  j["tokens"] = toks;
  j["lemmas"] = sentence.has_lemmas() ? json(sentence.lemmas) : json(nullptr);
  json tuples = json::array();
  for (const auto& tuple : sentence.tuples) {
    json tj;
    json pieces = json::array();
    for (const auto& p : tuple.predicate.pieces) pieces.push_back({p.start, p.end});
    tj["predicate"] = pieces;
    tj["frame"] = tuple.frame;
    json roles = json::array();
    for (const auto& r : tuple.roles)
      roles.push_back({{"name", r.role_name}, {"span", {r.value.start, r.value.end}}});
    tj["roles"] = roles;
    tuples.push_back(tj);
  }
  j["tuples"] = tuples;
  return j.dump();
}

void save_corpus(const std::string& path, const std::vector<AnnotatedSentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file: " + path);
  for (const auto& s : sentences) out << sentence_to_jsonl(s) << "\n";
}

CorpusStats corpus_stats(const std::vector<AnnotatedSentence>& sentences) {
  CorpusStats st;
  st.sentences = static_cast<long>(sentences.size());
  for (const auto& s : sentences) {
    st.predicates += static_cast<long>(s.tuples.size());
    for (const auto& t : s.tuples) st.roles += static_cast<long>(t.roles.size());
  }
  return st;
}

// ---------------------------------------------------------------------------
// Lemmatization

static bool ends_with(const std::string& s, const char* suffix) {
  const size_t m = std::char_traits<char>::length(suffix);
  return s.size() >= m && s.compare(s.size() - m, m, suffix) == 0;
}

std::string default_lemma(const std::string& token) {
  std::string w;
  w.reserve(token.size());
  for (unsigned char c : token) w.push_back(static_cast<char>(std::tolower(c)));
  // Exceptions that a bare s-strip would mangle.
  static const std::vector<std::string> kKeep = {"this", "his",  "was", "is", "us",
                                                "has",  "its",  "as",  "thus", "yes"};
  if (std::find(kKeep.begin(), kKeep.end(), w) != kKeep.end()) return w;
  if (ends_with(w, "ies") && w.size() >= 5) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  if (w.size() >= 5 && (ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "xes") ||
                        ends_with(w, "zes")))
    return w.substr(0, w.size() - 2);
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
  if (ends_with(w, "s") && w.size() >= 4) return w.substr(0, w.size() - 1);
  return w;
}

Lemmatizer default_lemmatizer() {
  return [](const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(default_lemma(t));
    return out;
  };
}

AnnotatedSentence lemmatize(const AnnotatedSentence& sentence, const Lemmatizer& lemmatizer) {
  std::vector<std::string> texts;
  for (const auto& t : sentence.tokens) texts.push_back(t.text);
  std::vector<std::string> lemmas = lemmatizer(texts);
  if (lemmas.size() != texts.size())
    throw CorpusError("lemmatizer returned " + std::to_string(lemmas.size()) + " lemmas for " +
                      std::to_string(texts.size()) + " tokens");
  for (size_t i = 0; i < lemmas.size(); ++i)
    if (lemmas[i].empty()) throw CorpusError("lemmatizer returned an empty lemma for token '" + texts[i] + "'");
  AnnotatedSentence out = sentence;
  out.lemmas = std::move(lemmas);
  return out;
}

std::string lemma_key(const Span& span, const std::vector<std::string>& lemmas) {
  std::string key;
  for (int t = span.start; t <= span.end; ++t) {
    if (t > span.start) key += ' ';
    key += lemmas.at(t);
  }
  return key;
}

}  // namespace fsp
