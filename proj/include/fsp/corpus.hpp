#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fsp {

/// Error raised while reading or validating corpus data. When the error
/// originates from a JSONL file, `line` is the 1-based offending line.
class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct Token {
  std::string text;
  int index = 0;  // 0-based position in the sentence
};

/// Closed token interval [start, end].
struct Span {
  int start = 0;
  int end = 0;
  int length() const { return end - start + 1; }
  bool contains(int t) const { return start <= t && t <= end; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  auto operator<=>(const Span&) const = default;
};

/// A predicate is an ordered list of non-overlapping spans; two or more
/// pieces mean the predicate is discontinuous.
struct Predicate {
  std::vector<Span> pieces;
  bool discontinuous() const { return pieces.size() >= 2; }
  auto operator<=>(const Predicate&) const = default;
};

struct RoleAssignment {
  std::string role_name;
  Span value;
  auto operator<=>(const RoleAssignment&) const = default;
};

struct FrameTuple {
  Predicate predicate;
  std::string frame;
  std::vector<RoleAssignment> roles;
  auto operator<=>(const FrameTuple&) const = default;
};

struct AnnotatedSentence {
  std::vector<Token> tokens;
  std::vector<FrameTuple> tuples;
  std::vector<std::string> lemmas;  // empty when not provided
  int size() const { return static_cast<int>(tokens.size()); }
  bool has_lemmas() const { return !lemmas.empty(); }
};

inline bool operator==(const Token& a, const Token& b) {
  return a.text == b.text && a.index == b.index;
}
inline bool operator==(const AnnotatedSentence& a, const AnnotatedSentence& b) {
  return a.tokens == b.tokens && a.tuples == b.tuples && a.lemmas == b.lemmas;
}

/// Frame inventory, per-frame role inventories and the lexical-unit lexicon.
/// Frames are kept sorted by name; the sorted position is the frame index
/// used everywhere else (frame distributions, tie-breaking).
class FrameOntology {
 public:
  FrameOntology() = default;

  /// Builds from the ontology JSON schema:
  ///   {"frames": {frame: {"roles": [str]}}, "lexicon": {lemma: [frame, ...]}}
  static FrameOntology load(const std::string& path);
  static FrameOntology from_json_text(const std::string& text);
  void save(const std::string& path) const;
  std::string to_json_text() const;

  /// Programmatic construction (fixtures, tests). Frames get sorted.
  void add_frame(const std::string& name, std::vector<std::string> roles);
  void add_lexicon_entry(const std::string& lemma_key, const std::string& frame);
  void finalize();  // sorts frames, resolves lexicon names to indices, validates

  int num_frames() const { return static_cast<int>(frames_.size()); }
  const std::vector<std::string>& frames() const { return frames_; }
  const std::string& frame_name(int idx) const { return frames_.at(idx); }
  int frame_index(const std::string& name) const;  // -1 when unknown
  const std::vector<std::string>& roles_of(int frame_idx) const;
  const std::vector<std::string>* roles_of(const std::string& frame) const;

  /// Licensed frame indices for a pseudo lexical unit key, or nullptr when
  /// the key is absent from the lexicon.
  const std::vector<int>* licensed(const std::string& lemma_key) const;
  const std::map<std::string, std::vector<int>>& lexicon() const { return lexicon_; }

  /// Deduplicated, sorted union of all role names over all frames.
  std::vector<std::string> role_label_union() const;

  /// Stable content hash (FNV-1a over the canonical JSON form).
  std::uint64_t digest() const;

 private:
  std::vector<std::string> frames_;
  std::unordered_map<std::string, int> frame_index_;
  std::vector<std::vector<std::string>> roles_;
  std::map<std::string, std::vector<int>> lexicon_;
  // staging area used before finalize()
  std::map<std::string, std::vector<std::string>> pending_frames_;
  std::map<std::string, std::vector<std::string>> pending_lexicon_;
  bool finalized_ = false;
};

/// Validates all type invariants of a sentence against an ontology.
/// Throws CorpusError naming the first violation. Pass nullptr to skip
/// the ontology membership checks (bounds are always checked).
void validate_sentence(const AnnotatedSentence& sentence, const FrameOntology* ontology);

/// Reads a JSONL corpus. Every sentence is validated; errors carry the
/// 1-based line number. Sentence schema:
///   {"tokens": [str], "lemmas": [str] | null,
///    "tuples": [{"predicate": [[start,end],...], "frame": str,
///                "roles": [{"name": str, "span": [start,end]}]}]}
std::vector<AnnotatedSentence> load_corpus(const std::string& path, const FrameOntology& ontology);
std::vector<AnnotatedSentence> load_corpus(const std::string& path, const FrameOntology* ontology);

void save_corpus(const std::string& path, const std::vector<AnnotatedSentence>& sentences);
std::string sentence_to_jsonl(const AnnotatedSentence& sentence);
AnnotatedSentence sentence_from_jsonl(const std::string& line, const FrameOntology* ontology, int line_no = 0);

struct CorpusStats {
  long sentences = 0;
  long predicates = 0;
  long roles = 0;
  CorpusStats operator+(const CorpusStats& o) const {
    return {sentences + o.sentences, predicates + o.predicates, roles + o.roles};
  }
  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const std::vector<AnnotatedSentence>& sentences);

/// A lemmatizer maps the token strings of one sentence to exactly one
/// lemma per token.
using Lemmatizer = std::function<std::vector<std::string>(const std::vector<std::string>&)>;

/// The built-in rule lemmatizer: lowercase plus a small English
/// suffix-strip table (see README for the exact rules).
std::string default_lemma(const std::string& token);
Lemmatizer default_lemmatizer();

/// Returns a copy of the sentence with lemmas filled in. Errors when the
/// lemmatizer returns the wrong count or an empty lemma.
AnnotatedSentence lemmatize(const AnnotatedSentence& sentence, const Lemmatizer& lemmatizer);

/// Space-joined lemma string of a span; the pseudo lexical unit key.
std::string lemma_key(const Span& span, const std::vector<std::string>& lemmas);

}  // namespace fsp
