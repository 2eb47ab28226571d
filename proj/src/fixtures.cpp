#include "fsp/fixtures.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace fsp {

namespace {

const std::vector<std::string> kVerbs = {
    "meet", "walk", "buy",  "sell",  "talk",  "run",   "give",  "take",  "find",  "lose",
    "open", "close", "start", "finish", "read", "write", "build", "break", "push", "pull"};
const std::vector<std::string> kNouns = {
    "team",   "plan",   "door",   "book",   "road",   "house",  "market", "paper", "group", "idea",
    "garden", "river",  "signal", "report", "window", "engine", "ticket", "letter", "bridge", "story"};
const std::vector<std::string> kFunction = {"the", "a", "of", "on", "in", "and", "near", "with"};
const std::vector<std::string> kParticles = {"up", "out", "off", "away"};
const std::vector<std::string> kFrameNames = {
    "Arriving", "Commerce_buy", "Statement", "Motion",       "Giving",
    "Taking",   "Finding",      "Opening",   "Activity_start", "Social_event",
    "Reading",  "Creating",     "Destroying", "Closing",       "Losing"};
const std::vector<std::string> kRolePool = {"Agent", "Theme",     "Goal",  "Source", "Time",
                                            "Place", "Recipient", "Topic", "Manner", "Duration"};

// Platform-stable draws: mt19937_64 has a standardized sequence, the std
// distributions do not.
int draw(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }
bool chance(std::mt19937_64& rng, double p) { return (rng() % 10000) < static_cast<std::uint64_t>(p * 10000); }

struct PendingPredicate {
  std::vector<Span> pieces;
  int frame = -1;
};

}  // namespace

Fixture generate_fixture(std::uint64_t seed, int n_sentences, const FixtureParams& params) {
  if (n_sentences < 1) throw std::invalid_argument("generate_fixture: n_sentences must be >= 1");
  if (params.max_predicate_pieces > 4)
    throw std::invalid_argument("generate_fixture: max_predicate_pieces capped at 4");
  std::mt19937_64 rng(seed);

  Fixture fx;
  const int nf = std::min<int>(params.num_frames, static_cast<int>(kFrameNames.size()));
  std::vector<std::vector<std::string>> frame_roles(nf);
  for (int f = 0; f < nf; ++f) {
    int nr = 2 + draw(rng, 3);
    std::vector<std::string> pool = kRolePool;
    std::vector<std::string> roles;
    for (int r = 0; r < nr; ++r) {
      int k = draw(rng, static_cast<int>(pool.size()));
      roles.push_back(pool[k]);
      pool.erase(pool.begin() + k);
    }
    fx.ontology.add_frame(kFrameNames[f], roles);
  }
  fx.ontology.finalize();  // role inventories usable; lexicon attached below

  // lemma key -> required frame names, filled while sentences are generated
  std::map<std::string, std::set<std::string>> needed_lexicon;
  std::set<std::vector<std::string>> seen_token_seqs;

  for (int si = 0; si < n_sentences; ++si) {
    const bool force_discontinuous = n_sentences >= 10 && si == 3;
    const bool force_shared_span = n_sentences >= 10 && si == 5;

    AnnotatedSentence sent;
    for (int attempt = 0; attempt < 24; ++attempt) {
      sent = AnnotatedSentence{};
      const int n = params.min_tokens + draw(rng, params.max_tokens - params.min_tokens + 1);
      std::vector<std::string> toks(n);
      for (int t = 0; t < n; ++t)
        toks[t] = chance(rng, 0.35) ? kFunction[draw(rng, (int)kFunction.size())]
                                    : kNouns[draw(rng, (int)kNouns.size())];

      std::vector<bool> taken(n, false);
      auto free_at = [&](int pos, int len) {
        if (pos < 0 || pos + len > n) return false;
        for (int t = pos; t < pos + len; ++t)
          if (taken[t]) return false;
        return true;
      };
      auto claim = [&](int pos, int len) {
        for (int t = pos; t < pos + len; ++t) taken[t] = true;
      };

      std::vector<PendingPredicate> preds;
      int n_pred = 1 + draw(rng, 2);
      for (int k = 0; k < n_pred; ++k) {
        PendingPredicate pp;
        pp.frame = draw(rng, nf);
        const bool want_disc = (k == 0 && force_discontinuous) || (!force_discontinuous && chance(rng, 0.15));
        const bool want_two_word = !want_disc && chance(rng, 0.15);
        if (want_disc && params.max_predicate_pieces >= 2 && n >= 5) {
          // verb ... particle, two single-token pieces with a gap
          int a = -1, b = -1;
          for (int tries = 0; tries < 30 && a < 0; ++tries) {
            int ca = draw(rng, n - 2);
            int cb = ca + 2 + draw(rng, std::max(1, n - ca - 2));
            if (cb < n && free_at(ca, 1) && free_at(cb, 1)) { a = ca; b = cb; }
          }
          if (a < 0) continue;  // no room; caller retries whole sentence
          toks[a] = kVerbs[draw(rng, (int)kVerbs.size())];
          toks[b] = kParticles[draw(rng, (int)kParticles.size())];
          claim(a, 1);
          claim(b, 1);
          pp.pieces = {{a, a}, {b, b}};
          needed_lexicon[toks[a]].insert(fx.ontology.frame_name(pp.frame));
          needed_lexicon[toks[b]].insert(fx.ontology.frame_name(pp.frame));
        } else if (want_two_word && n >= 4) {
          int a = -1;
          for (int tries = 0; tries < 30 && a < 0; ++tries) {
            int ca = draw(rng, n - 1);
            if (free_at(ca, 2)) a = ca;
          }
          if (a < 0) continue;
          toks[a] = kVerbs[draw(rng, (int)kVerbs.size())];
          toks[a + 1] = kParticles[draw(rng, (int)kParticles.size())];
          claim(a, 2);
          pp.pieces = {{a, a + 1}};
          needed_lexicon[toks[a] + " " + toks[a + 1]].insert(fx.ontology.frame_name(pp.frame));
        } else {
          int a = -1;
          for (int tries = 0; tries < 30 && a < 0; ++tries) {
            int ca = draw(rng, n);
            if (free_at(ca, 1)) a = ca;
          }
          if (a < 0) continue;
          toks[a] = kVerbs[draw(rng, (int)kVerbs.size())];
          claim(a, 1);
          pp.pieces = {{a, a}};
          needed_lexicon[toks[a]].insert(fx.ontology.frame_name(pp.frame));
        }
        preds.push_back(pp);
      }
      if (preds.empty()) continue;
      if (force_discontinuous && !preds[0].pieces.empty() && preds[0].pieces.size() < 2) continue;
      if (force_shared_span && preds.size() < 2) continue;

      for (auto& t : toks)
        if (t.empty()) t = "the";

      sent.tokens.reserve(n);
      for (int t = 0; t < n; ++t) sent.tokens.push_back({toks[t], t});
      sent.lemmas = toks;  // base forms only, so lemmas equal tokens

      for (size_t k = 0; k < preds.size(); ++k) {
        const auto& pp = preds[k];
        FrameTuple tuple;
        tuple.predicate.pieces = pp.pieces;
        std::sort(tuple.predicate.pieces.begin(), tuple.predicate.pieces.end());
        tuple.frame = fx.ontology.frame_name(pp.frame);
        const auto& inv = fx.ontology.roles_of(pp.frame);
        int m = 1 + draw(rng, params.max_roles_per_tuple);
        if (force_shared_span && k == 0) {
          // first role of tuple 0 covers tuple 1's first predicate piece
          tuple.roles.push_back({inv[draw(rng, (int)inv.size())], preds[1].pieces[0]});
          --m;
        }
        for (int r = 0; r < m; ++r) {
          int len = 1 + draw(rng, 3);
          if (len > n) len = 1;
          int start = draw(rng, n - len + 1);
          tuple.roles.push_back({inv[draw(rng, (int)inv.size())], Span{start, start + len - 1}});
        }
        sent.tuples.push_back(std::move(tuple));
      }

      if (!seen_token_seqs.count(toks)) {
        seen_token_seqs.insert(toks);
        break;
      }
    }
    if (sent.tokens.empty())
      throw std::runtime_error("generate_fixture: failed to build a sentence (parameters too tight)");
    fx.sentences.push_back(std::move(sent));
  }

  for (const auto& [key, frames] : needed_lexicon) {
    for (const auto& f : frames) fx.ontology.add_lexicon_entry(key, f);
    if (chance(rng, 0.5)) fx.ontology.add_lexicon_entry(key, fx.ontology.frame_name(draw(rng, nf)));
  }
  fx.ontology.finalize();

  for (const auto& s : fx.sentences) validate_sentence(s, &fx.ontology);
  return fx;
}

}  // namespace fsp
