#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fsp/corpus.hpp"

namespace fsp {

/// Knobs for the synthetic corpus generator. Defaults give a small but
/// non-trivial ontology; every generated frame is licensed by the
/// generated lexicon, so LU-masked training is consistent by construction.
struct FixtureParams {
  int num_frames = 10;          // clipped to the built-in frame name pool
  int min_tokens = 6;
  int max_tokens = 12;
  int max_roles_per_tuple = 3;
  int max_predicate_pieces = 2;  // hard cap 4
};

struct Fixture {
  FrameOntology ontology;
  std::vector<AnnotatedSentence> sentences;
};

/// Deterministic synthetic corpus. For n_sentences >= 10 the output is
/// guaranteed to contain at least one discontinuous predicate and at
/// least one span that is simultaneously a predicate and a role.
Fixture generate_fixture(std::uint64_t seed, int n_sentences, const FixtureParams& params = {});

}  // namespace fsp
