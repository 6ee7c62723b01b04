#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// Additive per-sentence sufficient statistics for corpus-level BLEU.
/// Keeping these per sentence makes randomization tests cheap: a trial only
/// re-sums statistics instead of re-scanning text.
struct BleuStats {
  std::array<long, 4> match{};  // clipped n-gram matches, order n = index+1
  std::array<long, 4> total{};  // candidate n-gram counts
  long candidate_length = 0;
  long reference_length = 0;

  BleuStats& operator+=(const BleuStats& other);
};

struct BleuReport {
  double bleu = 0.0;  // in [0, 100]
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  long candidate_length = 0;
  long reference_length = 0;
};

BleuStats sentence_bleu_stats(const Sentence& candidate, const Sentence& reference);

/// Corpus BLEU from summed statistics. Orders with no candidate n-grams
/// (corpora of very short sentences) drop out of the geometric mean, so a
/// corpus compared against itself always scores exactly 100. Any remaining
/// zero precision collapses the score to 0.
BleuReport bleu_from_stats(const BleuStats& stats);

/// 4-gram corpus BLEU with clipped counts and brevity penalty over
/// tokenized, truecased text. Raises ConfigError on empty or mismatched
/// inputs.
BleuReport bleu(const std::vector<Sentence>& candidates,
                const std::vector<Sentence>& references);

struct SignificanceReport {
  double p_value = 1.0;
  double observed_delta = 0.0;  // BLEU(a) - BLEU(b)
  double bleu_a = 0.0;
  double bleu_b = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
};

/// Paired approximate randomization on corpus BLEU: each trial swaps each
/// sentence's system outputs with probability 1/2 and recomputes the BLEU
/// delta; the p-value is the plain fraction of trials with |delta| at least
/// the observed |delta|. Identical systems give p = 1.0 exactly.
SignificanceReport paired_significance(const std::vector<Sentence>& system_a,
                                       const std::vector<Sentence>& system_b,
                                       const std::vector<Sentence>& references,
                                       int trials = 10000, std::uint64_t seed = 1);

}  // namespace docmt
