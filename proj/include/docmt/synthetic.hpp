#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// Synthetic cataphora corpus: a toy language pair whose only ambiguity is
/// the pronoun "it", which translates to "er" or "sie" depending on the
/// grammatical gender of a noun in a NEIGHBORING sentence. Every other token
/// maps one-to-one, so a sentence-level model can translate everything except
/// the pronoun, and context models reveal exactly how much neighbor access
/// is worth.
///
/// Modes:
///  - "future": documents are (pronoun sentence, noun sentence) pairs with
///    genders drawn independently per pair. The determining noun is always in
///    the sentence AFTER the pronoun, so offset +1 carries the answer while
///    offset -1 (the previous pair's noun) is uncorrelated noise.
///  - "surround": 11-sentence documents about a single protagonist noun,
///    with pronoun sentences at indices 2, 5, and 8 and the protagonist
///    mentioned in every other sentence, so every offset in {-2,-1,+1,+2}
///    carries the answer.
struct SyntheticOptions {
  std::string mode = "future";
  int documents = 100;
  int pairs_per_doc = 4;  // future mode only; sentences per doc = 2 * pairs
  std::uint64_t seed = 1;

  void validate() const;
};

Corpus synthetic_cataphora(const SyntheticOptions& opts);

/// Pronoun translation accuracy: a pronoun-bearing sentence counts as
/// correct when the decoded tokens contain the reference pronoun form and
/// not the opposite one.
struct PronounScore {
  int total = 0;
  int correct = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

PronounScore score_pronouns(const Corpus& reference,
                            const std::vector<std::vector<Sentence>>& decoded);

/// Position of the (unique) gendered noun in a source sentence, if any.
std::optional<size_t> synthetic_noun_position(const Sentence& source);

/// Position of "it" in a source sentence, if any.
std::optional<size_t> synthetic_pronoun_position(const Sentence& source);

bool synthetic_noun_is_masculine(const std::string& source_noun);

}  // namespace docmt
