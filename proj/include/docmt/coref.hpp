#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// One mention inside a document: a half-open token span [start, end) in
/// sentence sentence_index, with the head token's index and universal POS.
struct Mention {
  int sentence_index = 0;
  int start = 0;
  int end = 0;
  int head_index = 0;
  std::string head_pos;
  bool is_pronoun = false;

  bool operator==(const Mention& other) const {
    return sentence_index == other.sentence_index && start == other.start &&
           end == other.end;
  }
};

/// A coreference chain over one document, mentions in document order.
struct CorefChain {
  std::string doc_id;
  std::vector<Mention> mentions;
};

using ChainMap = std::map<std::string, std::vector<CorefChain>>;

enum class PronounClass { Intrasentential, Anaphoric, Cataphoric };

struct PronounClassification {
  Mention pronoun;
  int window = 0;
  PronounClass cls = PronounClass::Intrasentential;
};

struct WindowBucket {
  double anaphora_pct = 0.0;
  double cataphora_pct = 0.0;
};

/// Aggregate pronoun statistics. Percentages are over all classified
/// pronouns; histogram index w-1 holds window w for w in 1..10 and index 10
/// pools every window of 11 or more.
struct ClassificationReport {
  size_t total = 0;
  size_t intrasentential = 0;
  size_t anaphoric = 0;
  size_t cataphoric = 0;
  double intrasentential_pct = 0.0;
  double anaphoric_pct = 0.0;
  double cataphoric_pct = 0.0;
  std::array<WindowBucket, 11> histogram{};
};

/// One extracted test-suite item: a pronoun in sentence i whose nearest
/// coreferent mention sits in sentence i+1. Subset tags are any of
/// "DET" (postcedent span starts with a possessive determiner),
/// "PROPN" (postcedent head is a proper noun) and
/// "NOUN" (postcedent head is a proper or common noun).
struct CataphoraExample {
  std::string doc_id;
  int sentence_index = 0;
  Mention pronoun;
  Mention postcedent;
  std::set<std::string> subsets;
};

/// Signed sentence distance to the chain mention nearest to the pronoun
/// (negative = antecedent direction). Equal-distance ties resolve to the
/// antecedent. Raises ValidationError when the pronoun is not in the chain
/// or the chain has no other mention.
int resolution_window(const Mention& pronoun, const CorefChain& chain);

/// Classifies every pronoun mention of every chain. A mention counts as a
/// pronoun when its is_pronoun flag is set and its head token (case-folded)
/// is in the lexicon. Mentions out of document bounds raise ValidationError.
std::vector<PronounClassification> classify_pronouns(
    const std::vector<Sentence>& sentences, const std::vector<CorefChain>& chains,
    const std::set<std::string>& pronoun_lexicon);

/// Corpus-level aggregation over the source (English) side. A corpus with
/// zero classified pronouns yields an all-zero report.
ClassificationReport classify_corpus(const Corpus& corpus, const ChainMap& chains,
                                     const std::set<std::string>& pronoun_lexicon);

/// Extracts one example per sentence pair (i, i+1) with a window +1 pronoun
/// in sentence i. The postcedent is the chain's first mention in sentence
/// i+1 by span order; when several pronouns of one sentence qualify, the
/// pair keeps the first pronoun and the union of subset tags.
std::vector<CataphoraExample> extract_cataphora_suite(
    const Corpus& corpus, const ChainMap& chains,
    const std::set<std::string>& pronoun_lexicon);

/// Deterministic rule-based chain builder used to produce test fixtures:
/// links exact-matching capitalized nominals and attaches each lexicon
/// pronoun to the nearest gender-compatible nominal (ties toward the
/// antecedent). Not a substitute for a real resolver.
std::vector<CorefChain> heuristic_chain_fallback(const Document& english_doc);

/// Annotation JSONL: one record per document,
/// {"doc_id": ..., "chains": [[{sent,start,end,head,pos,pronoun}, ...], ...]}.
/// Mentions are sorted on load; chains with fewer than two mentions raise
/// ValidationError.
ChainMap load_annotations(const std::string& path);
void save_annotations(const ChainMap& chains, const std::string& path);

/// Writes the (window, anaphora_pct, cataphora_pct) histogram CSV, rows for
/// windows 1..10 plus a pooled "11+" row.
void save_histogram_csv(const ClassificationReport& report, const std::string& path);

}  // namespace docmt
