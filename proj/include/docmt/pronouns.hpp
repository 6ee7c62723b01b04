#pragma once

#include <set>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// Closed set of pronoun surface forms for one language; membership tests
/// are case-insensitive. The English, German, and Portuguese sets used for
/// all pronoun-focused evaluation ship both as data files
/// (data/pronouns/<lang>.txt) and as compiled-in copies.
class PronounLexicon {
 public:
  PronounLexicon() = default;
  PronounLexicon(std::string language, std::set<std::string> forms);

  /// Compiled-in lexicon; language is one of "en", "de", "pt".
  static PronounLexicon builtin(const std::string& language);

  /// One pronoun per line, UTF-8, lowercased on load.
  static PronounLexicon load_file(const std::string& language,
                                  const std::string& path);

  bool contains(const std::string& token) const;
  const std::string& language() const { return language_; }
  const std::set<std::string>& forms() const { return forms_; }

 private:
  std::string language_;
  std::set<std::string> forms_;
};

struct AptOptions {
  /// Credit for aligned pronoun sets that overlap without matching exactly.
  /// The default keeps only exact matches.
  double partial_weight = 0.0;
};

struct AptReport {
  double score = 0.0;  // in [0, 1]
  long pronouns = 0;   // evaluated source pronoun tokens
};

/// Accuracy of pronoun translation. For every source pronoun token the
/// multiset of candidate tokens aligned to it is compared (case-folded)
/// against the multiset of reference tokens aligned to it; equal multisets
/// score 1. links[s][j] is the source index aligned to target token j of
/// sentence s, -1 for the NULL word. Raises ConfigError when the corpus
/// contains no source pronoun.
AptReport apt(const std::vector<Sentence>& source,
              const std::vector<Sentence>& candidate,
              const std::vector<Sentence>& reference,
              const std::vector<std::vector<int>>& candidate_links,
              const std::vector<std::vector<int>>& reference_links,
              const PronounLexicon& source_lexicon, const AptOptions& opts = {});

struct PrfReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long overlap = 0;
  long candidate_total = 0;
  long reference_total = 0;
  bool precision_defined = true;
  bool recall_defined = true;
};

/// Clipped-count pronoun precision/recall/F1 over dictionary-matched target
/// pronouns, micro-averaged across the sentences whose source side contains
/// at least one source-lexicon pronoun.
PrfReport pronoun_prf(const std::vector<Sentence>& source,
                      const std::vector<Sentence>& candidate,
                      const std::vector<Sentence>& reference,
                      const PronounLexicon& source_lexicon,
                      const PronounLexicon& target_lexicon);

}  // namespace docmt
