#pragma once

#include <map>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// Frequency-based truecaser. For every token type (keyed by its folded
/// lowercase form) the model remembers how often each surface form occurred
/// in positions where casing is informative; the most frequent form wins,
/// ties broken lexicographically.
class TruecaseModel {
 public:
  /// lower form -> (surface form -> count). Ordered maps keep the model file
  /// and tie-breaking deterministic.
  using FormCounts = std::map<std::string, std::map<std::string, long>>;

  TruecaseModel() = default;
  explicit TruecaseModel(FormCounts counts);

  /// Canonical surface form for a token, or empty when unknown.
  std::string canonical(const std::string& token) const;

  bool known(const std::string& token) const;
  const FormCounts& counts() const { return counts_; }

  void save(const std::string& path) const;
  static TruecaseModel load(const std::string& path);

 private:
  FormCounts counts_;
  std::map<std::string, std::string> canonical_;  // lower -> best form
};

/// Counts surface forms in non-sentence-initial positions; token types seen
/// only sentence-initially fall back to their initial occurrences.
TruecaseModel learn_truecase(const std::vector<Sentence>& corpus);

/// Replaces the sentence-initial token by its canonical form; other tokens
/// are untouched. Unknown initial tokens are left as-is.
Sentence apply_truecase(const Sentence& sentence, const TruecaseModel& model);

/// Uppercases the first character of the first token (model-free inverse for
/// display/evaluation of sentence-initial casing).
Sentence detruecase(const Sentence& sentence);

}  // namespace docmt
