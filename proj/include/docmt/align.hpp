#pragma once

#include <map>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// IBM Model 1 lexical translation table with a NULL source word. Stores
/// t(target | source) and the per-iteration training log-likelihood.
struct AlignmentModel {
  static const std::string kNull;

  std::map<std::string, std::map<std::string, double>> t;
  std::vector<double> log_likelihood;

  /// t(target | source); unseen pairs score a small floor probability so
  /// alignment of unseen tokens stays defined.
  double prob(const std::string& source, const std::string& target) const;
};

/// Expectation-maximization over sentence pairs (source, target). The
/// log-likelihood entry for an iteration is computed under the parameters
/// entering that iteration, which makes the trace non-decreasing.
AlignmentModel train_aligner(
    const std::vector<std::pair<Sentence, Sentence>>& pairs, int iterations = 5);

/// Per-target-token argmax source index; -1 stands for the NULL word.
/// Ties resolve to NULL first, then the leftmost source token.
std::vector<int> align(const Sentence& source, const Sentence& target,
                       const AlignmentModel& model);

}  // namespace docmt
