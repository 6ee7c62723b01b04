#include "docmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "docmt/error.hpp"
#include "docmt/rng.hpp"

namespace docmt {

namespace {

// n-gram keyed by its tokens joined with a separator no token contains
// (tokens come from whitespace tokenization)
std::map<std::string, long> ngram_counts(const Sentence& sent, size_t n) {
  std::map<std::string, long> counts;
  if (sent.size() < n) return counts;
  for (size_t i = 0; i + n <= sent.size(); ++i) {
    std::string key = sent[i];
    for (size_t k = 1; k < n; ++k) key += ' ' + sent[i + k];
    counts[key] += 1;
  }
  return counts;
}

double corpus_bleu_value(const BleuStats& stats) {
  if (stats.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < 4; ++n) {
    if (stats.total[n] == 0) continue;
    if (stats.match[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(stats.match[n]) / stats.total[n]);
    orders += 1;
  }
  if (orders == 0) return 0.0;
  double bp = stats.candidate_length >= stats.reference_length
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(stats.reference_length) /
                                       stats.candidate_length);
  return 100.0 * bp * std::exp(log_sum / orders);
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int n = 0; n < 4; ++n) {
    match[n] += other.match[n];
    total[n] += other.total[n];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

BleuStats sentence_bleu_stats(const Sentence& candidate, const Sentence& reference) {
  BleuStats stats;
  stats.candidate_length = static_cast<long>(candidate.size());
  stats.reference_length = static_cast<long>(reference.size());
  for (size_t n = 1; n <= 4; ++n) {
    auto cand_counts = ngram_counts(candidate, n);
    auto ref_counts = ngram_counts(reference, n);
    long total = 0;
    long match = 0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) match += std::min(count, it->second);
    }
    stats.total[n - 1] = total;
    stats.match[n - 1] = match;
  }
  return stats;
}

BleuReport bleu_from_stats(const BleuStats& stats) {
  if (stats.candidate_length == 0)
    throw ConfigError("bleu: empty candidate corpus");
  BleuReport report;
  report.candidate_length = stats.candidate_length;
  report.reference_length = stats.reference_length;
  for (int n = 0; n < 4; ++n)
    report.precisions[n] =
        stats.total[n] == 0
            ? 0.0
            : static_cast<double>(stats.match[n]) / stats.total[n];
  report.brevity_penalty =
      stats.candidate_length >= stats.reference_length
          ? 1.0
          : std::exp(1.0 - static_cast<double>(stats.reference_length) /
                               stats.candidate_length);
  report.bleu = corpus_bleu_value(stats);
  return report;
}

BleuReport bleu(const std::vector<Sentence>& candidates,
                const std::vector<Sentence>& references) {
  if (candidates.empty()) throw ConfigError("bleu: empty corpus");
  if (candidates.size() != references.size())
    throw ConfigError("bleu: " + std::to_string(candidates.size()) +
                      " candidates vs " + std::to_string(references.size()) +
                      " references");
  BleuStats stats;
  for (size_t i = 0; i < candidates.size(); ++i)
    stats += sentence_bleu_stats(candidates[i], references[i]);
  return bleu_from_stats(stats);
}

SignificanceReport paired_significance(const std::vector<Sentence>& system_a,
                                       const std::vector<Sentence>& system_b,
                                       const std::vector<Sentence>& references,
                                       int trials, std::uint64_t seed) {
  if (system_a.size() != system_b.size() || system_a.size() != references.size())
    throw ConfigError("significance: output/reference counts differ");
  if (system_a.empty()) throw ConfigError("significance: empty corpus");
  if (trials <= 0) throw ConfigError("significance: trials must be positive");

  size_t n = system_a.size();
  std::vector<BleuStats> stats_a(n), stats_b(n);
  BleuStats sum_a, sum_b;
  for (size_t i = 0; i < n; ++i) {
    stats_a[i] = sentence_bleu_stats(system_a[i], references[i]);
    stats_b[i] = sentence_bleu_stats(system_b[i], references[i]);
    sum_a += stats_a[i];
    sum_b += stats_b[i];
  }

  SignificanceReport report;
  report.trials = trials;
  report.seed = seed;
  report.bleu_a = corpus_bleu_value(sum_a);
  report.bleu_b = corpus_bleu_value(sum_b);
  report.observed_delta = report.bleu_a - report.bleu_b;

  Rng rng(seed);
  double threshold = std::abs(report.observed_delta);
  long hits = 0;
  for (int t = 0; t < trials; ++t) {
    BleuStats trial_a, trial_b;
    for (size_t i = 0; i < n; ++i) {
      if (rng.coin()) {
        trial_a += stats_b[i];
        trial_b += stats_a[i];
      } else {
        trial_a += stats_a[i];
        trial_b += stats_b[i];
      }
    }
    double delta = corpus_bleu_value(trial_a) - corpus_bleu_value(trial_b);
    if (std::abs(delta) >= threshold) hits += 1;
  }
  report.p_value = static_cast<double>(hits) / trials;
  return report;
}

}  // namespace docmt
