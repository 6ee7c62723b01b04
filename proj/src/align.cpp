#include "docmt/align.hpp"

#include <cmath>
#include <set>

#include "docmt/error.hpp"

namespace docmt {

const std::string AlignmentModel::kNull = "<NULL>";

namespace {
constexpr double kFloorProb = 1e-12;
}

double AlignmentModel::prob(const std::string& source,
                            const std::string& target) const {
  auto row = t.find(source);
  if (row == t.end()) return kFloorProb;
  auto cell = row->second.find(target);
  return cell == row->second.end() ? kFloorProb : cell->second;
}

AlignmentModel train_aligner(
    const std::vector<std::pair<Sentence, Sentence>>& pairs, int iterations) {
  if (pairs.empty()) throw ConfigError("aligner: empty parallel data");
  for (const auto& [src, tgt] : pairs)
    if (src.empty() || tgt.empty())
      throw ConfigError("aligner: empty sentence in parallel data");
  if (iterations < 1) throw ConfigError("aligner: iterations must be >= 1");

  std::set<std::string> target_vocab;
  for (const auto& [src, tgt] : pairs)
    for (const auto& f : tgt) target_vocab.insert(f);
  double uniform = 1.0 / static_cast<double>(target_vocab.size());

  AlignmentModel model;
  auto source_row = [&](const Sentence& src, size_t i) -> const std::string& {
    return i == 0 ? AlignmentModel::kNull : src[i - 1];
  };

  // uniform initialization over the observed target vocabulary
  for (const auto& [src, tgt] : pairs) {
    for (size_t i = 0; i <= src.size(); ++i) {
      auto& row = model.t[source_row(src, i)];
      for (const auto& f : tgt) row[f] = uniform;
    }
  }

  for (int iter = 0; iter < iterations; ++iter) {
    std::map<std::string, std::map<std::string, double>> counts;
    std::map<std::string, double> totals;
    double log_likelihood = 0.0;

    for (const auto& [src, tgt] : pairs) {
      double log_len = std::log(static_cast<double>(src.size() + 1));
      for (const auto& f : tgt) {
        double denom = 0.0;
        for (size_t i = 0; i <= src.size(); ++i)
          denom += model.prob(source_row(src, i), f);
        log_likelihood += std::log(denom) - log_len;
        for (size_t i = 0; i <= src.size(); ++i) {
          const std::string& e = source_row(src, i);
          double delta = model.prob(e, f) / denom;
          counts[e][f] += delta;
          totals[e] += delta;
        }
      }
    }
    model.log_likelihood.push_back(log_likelihood);

    for (auto& [e, row] : counts) {
      double total = totals[e];
      auto& trow = model.t[e];
      for (auto& [f, c] : row) trow[f] = c / total;
    }
  }
  return model;
}

std::vector<int> align(const Sentence& source, const Sentence& target,
                       const AlignmentModel& model) {
  std::vector<int> links;
  links.reserve(target.size());
  for (const auto& f : target) {
    int best = -1;
    double best_p = model.prob(AlignmentModel::kNull, f);
    for (size_t i = 0; i < source.size(); ++i) {
      double p = model.prob(source[i], f);
      if (p > best_p) {
        best_p = p;
        best = static_cast<int>(i);
      }
    }
    links.push_back(best);
  }
  return links;
}

}  // namespace docmt
