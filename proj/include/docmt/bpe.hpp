#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

// Byte-pair-encoding subword model: an ordered list of symbol-pair merges
// plus the continuation marker appended to non-final subwords.
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;

  BpeModel() = default;
  BpeModel(std::vector<Merge> merges, std::string marker = "@@");

  const std::vector<Merge>& merges() const { return merges_; }
  const std::string& marker() const { return marker_; }
  size_t size() const { return merges_.size(); }

  // Segments one token into subwords. Non-final subwords carry the marker.
  std::vector<std::string> segment(const std::string& token) const;

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

 private:
  std::vector<Merge> merges_;
  std::string marker_ = "@@";
  // pair "left right" -> learning step, for fast lookup during segmentation
  std::unordered_map<std::string, int> rank_;
};

// Learns merges over the pooled word-frequency table of all sentences.
// Most frequent pair first, ties broken by lexicographic pair order.
// Stops early once no pair occurs at least twice.
BpeModel learn_bpe(const std::vector<Sentence>& corpus, int n_merges,
                   std::string marker = "@@");

std::vector<std::string> apply_bpe(const std::string& token, const BpeModel& model);
Sentence apply_bpe(const Sentence& sentence, const BpeModel& model);
Sentence unapply_bpe(const Sentence& subwords, const std::string& marker = "@@");

}  // namespace docmt
