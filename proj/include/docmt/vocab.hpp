#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

/// Token <-> id table shared between source and target (joint BPE makes the
/// two sides one vocabulary). Ids 0..3 are reserved specials.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  /// Builds from explicit token list (specials prepended automatically).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;  // kUnk when missing
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const Sentence& sentence) const;
  Sentence decode(const std::vector<int>& ids) const;  // skips specials

  /// All tokens including the specials, in id order.
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Frequency-sorted vocabulary over every token of the given sentences
/// (ties broken lexicographically so builds are deterministic).
Vocabulary build_vocabulary(const std::vector<const std::vector<Sentence>*>& corpora,
                            long min_count = 1);

}  // namespace docmt
