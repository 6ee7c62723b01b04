#include "docmt/vocab.hpp"

#include <algorithm>
#include <map>

#include "docmt/error.hpp"

namespace docmt {

namespace {
const std::vector<std::string> kSpecials = {"<pad>", "<s>", "</s>", "<unk>"};
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = kSpecials;
  for (const std::string& t : tokens) {
    if (t.empty()) throw ValidationError("vocabulary token must be non-empty");
    tokens_.push_back(t);
  }
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw ValidationError("vocabulary id " + std::to_string(id) +
                          " out of range");
  return tokens_[static_cast<size_t>(id)];
}

std::vector<int> Vocabulary::encode(const Sentence& sentence) const {
  std::vector<int> ids;
  ids.reserve(sentence.size());
  for (const std::string& t : sentence) ids.push_back(id(t));
  return ids;
}

Sentence Vocabulary::decode(const std::vector<int>& ids) const {
  Sentence out;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    out.push_back(token(i));
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<const std::vector<Sentence>*>& corpora,
                            long min_count) {
  std::map<std::string, long> counts;
  for (const auto* sentences : corpora)
    for (const Sentence& s : *sentences)
      for (const std::string& t : s) counts[t] += 1;
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  for (const auto& [token, count] : sorted) {
    bool special =
        std::find(kSpecials.begin(), kSpecials.end(), token) != kSpecials.end();
    if (count >= min_count && !special) tokens.push_back(token);
  }
  return Vocabulary(tokens);
}

}  // namespace docmt
