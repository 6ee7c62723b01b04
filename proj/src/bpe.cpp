#include "docmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "docmt/error.hpp"
#include "docmt/utf8.hpp"

namespace docmt {

namespace {

using Merge = BpeModel::Merge;
using Symbols = std::vector<std::string>;

std::string pair_key(const std::string& left, const std::string& right) {
  return left + ' ' + right;
}

Symbols merge_in_word(const Symbols& syms, const Merge& m) {
  Symbols out;
  out.reserve(syms.size());
  for (size_t i = 0; i < syms.size();) {
    if (i + 1 < syms.size() && syms[i] == m.first && syms[i + 1] == m.second) {
      out.push_back(m.first + m.second);
      i += 2;
    } else {
      out.push_back(syms[i]);
      i += 1;
    }
  }
  return out;
}

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges, std::string marker)
    : merges_(std::move(merges)), marker_(std::move(marker)) {
  if (marker_.empty()) throw ValidationError("bpe: empty continuation marker");
  for (size_t i = 0; i < merges_.size(); ++i) {
    const auto& [left, right] = merges_[i];
    if (left.empty() || right.empty())
      throw ValidationError("bpe: empty symbol in merge " + std::to_string(i));
    // keep the earliest rank if the same pair somehow appears twice
    rank_.emplace(pair_key(left, right), static_cast<int>(i));
  }
}

std::vector<std::string> BpeModel::segment(const std::string& token) const {
  Symbols syms = utf8::codepoints(token);
  if (syms.size() > 1 && !merges_.empty()) {
    // Walk the merge list in learned order, skipping merges whose pair is
    // absent. A merged symbol is longer than either half, so one greedy
    // left-to-right pass exhausts each merge.
    int next_rank = 0;
    while (syms.size() > 1) {
      int best = -1;
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        auto it = rank_.find(pair_key(syms[i], syms[i + 1]));
        if (it != rank_.end() && it->second >= next_rank &&
            (best < 0 || it->second < best))
          best = it->second;
      }
      if (best < 0) break;
      syms = merge_in_word(syms, merges_[best]);
      next_rank = best + 1;
    }
  }
  for (size_t i = 0; i + 1 < syms.size(); ++i) syms[i] += marker_;
  return syms;
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write bpe model: " + path);
  out << "#bpe 1 " << marker_ << '\n';
  for (const auto& [left, right] : merges_) out << left << ' ' << right << '\n';
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open bpe model: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("bpe model is empty: " + path);
  std::istringstream header(line);
  std::string magic, marker;
  int version = 0;
  if (!(header >> magic >> version >> marker) || magic != "#bpe")
    throw ParseError("bpe model: bad header line");
  if (version != 1)
    throw ParseError("bpe model: unsupported version " + std::to_string(version));
  std::vector<Merge> merges;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() ||
        line.find(' ', sp + 1) != std::string::npos)
      throw ParseError("bpe model line " + std::to_string(line_no) +
                       ": expected 'left right'");
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return BpeModel(std::move(merges), marker);
}

BpeModel learn_bpe(const std::vector<Sentence>& corpus, int n_merges,
                   std::string marker) {
  if (n_merges < 0) throw ConfigError("bpe: n_merges must be non-negative");
  std::map<std::string, long> word_freq;
  for (const auto& sent : corpus)
    for (const auto& tok : sent) word_freq[tok] += 1;
  if (word_freq.empty()) throw ConfigError("bpe: empty corpus");

  std::vector<Symbols> words;
  std::vector<long> freqs;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    words.push_back(utf8::codepoints(word));
    freqs.push_back(freq);
  }

  // Ordered map so the max scan visits pairs lexicographically, which makes
  // the strict > comparison below break ties toward the smaller pair.
  std::map<Merge, long> counts;
  auto bump = [&counts](const Symbols& syms, long delta) {
    for (size_t i = 0; i + 1 < syms.size(); ++i)
      counts[{syms[i], syms[i + 1]}] += delta;
  };
  for (size_t w = 0; w < words.size(); ++w) bump(words[w], freqs[w]);

  std::vector<Merge> merges;
  for (int step = 0; step < n_merges; ++step) {
    long best_count = 0;
    const Merge* best = nullptr;
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best_count = count;
        best = &pair;
      }
    }
    if (best_count < 2) break;
    Merge chosen = *best;
    for (size_t w = 0; w < words.size(); ++w) {
      bool has = false;
      const Symbols& syms = words[w];
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        if (syms[i] == chosen.first && syms[i + 1] == chosen.second) {
          has = true;
          break;
        }
      }
      if (!has) continue;
      bump(words[w], -freqs[w]);
      words[w] = merge_in_word(words[w], chosen);
      bump(words[w], freqs[w]);
    }
    counts.erase(chosen);
    merges.push_back(std::move(chosen));
  }
  return BpeModel(std::move(merges), std::move(marker));
}

std::vector<std::string> apply_bpe(const std::string& token, const BpeModel& model) {
  return model.segment(token);
}

Sentence apply_bpe(const Sentence& sentence, const BpeModel& model) {
  Sentence out;
  for (const auto& tok : sentence) {
    auto parts = model.segment(tok);
    out.insert(out.end(), parts.begin(), parts.end());
  }
  return out;
}

Sentence unapply_bpe(const Sentence& subwords, const std::string& marker) {
  Sentence out;
  std::string pending;
  for (const auto& sub : subwords) {
    if (sub.size() > marker.size() &&
        sub.compare(sub.size() - marker.size(), marker.size(), marker) == 0) {
      pending += sub.substr(0, sub.size() - marker.size());
    } else {
      out.push_back(pending + sub);
      pending.clear();
    }
  }
  if (!pending.empty()) out.push_back(pending);  // dangling marker: keep text
  return out;
}

}  // namespace docmt
