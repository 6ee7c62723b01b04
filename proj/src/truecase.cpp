#include "docmt/truecase.hpp"

#include <fstream>

#include "docmt/error.hpp"
#include "docmt/utf8.hpp"

namespace docmt {

namespace {

std::string pick_best(const std::map<std::string, long>& forms) {
  std::string best;
  long best_count = -1;
  for (const auto& [form, count] : forms) {
    if (count > best_count) {  // map order makes ties lexicographic
      best = form;
      best_count = count;
    }
  }
  return best;
}

// Uppercases the first code point when it is a plain ASCII or Latin-1 letter.
std::string upper_first(const std::string& token) {
  if (token.empty()) return token;
  auto cps = utf8::codepoints(token);
  std::string& first = cps[0];
  if (first.size() == 1 && first[0] >= 'a' && first[0] <= 'z') {
    first[0] = static_cast<char>(first[0] - 32);
  } else if (first.size() == 2 && static_cast<unsigned char>(first[0]) == 0xc3) {
    unsigned char c2 = static_cast<unsigned char>(first[1]);
    if (c2 >= 0xa0 && c2 <= 0xbe && c2 != 0xb7)  // à..þ except ÷
      first[1] = static_cast<char>(c2 - 0x20);
  }
  std::string out;
  for (const auto& cp : cps) out += cp;
  return out;
}

}  // namespace

TruecaseModel::TruecaseModel(FormCounts counts) : counts_(std::move(counts)) {
  for (const auto& [lower, forms] : counts_) {
    for (const auto& [form, count] : forms) {
      if (utf8::fold_case(form) != lower)
        throw ValidationError("truecase model: form '" + form + "' does not lowercase to '" + lower + "'");
      if (count <= 0)
        throw ValidationError("truecase model: non-positive count for '" + form + "'");
    }
    canonical_[lower] = pick_best(forms);
  }
}

std::string TruecaseModel::canonical(const std::string& token) const {
  auto it = canonical_.find(utf8::fold_case(token));
  return it == canonical_.end() ? std::string() : it->second;
}

bool TruecaseModel::known(const std::string& token) const {
  return canonical_.count(utf8::fold_case(token)) > 0;
}

void TruecaseModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write truecase model: " + path);
  for (const auto& [lower, forms] : counts_)
    for (const auto& [form, count] : forms)
      out << lower << '\t' << form << '\t' << count << '\n';
}

TruecaseModel TruecaseModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open truecase model: " + path);
  FormCounts counts;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw ParseError("truecase model line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    std::string lower = line.substr(0, t1);
    std::string form = line.substr(t1 + 1, t2 - t1 - 1);
    long count = 0;
    try {
      count = std::stol(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw ParseError("truecase model line " + std::to_string(line_no) + ": bad count");
    }
    counts[lower][form] = count;
  }
  return TruecaseModel(std::move(counts));
}

TruecaseModel learn_truecase(const std::vector<Sentence>& corpus) {
  TruecaseModel::FormCounts mid, initial;
  for (const auto& sent : corpus) {
    for (size_t i = 0; i < sent.size(); ++i) {
      const std::string& tok = sent[i];
      (i == 0 ? initial : mid)[utf8::fold_case(tok)][tok] += 1;
    }
  }
  // Types never seen mid-sentence fall back to their sentence-initial counts.
  for (const auto& [lower, forms] : initial)
    if (!mid.count(lower)) mid[lower] = forms;
  return TruecaseModel(std::move(mid));
}

Sentence apply_truecase(const Sentence& sentence, const TruecaseModel& model) {
  if (sentence.empty()) return sentence;
  Sentence out = sentence;
  std::string canon = model.canonical(out[0]);
  if (!canon.empty()) out[0] = canon;
  return out;
}

Sentence detruecase(const Sentence& sentence) {
  if (sentence.empty()) return sentence;
  Sentence out = sentence;
  out[0] = upper_first(out[0]);
  return out;
}

}  // namespace docmt
