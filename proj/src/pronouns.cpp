#include "docmt/pronouns.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "docmt/error.hpp"
#include "docmt/utf8.hpp"

namespace docmt {

namespace {

const std::set<std::string> kEnglish = {
    "i",        "me",      "my",       "mine",     "myself",     "we",
    "us",       "our",     "ours",     "ourselves", "you",       "your",
    "yours",    "yourself", "yourselves", "he",     "his",       "him",
    "himself",  "she",     "her",      "hers",     "herself",    "it",
    "its",      "itself",  "they",     "them",     "their",      "themselves",
    "that",     "this",    "these",    "those",    "what",       "whatever",
    "which",    "whichever", "who",    "whoever",  "whom",       "whose"};

const std::set<std::string> kGerman = {
    "ich",    "du",     "er",     "sie",    "es",     "wir",    "mich",
    "dich",   "sich",   "ihn",    "uns",    "euch",   "mir",    "dir",
    "ihm",    "ihr",    "ihre",   "ihrer",  "ihnen",  "meiner", "mein",
    "meine",  "deiner", "dein",   "seiner", "sein",   "seine",  "unser",
    "unsere", "euer",   "euere",  "denen",  "dessen", "deren",  "meinen",
    "meinem", "deinen", "deinem", "deines", "unserer", "unseren", "unseres",
    "unserem", "ihrem", "ihres",  "seinen", "seinem", "seines"};

const std::set<std::string> kPortuguese = {
    "eu",     "nós",    "tu",     "você",   "vocês",  "ele",    "ela",
    "eles",   "elas",   "me",     "te",     "nos",    "vos",    "o",
    "lo",     "no",     "a",      "la",     "na",     "lhe",    "se",
    "os",     "los",    "as",     "las",    "nas",    "lhes",   "mim",
    "ti",     "si",     "meu",    "teu",    "seu",    "nosso",  "vosso",
    "minha",  "tua",    "sua",    "nossa",  "vossa",  "meus",   "teus",
    "seus",   "nossos", "vossos", "minhas", "tuas",   "suas",   "nossas",
    "vossas", "dele",   "dela",   "deles",  "delas",  "quem",   "que",
    "qual",   "quais",  "cujo",   "cujos",  "cuja",   "cujas",  "onde"};

// multiset of lexicon pronouns in a sentence, case-folded
std::map<std::string, long> pronoun_multiset(const Sentence& sent,
                                             const PronounLexicon& lexicon) {
  std::map<std::string, long> out;
  for (const auto& tok : sent) {
    std::string folded = utf8::fold_case(tok);
    if (lexicon.forms().count(folded)) out[folded] += 1;
  }
  return out;
}

}  // namespace

PronounLexicon::PronounLexicon(std::string language, std::set<std::string> forms)
    : language_(std::move(language)), forms_(std::move(forms)) {
  if (forms_.empty())
    throw ValidationError("pronoun lexicon '" + language_ + "' is empty");
}

PronounLexicon PronounLexicon::builtin(const std::string& language) {
  if (language == "en") return PronounLexicon("en", kEnglish);
  if (language == "de") return PronounLexicon("de", kGerman);
  if (language == "pt") return PronounLexicon("pt", kPortuguese);
  throw ConfigError("no builtin pronoun lexicon for language '" + language + "'");
}

PronounLexicon PronounLexicon::load_file(const std::string& language,
                                         const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pronoun lexicon: " + path);
  std::set<std::string> forms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    forms.insert(utf8::fold_case(line));
  }
  return PronounLexicon(language, std::move(forms));
}

bool PronounLexicon::contains(const std::string& token) const {
  return forms_.count(utf8::fold_case(token)) > 0;
}

AptReport apt(const std::vector<Sentence>& source,
              const std::vector<Sentence>& candidate,
              const std::vector<Sentence>& reference,
              const std::vector<std::vector<int>>& candidate_links,
              const std::vector<std::vector<int>>& reference_links,
              const PronounLexicon& source_lexicon, const AptOptions& opts) {
  size_t n = source.size();
  if (candidate.size() != n || reference.size() != n ||
      candidate_links.size() != n || reference_links.size() != n)
    throw ConfigError("apt: input sequences have different lengths");

  double credit = 0.0;
  long pronouns = 0;
  for (size_t s = 0; s < n; ++s) {
    if (candidate_links[s].size() != candidate[s].size() ||
        reference_links[s].size() != reference[s].size())
      throw ConfigError("apt: links do not cover sentence " + std::to_string(s));
    for (size_t i = 0; i < source[s].size(); ++i) {
      if (!source_lexicon.contains(source[s][i])) continue;
      pronouns += 1;
      // multisets of translation tokens aligned to this source pronoun
      std::map<std::string, long> cand_aligned, ref_aligned;
      for (size_t j = 0; j < candidate[s].size(); ++j)
        if (candidate_links[s][j] == static_cast<int>(i))
          cand_aligned[utf8::fold_case(candidate[s][j])] += 1;
      for (size_t j = 0; j < reference[s].size(); ++j)
        if (reference_links[s][j] == static_cast<int>(i))
          ref_aligned[utf8::fold_case(reference[s][j])] += 1;
      if (cand_aligned == ref_aligned) {
        credit += 1.0;
      } else if (opts.partial_weight > 0.0) {
        for (const auto& [word, count] : cand_aligned) {
          auto it = ref_aligned.find(word);
          if (it != ref_aligned.end() && std::min(count, it->second) > 0) {
            credit += opts.partial_weight;
            break;
          }
        }
      }
    }
  }
  if (pronouns == 0)
    throw ConfigError("apt: no source pronoun in the corpus");
  return AptReport{credit / pronouns, pronouns};
}

PrfReport pronoun_prf(const std::vector<Sentence>& source,
                      const std::vector<Sentence>& candidate,
                      const std::vector<Sentence>& reference,
                      const PronounLexicon& source_lexicon,
                      const PronounLexicon& target_lexicon) {
  size_t n = source.size();
  if (candidate.size() != n || reference.size() != n)
    throw ConfigError("pronoun_prf: input sequences have different lengths");

  PrfReport report;
  for (size_t s = 0; s < n; ++s) {
    bool has_source_pronoun = false;
    for (const auto& tok : source[s])
      if (source_lexicon.contains(tok)) {
        has_source_pronoun = true;
        break;
      }
    if (!has_source_pronoun) continue;

    auto cand_set = pronoun_multiset(candidate[s], target_lexicon);
    auto ref_set = pronoun_multiset(reference[s], target_lexicon);
    for (const auto& [word, count] : cand_set) {
      report.candidate_total += count;
      auto it = ref_set.find(word);
      if (it != ref_set.end()) report.overlap += std::min(count, it->second);
    }
    for (const auto& [word, count] : ref_set) report.reference_total += count;
  }

  report.precision_defined = report.candidate_total > 0;
  report.recall_defined = report.reference_total > 0;
  if (report.precision_defined)
    report.precision = static_cast<double>(report.overlap) / report.candidate_total;
  if (report.recall_defined)
    report.recall = static_cast<double>(report.overlap) / report.reference_total;
  if (report.overlap > 0 && report.precision + report.recall > 0)
    report.f1 = 2.0 * report.precision * report.recall /
                (report.precision + report.recall);
  return report;
}

}  // namespace docmt
