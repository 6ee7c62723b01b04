#include "docmt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <utility>

#include "docmt/error.hpp"
#include "docmt/rng.hpp"

namespace docmt {

namespace {

struct NounEntry {
  const char* en;
  const char* de;
  bool masculine;
};

constexpr std::array<NounEntry, 16> kNouns = {{
    {"spoon", "löffel", true},
    {"table", "tisch", true},
    {"dog", "hund", true},
    {"moon", "mond", true},
    {"chair", "stuhl", true},
    {"tree", "baum", true},
    {"bird", "vogel", true},
    {"stone", "stein", true},
    {"fork", "gabel", false},
    {"lamp", "lampe", false},
    {"cat", "katze", false},
    {"sun", "sonne", false},
    {"flower", "blume", false},
    {"door", "tür", false},
    {"clock", "uhr", false},
    {"street", "straße", false},
}};

// one-to-one token map for everything except "it"; the toy target language
// keeps source word order
const std::map<std::string, std::string>& word_map() {
  static const std::map<std::string, std::string> map = [] {
    std::map<std::string, std::string> m = {
        {"fell", "fiel"},       {"down", "um"},      {"today", "heute"},
        {"seemed", "schien"},   {"small", "klein"},  {"we", "wir"},
        {"saw", "sahen"},       {"stood", "stand"},  {"there", "dort"},
        {"people", "leute"},    {"liked", "mochten"}, {"much", "sehr"},
        {"near", "nahe"},       {"everything", "alles"}, {"shone", "glänzte"},
        {"yesterday", "gestern"}, {"old", "alt"},    {"very", "ganz"},
        {"quietly", "leise"},
    };
    for (const NounEntry& n : kNouns) m.emplace(n.en, n.de);
    return m;
  }();
  return map;
}

// pronoun position varies: front, middle, end
const std::vector<Sentence>& pronoun_templates() {
  static const std::vector<Sentence> t = {
      {"it", "fell", "down"},
      {"today", "it", "seemed", "small"},
      {"we", "saw", "it"},
      {"yesterday", "it", "stood", "there"},
      {"it", "seemed", "very", "old"},
  };
  return t;
}

// noun slot (marked "@") varies: front, middle, late
const std::vector<Sentence>& noun_templates() {
  static const std::vector<Sentence> t = {
      {"@", "stood", "there"},
      {"people", "liked", "@", "much"},
      {"near", "@", "everything", "shone"},
      {"yesterday", "@", "seemed", "old"},
      {"we", "saw", "@", "today"},
  };
  return t;
}

Sentence translate(const Sentence& source, bool masculine) {
  Sentence out;
  for (const std::string& tok : source) {
    if (tok == "it") {
      out.push_back(masculine ? "er" : "sie");
    } else {
      auto it = word_map().find(tok);
      if (it == word_map().end())
        throw ValidationError("no translation for token '" + tok + "'");
      out.push_back(it->second);
    }
  }
  return out;
}

Sentence instantiate_noun(const Sentence& tmpl, const std::string& noun) {
  Sentence out;
  for (const std::string& tok : tmpl) out.push_back(tok == "@" ? noun : tok);
  return out;
}

const NounEntry& pick_noun(Rng& rng, bool masculine) {
  size_t base = masculine ? 0 : 8;
  return kNouns[base + rng.below(8)];
}

ParallelDocument future_document(Rng& rng, int index, int pairs) {
  ParallelDocument doc;
  doc.source.doc_id = "syn-future-" + std::to_string(index);
  doc.source.language = "en";
  doc.target.doc_id = doc.source.doc_id;
  doc.target.language = "de";
  for (int p = 0; p < pairs; ++p) {
    bool masculine = rng.coin();
    const NounEntry& noun = pick_noun(rng, masculine);
    Sentence pron =
        pronoun_templates()[rng.below(pronoun_templates().size())];
    Sentence nsent = instantiate_noun(
        noun_templates()[rng.below(noun_templates().size())], noun.en);
    doc.source.sentences.push_back(pron);
    doc.target.sentences.push_back(translate(pron, masculine));
    doc.source.sentences.push_back(nsent);
    doc.target.sentences.push_back(translate(nsent, masculine));
  }
  return doc;
}

ParallelDocument surround_document(Rng& rng, int index) {
  ParallelDocument doc;
  doc.source.doc_id = "syn-surround-" + std::to_string(index);
  doc.source.language = "en";
  doc.target.doc_id = doc.source.doc_id;
  doc.target.language = "de";
  bool masculine = rng.coin();
  const NounEntry& noun = pick_noun(rng, masculine);
  for (int i = 0; i < 11; ++i) {
    Sentence src;
    if (i == 2 || i == 5 || i == 8)
      src = pronoun_templates()[rng.below(pronoun_templates().size())];
    else
      src = instantiate_noun(
          noun_templates()[rng.below(noun_templates().size())], noun.en);
    doc.source.sentences.push_back(src);
    doc.target.sentences.push_back(translate(src, masculine));
  }
  return doc;
}

bool contains(const Sentence& s, const std::string& tok) {
  return std::find(s.begin(), s.end(), tok) != s.end();
}

}  // namespace

void SyntheticOptions::validate() const {
  if (mode != "future" && mode != "surround")
    throw ConfigError("unknown synthetic mode '" + mode + "'");
  if (documents < 1) throw ConfigError("synthetic corpus needs at least 1 document");
  if (mode == "future" && pairs_per_doc < 1)
    throw ConfigError("future mode needs at least 1 pair per document");
}

Corpus synthetic_cataphora(const SyntheticOptions& opts) {
  opts.validate();
  Rng rng(opts.seed);
  Corpus corpus;
  corpus.reserve(static_cast<size_t>(opts.documents));
  for (int d = 0; d < opts.documents; ++d)
    corpus.push_back(opts.mode == "future"
                         ? future_document(rng, d, opts.pairs_per_doc)
                         : surround_document(rng, d));
  return corpus;
}

PronounScore score_pronouns(const Corpus& reference,
                            const std::vector<std::vector<Sentence>>& decoded) {
  if (decoded.size() != reference.size())
    throw ValidationError("decoded corpus has " + std::to_string(decoded.size()) +
                          " documents, reference has " +
                          std::to_string(reference.size()));
  PronounScore score;
  for (size_t d = 0; d < reference.size(); ++d) {
    const ParallelDocument& doc = reference[d];
    if (decoded[d].size() != doc.size())
      throw ValidationError("document " + std::to_string(d) + " has " +
                            std::to_string(decoded[d].size()) +
                            " decoded sentences, reference has " +
                            std::to_string(doc.size()));
    for (size_t s = 0; s < doc.size(); ++s) {
      if (!contains(doc.source.sentences[s], "it")) continue;
      bool masc = contains(doc.target.sentences[s], "er");
      const std::string& right = masc ? "er" : "sie";
      const std::string& wrong = masc ? "sie" : "er";
      score.total += 1;
      if (contains(decoded[d][s], right) && !contains(decoded[d][s], wrong))
        score.correct += 1;
    }
  }
  return score;
}

std::optional<size_t> synthetic_noun_position(const Sentence& source) {
  for (size_t i = 0; i < source.size(); ++i)
    for (const NounEntry& n : kNouns)
      if (source[i] == n.en) return i;
  return std::nullopt;
}

std::optional<size_t> synthetic_pronoun_position(const Sentence& source) {
  for (size_t i = 0; i < source.size(); ++i)
    if (source[i] == "it") return i;
  return std::nullopt;
}

bool synthetic_noun_is_masculine(const std::string& source_noun) {
  for (const NounEntry& n : kNouns)
    if (source_noun == n.en) return n.masculine;
  throw ValidationError("'" + source_noun + "' is not a synthetic noun");
}

}  // namespace docmt
