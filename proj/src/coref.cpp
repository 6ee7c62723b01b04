#include "docmt/coref.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "docmt/error.hpp"
#include "docmt/utf8.hpp"
#include "json.hpp"

namespace docmt {

using nlohmann::json;

namespace {

const std::set<std::string> kPossessiveDeterminers = {
    "my", "your", "his", "her", "its", "our", "their"};

void check_mention_bounds(const Mention& m, const std::vector<Sentence>& sentences,
                          const std::string& doc_id) {
  bool ok = m.sentence_index >= 0 &&
            m.sentence_index < static_cast<int>(sentences.size());
  if (ok) {
    int len = static_cast<int>(sentences[m.sentence_index].size());
    ok = m.start >= 0 && m.start < m.end && m.end <= len &&
         m.head_index >= m.start && m.head_index < m.end;
  }
  if (!ok)
    throw ValidationError("document '" + doc_id + "': mention at sentence " +
                          std::to_string(m.sentence_index) + " span [" +
                          std::to_string(m.start) + "," + std::to_string(m.end) +
                          ") out of bounds");
}

bool is_lexicon_pronoun(const Mention& m, const std::vector<Sentence>& sentences,
                        const std::set<std::string>& lexicon) {
  if (!m.is_pronoun) return false;
  const std::string& head = sentences[m.sentence_index][m.head_index];
  return lexicon.count(utf8::fold_case(head)) > 0;
}

void accumulate(const std::vector<PronounClassification>& classified,
                ClassificationReport& report) {
  for (const auto& pc : classified) {
    report.total += 1;
    switch (pc.cls) {
      case PronounClass::Intrasentential:
        report.intrasentential += 1;
        break;
      case PronounClass::Anaphoric:
        report.anaphoric += 1;
        break;
      case PronounClass::Cataphoric:
        report.cataphoric += 1;
        break;
    }
    int dist = std::abs(pc.window);
    if (dist >= 1) {
      size_t bucket = dist <= 10 ? static_cast<size_t>(dist - 1) : 10;
      if (pc.window < 0)
        report.histogram[bucket].anaphora_pct += 1;
      else
        report.histogram[bucket].cataphora_pct += 1;
    }
  }
}

Mention make_single_token_mention(int sent, int tok, const std::string& pos,
                                  bool pronoun) {
  Mention m;
  m.sentence_index = sent;
  m.start = tok;
  m.end = tok + 1;
  m.head_index = tok;
  m.head_pos = pos;
  m.is_pronoun = pronoun;
  return m;
}

// Small closed tables for the fixture-generation fallback.
enum class Gender { Masculine, Feminine, Neuter, Unknown };

Gender pronoun_gender(const std::string& folded) {
  static const std::set<std::string> masc = {"he", "him", "his", "himself"};
  static const std::set<std::string> fem = {"she", "her", "hers", "herself"};
  static const std::set<std::string> neut = {"it", "its", "itself"};
  if (masc.count(folded)) return Gender::Masculine;
  if (fem.count(folded)) return Gender::Feminine;
  if (neut.count(folded)) return Gender::Neuter;
  return Gender::Unknown;
}

Gender name_gender(const std::string& folded) {
  static const std::set<std::string> masc = {
      "richard", "john",  "peter",  "michael", "thomas",
      "james",   "david", "robert", "william", "mark"};
  static const std::set<std::string> fem = {
      "mary",  "anna", "susan", "elizabeth", "sarah",
      "emma",  "laura", "alice", "julia",    "kate"};
  if (masc.count(folded)) return Gender::Masculine;
  if (fem.count(folded)) return Gender::Feminine;
  return Gender::Neuter;  // non-person entities pair with "it"
}

bool starts_uppercase(const std::string& token) {
  if (token.empty()) return false;
  unsigned char c = static_cast<unsigned char>(token[0]);
  if (c >= 'A' && c <= 'Z') return true;
  if (c == 0xc3 && token.size() >= 2) {
    unsigned char c2 = static_cast<unsigned char>(token[1]);
    return c2 >= 0x80 && c2 <= 0x9e && c2 != 0x97;
  }
  return false;
}

json mention_to_json(const Mention& m) {
  return json{{"sent", m.sentence_index}, {"start", m.start}, {"end", m.end},
              {"head", m.head_index},     {"pos", m.head_pos}, {"pronoun", m.is_pronoun}};
}

Mention mention_from_json(const json& j, const std::string& doc_id) {
  for (const char* key : {"sent", "start", "end", "head", "pos", "pronoun"})
    if (!j.contains(key))
      throw ParseError("annotations for '" + doc_id + "': mention missing '" +
                       std::string(key) + "'");
  Mention m;
  m.sentence_index = j["sent"].get<int>();
  m.start = j["start"].get<int>();
  m.end = j["end"].get<int>();
  m.head_index = j["head"].get<int>();
  m.head_pos = j["pos"].get<std::string>();
  m.is_pronoun = j["pronoun"].get<bool>();
  return m;
}

}  // namespace

int resolution_window(const Mention& pronoun, const CorefChain& chain) {
  bool found = false;
  bool has_best = false;
  int best = 0;
  for (const auto& m : chain.mentions) {
    if (m == pronoun) {
      found = true;
      continue;
    }
    int d = m.sentence_index - pronoun.sentence_index;
    // smaller distance wins; at equal distance the antecedent (d < 0) wins
    bool better = !has_best || std::abs(d) < std::abs(best) ||
                  (std::abs(d) == std::abs(best) && d < best);
    if (better) {
      best = d;
      has_best = true;
    }
  }
  if (!found)
    throw ValidationError("resolution_window: pronoun not in chain '" +
                          chain.doc_id + "'");
  if (!has_best)
    throw ValidationError("resolution_window: singleton chain in '" +
                          chain.doc_id + "'");
  return best;
}

std::vector<PronounClassification> classify_pronouns(
    const std::vector<Sentence>& sentences, const std::vector<CorefChain>& chains,
    const std::set<std::string>& pronoun_lexicon) {
  std::vector<PronounClassification> out;
  for (const auto& chain : chains) {
    for (const auto& m : chain.mentions)
      check_mention_bounds(m, sentences, chain.doc_id);
    if (chain.mentions.size() < 2) continue;
    for (const auto& m : chain.mentions) {
      if (!is_lexicon_pronoun(m, sentences, pronoun_lexicon)) continue;
      PronounClassification pc;
      pc.pronoun = m;
      pc.window = resolution_window(m, chain);
      pc.cls = pc.window == 0   ? PronounClass::Intrasentential
               : pc.window < 0 ? PronounClass::Anaphoric
                               : PronounClass::Cataphoric;
      out.push_back(pc);
    }
  }
  return out;
}

ClassificationReport classify_corpus(const Corpus& corpus, const ChainMap& chains,
                                     const std::set<std::string>& pronoun_lexicon) {
  ClassificationReport report;
  for (const auto& doc : corpus) {
    auto it = chains.find(doc.id());
    if (it == chains.end()) continue;
    accumulate(classify_pronouns(doc.source.sentences, it->second, pronoun_lexicon),
               report);
  }
  if (report.total == 0) return report;
  double n = static_cast<double>(report.total);
  report.intrasentential_pct = 100.0 * report.intrasentential / n;
  report.anaphoric_pct = 100.0 * report.anaphoric / n;
  report.cataphoric_pct = 100.0 * report.cataphoric / n;
  for (auto& bucket : report.histogram) {
    bucket.anaphora_pct = 100.0 * bucket.anaphora_pct / n;
    bucket.cataphora_pct = 100.0 * bucket.cataphora_pct / n;
  }
  return report;
}

std::vector<CataphoraExample> extract_cataphora_suite(
    const Corpus& corpus, const ChainMap& chains,
    const std::set<std::string>& pronoun_lexicon) {
  std::vector<CataphoraExample> out;
  for (const auto& doc : corpus) {
    auto it = chains.find(doc.id());
    if (it == chains.end()) continue;
    const auto& sentences = doc.source.sentences;
    std::vector<CataphoraExample> doc_examples;
    for (const auto& chain : it->second) {
      for (const auto& m : chain.mentions)
        check_mention_bounds(m, sentences, chain.doc_id);
      if (chain.mentions.size() < 2) continue;
      for (const auto& m : chain.mentions) {
        if (!is_lexicon_pronoun(m, sentences, pronoun_lexicon)) continue;
        if (resolution_window(m, chain) != 1) continue;
        // chain mentions are document-ordered, so the first mention in the
        // next sentence is the span-first postcedent
        const Mention* post = nullptr;
        for (const auto& cand : chain.mentions) {
          if (cand.sentence_index == m.sentence_index + 1) {
            post = &cand;
            break;
          }
        }
        if (!post) continue;
        CataphoraExample ex;
        ex.doc_id = doc.id();
        ex.sentence_index = m.sentence_index;
        ex.pronoun = m;
        ex.postcedent = *post;
        const std::string& first_tok = sentences[post->sentence_index][post->start];
        // "prefixed" needs a head after the determiner; a lone possessive
        // pronoun is not a determiner-noun postcedent
        if (post->end - post->start >= 2 &&
            kPossessiveDeterminers.count(utf8::fold_case(first_tok)))
          ex.subsets.insert("DET");
        if (post->head_pos == "PROPN") {
          ex.subsets.insert("PROPN");
          ex.subsets.insert("NOUN");
        } else if (post->head_pos == "NOUN") {
          ex.subsets.insert("NOUN");
        }
        doc_examples.push_back(std::move(ex));
      }
    }
    // one example per sentence pair: keep the first pronoun, union the tags
    std::sort(doc_examples.begin(), doc_examples.end(),
              [](const CataphoraExample& a, const CataphoraExample& b) {
                if (a.sentence_index != b.sentence_index)
                  return a.sentence_index < b.sentence_index;
                return a.pronoun.start < b.pronoun.start;
              });
    for (auto& ex : doc_examples) {
      if (!out.empty() && out.back().doc_id == ex.doc_id &&
          out.back().sentence_index == ex.sentence_index) {
        out.back().subsets.insert(ex.subsets.begin(), ex.subsets.end());
      } else {
        out.push_back(std::move(ex));
      }
    }
  }
  return out;
}

std::vector<CorefChain> heuristic_chain_fallback(const Document& english_doc) {
  const auto& sentences = english_doc.sentences;

  // pass 1: capitalized non-function tokens, grouped by exact surface string
  static const std::set<std::string> function_words = {
      "the", "a",  "an",   "and",  "but",  "or",   "if",   "when", "then",
      "i",   "we", "us",   "you",  "your", "they", "them", "their", "this",
      "that", "these", "those", "no", "not", "so", "as", "at", "on", "in",
      "of",  "to"};
  std::map<std::string, std::vector<Mention>> nominals;
  for (size_t s = 0; s < sentences.size(); ++s) {
    for (size_t t = 0; t < sentences[s].size(); ++t) {
      const std::string& tok = sentences[s][t];
      if (!starts_uppercase(tok)) continue;
      std::string folded = utf8::fold_case(tok);
      if (pronoun_gender(folded) != Gender::Unknown) continue;
      if (function_words.count(folded)) continue;
      nominals[tok].push_back(make_single_token_mention(
          static_cast<int>(s), static_cast<int>(t), "PROPN", false));
    }
  }

  // pass 2: attach each gendered pronoun to the nearest compatible nominal
  std::map<std::string, std::vector<Mention>> attached;
  for (size_t s = 0; s < sentences.size(); ++s) {
    for (size_t t = 0; t < sentences[s].size(); ++t) {
      std::string folded = utf8::fold_case(sentences[s][t]);
      Gender g = pronoun_gender(folded);
      if (g == Gender::Unknown) continue;
      const std::string* best_key = nullptr;
      int best_dist = 0;
      for (const auto& [key, mentions] : nominals) {
        if (name_gender(utf8::fold_case(key)) != g) continue;
        for (const auto& m : mentions) {
          int d = m.sentence_index - static_cast<int>(s);
          bool better = !best_key || std::abs(d) < std::abs(best_dist) ||
                        (std::abs(d) == std::abs(best_dist) && d < best_dist);
          if (better) {
            best_key = &key;
            best_dist = d;
          }
        }
      }
      if (best_key)
        attached[*best_key].push_back(make_single_token_mention(
            static_cast<int>(s), static_cast<int>(t), "PRON", true));
    }
  }

  std::vector<CorefChain> chains;
  for (auto& [key, mentions] : nominals) {
    auto it = attached.find(key);
    if (it != attached.end())
      mentions.insert(mentions.end(), it->second.begin(), it->second.end());
    if (mentions.size() < 2) continue;
    std::sort(mentions.begin(), mentions.end(),
              [](const Mention& a, const Mention& b) {
                if (a.sentence_index != b.sentence_index)
                  return a.sentence_index < b.sentence_index;
                return a.start < b.start;
              });
    CorefChain chain;
    chain.doc_id = english_doc.doc_id;
    chain.mentions = std::move(mentions);
    chains.push_back(std::move(chain));
  }
  return chains;
}

ChainMap load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotations: " + path);
  ChainMap out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("annotations line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (!j.contains("doc_id") || !j["doc_id"].is_string())
      throw ParseError("annotations line " + std::to_string(line_no) +
                       ": missing 'doc_id'");
    std::string doc_id = j["doc_id"].get<std::string>();
    if (out.count(doc_id))
      throw ValidationError("annotations: duplicate doc_id '" + doc_id + "'");
    if (!j.contains("chains") || !j["chains"].is_array())
      throw ParseError("annotations line " + std::to_string(line_no) +
                       ": missing 'chains'");
    std::vector<CorefChain> chains;
    for (const auto& jc : j["chains"]) {
      CorefChain chain;
      chain.doc_id = doc_id;
      for (const auto& jm : jc) chain.mentions.push_back(mention_from_json(jm, doc_id));
      if (chain.mentions.size() < 2)
        throw ValidationError("annotations: chain with fewer than two mentions in '" +
                              doc_id + "'");
      std::sort(chain.mentions.begin(), chain.mentions.end(),
                [](const Mention& a, const Mention& b) {
                  if (a.sentence_index != b.sentence_index)
                    return a.sentence_index < b.sentence_index;
                  return a.start < b.start;
                });
      chains.push_back(std::move(chain));
    }
    out[doc_id] = std::move(chains);
  }
  return out;
}

void save_annotations(const ChainMap& chains, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotations: " + path);
  for (const auto& [doc_id, doc_chains] : chains) {
    json jchains = json::array();
    for (const auto& chain : doc_chains) {
      json jc = json::array();
      for (const auto& m : chain.mentions) jc.push_back(mention_to_json(m));
      jchains.push_back(jc);
    }
    out << json{{"doc_id", doc_id}, {"chains", jchains}}.dump() << '\n';
  }
}

void save_histogram_csv(const ClassificationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write histogram: " + path);
  out << "window,anaphora_pct,cataphora_pct\n";
  char buf[64];
  for (size_t i = 0; i < report.histogram.size(); ++i) {
    std::string label = i < 10 ? std::to_string(i + 1) : std::string("11+");
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f", report.histogram[i].anaphora_pct,
                  report.histogram[i].cataphora_pct);
    out << label << ',' << buf << '\n';
  }
}

}  // namespace docmt
