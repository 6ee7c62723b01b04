#include "docmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "docmt/error.hpp"
#include "docmt/rng.hpp"
#include "json.hpp"

namespace docmt {

using nlohmann::json;

namespace {

std::vector<Sentence> parse_sentences(const json& j, const std::string& key,
                                      size_t line_no) {
  if (!j.contains(key) || !j[key].is_array())
    throw ParseError("line " + std::to_string(line_no) + ": missing or non-array '" + key + "'");
  std::vector<Sentence> out;
  for (const auto& sent : j[key]) {
    if (!sent.is_array())
      throw ParseError("line " + std::to_string(line_no) + ": sentence in '" + key + "' is not an array");
    Sentence s;
    for (const auto& tok : sent) {
      if (!tok.is_string())
        throw ParseError("line " + std::to_string(line_no) + ": token in '" + key + "' is not a string");
      s.push_back(tok.get<std::string>());
    }
    out.push_back(std::move(s));
  }
  return out;
}

void check_invariants(const ParallelDocument& doc) {
  const std::string& id = doc.source.doc_id;
  if (doc.source.sentences.empty())
    throw ValidationError("document '" + id + "': no sentences");
  if (doc.source.sentences.size() != doc.target.sentences.size())
    throw ValidationError("document '" + id + "': source has " +
                          std::to_string(doc.source.sentences.size()) + " sentences, target has " +
                          std::to_string(doc.target.sentences.size()));
  if (doc.source.language == doc.target.language)
    throw ValidationError("document '" + id + "': source and target language are both '" +
                          doc.source.language + "'");
  auto check_side = [&](const Document& d, const char* side) {
    for (size_t i = 0; i < d.sentences.size(); ++i)
      if (d.sentences[i].empty())
        throw ValidationError("document '" + id + "': empty " + std::string(side) +
                              " sentence at index " + std::to_string(i));
  };
  check_side(doc.source, "source");
  check_side(doc.target, "target");
  if (doc.source.runtime_minutes && *doc.source.runtime_minutes < 0)
    throw ValidationError("document '" + id + "': negative runtime");
}

}  // namespace

ParallelDocument parse_corpus_record(const std::string& line, size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!j.is_object())
    throw ParseError("line " + std::to_string(line_no) + ": record is not a JSON object");
  for (const char* key : {"doc_id", "src_lang", "tgt_lang"})
    if (!j.contains(key) || !j[key].is_string())
      throw ParseError("line " + std::to_string(line_no) + ": missing or non-string '" + key + "'");

  ParallelDocument doc;
  doc.source.doc_id = j["doc_id"].get<std::string>();
  doc.target.doc_id = doc.source.doc_id;
  doc.source.language = j["src_lang"].get<std::string>();
  doc.target.language = j["tgt_lang"].get<std::string>();
  if (j.contains("runtime_minutes") && !j["runtime_minutes"].is_null()) {
    if (!j["runtime_minutes"].is_number())
      throw ParseError("line " + std::to_string(line_no) + ": non-numeric 'runtime_minutes'");
    doc.source.runtime_minutes = j["runtime_minutes"].get<double>();
    doc.target.runtime_minutes = doc.source.runtime_minutes;
  }
  doc.source.sentences = parse_sentences(j, "src_sentences", line_no);
  doc.target.sentences = parse_sentences(j, "tgt_sentences", line_no);
  check_invariants(doc);
  return doc;
}

std::string corpus_record_to_json(const ParallelDocument& doc) {
  json j;
  j["doc_id"] = doc.source.doc_id;
  j["src_lang"] = doc.source.language;
  j["tgt_lang"] = doc.target.language;
  if (doc.source.runtime_minutes) j["runtime_minutes"] = *doc.source.runtime_minutes;
  j["src_sentences"] = doc.source.sentences;
  j["tgt_sentences"] = doc.target.sentences;
  return j.dump();
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file: " + path);
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ParallelDocument doc = parse_corpus_record(line, line_no);
    if (!seen_ids.insert(doc.id()).second)
      throw ValidationError("document '" + doc.id() + "': duplicate doc_id (line " +
                            std::to_string(line_no) + ")");
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file: " + path);
  for (const auto& doc : corpus) out << corpus_record_to_json(doc) << '\n';
}

Corpus filter_documents(const Corpus& corpus, const FilterOptions& opts) {
  Corpus out;
  for (const auto& doc : corpus) {
    if (doc.source.runtime_minutes &&
        !(*doc.source.runtime_minutes < opts.max_runtime_min))
      continue;
    int n = static_cast<int>(doc.size());
    if (n < opts.min_sentences || n > opts.max_sentences) continue;
    out.push_back(doc);
  }
  return out;
}

CorpusSplits split_corpus(const Corpus& corpus, const SplitRatio& ratio,
                          double heldout_fraction, std::uint64_t seed) {
  if (corpus.empty()) throw ConfigError("split_corpus: empty corpus");
  if (!(ratio.train > 0 && ratio.dev > 0 && ratio.test > 0))
    throw ConfigError("split_corpus: ratio components must be positive");
  if (heldout_fraction < 0 || heldout_fraction >= 1)
    throw ConfigError("split_corpus: heldout_fraction must be in [0, 1)");
  const size_t n = corpus.size();
  if (n < 3)
    throw ConfigError("split_corpus: corpus has " + std::to_string(n) +
                      " documents but 3 partitions are requested");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  // Largest-remainder apportionment over the three partitions.
  const double parts[3] = {ratio.train, ratio.dev, ratio.test};
  const double total = parts[0] + parts[1] + parts[2];
  size_t counts[3];
  double remainders[3];
  size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double quota = static_cast<double>(n) * parts[i] / total;
    counts[i] = static_cast<size_t>(std::floor(quota));
    remainders[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[i] > remainders[best]) best = i;
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  CorpusSplits splits;
  splits.seed = seed;
  size_t pos = 0;
  auto take = [&](size_t count) {
    Corpus part;
    part.reserve(count);
    for (size_t i = 0; i < count; ++i) part.push_back(corpus[order[pos++]]);
    return part;
  };
  splits.train = take(counts[0]);
  splits.dev = take(counts[1]);
  splits.test = take(counts[2]);

  // Held-out documents come off the tail of the (already shuffled) train set.
  size_t held = static_cast<size_t>(
      std::llround(static_cast<double>(splits.train.size()) * heldout_fraction));
  for (size_t i = 0; i < held; ++i) {
    splits.held_out.push_back(std::move(splits.train.back()));
    splits.train.pop_back();
  }
  std::reverse(splits.held_out.begin(), splits.held_out.end());
  return splits;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.num_documents = corpus.size();
  for (const auto& doc : corpus) stats.num_sentences += doc.size();
  stats.avg_doc_length =
      stats.num_documents == 0
          ? 0.0
          : static_cast<double>(stats.num_sentences) / static_cast<double>(stats.num_documents);
  return stats;
}

}  // namespace docmt
