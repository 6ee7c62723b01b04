// docmt: drives the document-level NMT pipeline as subcommands sharing one
// JSON config file (comments allowed). Every subcommand writes its outputs
// plus a run manifest under <out_dir>/manifests/, and is deterministic given
// config + seed. Flags override config keys; --set patches any key directly.
//
//   docmt prepare        --config exp.json        corpus -> filtered splits
//   docmt analyze        --config exp.json        pronoun window statistics
//   docmt extract-suite  --config exp.json        cataphora sentence pairs
//   docmt train-baseline --config exp.json        stage 1 sentence model
//   docmt train-han      --config exp.json        stage 2 context model
//   docmt translate      --config exp.json        decode a corpus
//   docmt evaluate       --config exp.json        BLEU / APT / pronoun F1
//   docmt significance   --config exp.json        paired randomization test
//   docmt ablate         --config exp.json        decode under several specs
//   docmt attention      --config exp.json        dump context attention maps
//
// Exit codes: 0 success, 1 invalid config or input, 2 runtime failure.
// Errors are a single JSON line on stderr; partial outputs are removed.

#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "docmt/align.hpp"
#include "docmt/bleu.hpp"
#include "docmt/bpe.hpp"
#include "docmt/coref.hpp"
#include "docmt/corpus.hpp"
#include "docmt/decode.hpp"
#include "docmt/error.hpp"
#include "docmt/han.hpp"
#include "docmt/model.hpp"
#include "docmt/pronouns.hpp"
#include "docmt/rng.hpp"
#include "docmt/train.hpp"
#include "docmt/truecase.hpp"
#include "docmt/utf8.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace docmt;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// config

std::vector<std::string> split_path(const std::string& key) {
  std::vector<std::string> parts;
  size_t pos = 0;
  while (pos <= key.size()) {
    size_t dot = key.find('.', pos);
    if (dot == std::string::npos) {
      parts.push_back(key.substr(pos));
      break;
    }
    parts.push_back(key.substr(pos, dot - pos));
    pos = dot + 1;
  }
  return parts;
}

/// One experiment config: a JSON object with dotted-path lookup and typed
/// getters. Unknown keys are permitted; type mismatches name the key.
class Config {
 public:
  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    Config cfg;
    try {
      cfg.root_ = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ParseError("config " + path + ": " + e.what());
    }
    if (!cfg.root_.is_object())
      throw ConfigError("config " + path + ": top level must be an object");
    return cfg;
  }

  /// Applies "key.path=value"; the value is parsed as JSON when possible and
  /// kept as a plain string otherwise.
  void set(const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like key=value, got '" +
                        assignment + "'");
    set_value(assignment.substr(0, eq), assignment.substr(eq + 1));
  }

  void set_value(const std::string& key, const std::string& text) {
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json* node = &root_;
    std::vector<std::string> parts = split_path(key);
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      json& child = (*node)[parts[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object())
        throw ConfigError("config key '" + key + "': '" + parts[i] +
                          "' is not an object");
      node = &child;
    }
    (*node)[parts.back()] = std::move(value);
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) throw type_error(key, "a string");
    return v->get<std::string>();
  }

  std::string require_str(const std::string& key) const {
    const json* v = find(key);
    if (!v) throw ConfigError("config: missing required key '" + key + "'");
    if (!v->is_string()) throw type_error(key, "a string");
    return v->get<std::string>();
  }

  long integer(const std::string& key, long fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw type_error(key, "an integer");
    return v->get<long>();
  }

  double real(const std::string& key, double fallback) const {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) throw type_error(key, "a number");
    return v->get<double>();
  }

  std::vector<std::string> str_list(const std::string& key) const {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) throw type_error(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *v) {
      if (!item.is_string()) throw type_error(key, "an array of strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  const json& root() const { return root_; }

 private:
  ConfigError type_error(const std::string& key, const char* want) const {
    return ConfigError("config key '" + key + "' must be " + want);
  }

  const json* find(const std::string& key) const {
    const json* node = &root_;
    for (const std::string& part : split_path(key)) {
      if (!node->is_object()) return nullptr;
      auto it = node->find(part);
      if (it == node->end()) return nullptr;
      node = &*it;
    }
    return node;
  }

  json root_;
};

// ---------------------------------------------------------------------------
// output plumbing

/// Tracks files written by one subcommand and removes them all unless the
/// command reaches commit(), so failed runs leave no partial outputs.
struct Outputs {
  std::vector<fs::path> files;
  bool committed = false;

  fs::path track(const fs::path& p) {
    fs::create_directories(p.parent_path());
    files.push_back(p);
    return p;
  }

  void commit() { committed = true; }

  ~Outputs() {
    if (committed) return;
    for (auto it = files.rbegin(); it != files.rend(); ++it) {
      std::error_code ec;
      fs::remove(*it, ec);
    }
  }
};

void write_text(Outputs& out, const fs::path& path, const std::string& text) {
  out.track(path);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

void write_json_file(Outputs& out, const fs::path& path, const json& j) {
  write_text(out, path, j.dump(2) + "\n");
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." +
         std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

fs::path out_root(const Config& cfg) {
  return fs::path(cfg.require_str("out_dir"));
}

std::uint64_t config_seed(const Config& cfg) {
  long s = cfg.integer("seed", 1);
  if (s < 0) throw ConfigError("config: seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path))
    throw ConfigError(what + ": no such file: " + path.string());
}

/// The manifest mirrors the fully resolved config, so re-running the command
/// against the "config" object reproduces the run bit for bit. No clock or
/// host state is recorded.
void write_run_manifest(Outputs& out, const fs::path& dir,
                        const std::string& command, const Config& cfg) {
  json produced = json::array();
  for (const fs::path& f : out.files)
    produced.push_back(f.lexically_proximate(dir).generic_string());
  json manifest{{"command", command},
                {"config_hash", hash_hex(fnv1a(cfg.root().dump()))},
                {"seed", config_seed(cfg)},
                {"versions", {{"docmt", kVersion}, {"eigen", eigen_version()}}},
                {"config", cfg.root()},
                {"outputs", produced}};
  write_json_file(out, dir / "manifests" / (command + ".json"), manifest);
}

// ---------------------------------------------------------------------------
// shared builders

Corpus load_corpus_file(const fs::path& path, const std::string& what) {
  require_file(path, what);
  return load_corpus(path.string());
}

TransformerConfig model_config(const Config& cfg) {
  TransformerConfig c = transformer_preset(cfg.str("model.preset", "tiny"));
  c.num_layers = static_cast<int>(cfg.integer("model.num_layers", c.num_layers));
  c.model_dim = static_cast<int>(cfg.integer("model.model_dim", c.model_dim));
  c.num_heads = static_cast<int>(cfg.integer("model.num_heads", c.num_heads));
  c.ffn_dim = static_cast<int>(cfg.integer("model.ffn_dim", c.ffn_dim));
  c.max_positions =
      static_cast<int>(cfg.integer("model.max_positions", c.max_positions));
  c.dropout = cfg.real("model.dropout", c.dropout);
  c.label_smoothing = cfg.real("model.label_smoothing", c.label_smoothing);
  c.validate();
  return c;
}

DecodeOptions decode_options(const Config& cfg) {
  DecodeOptions d;
  d.mode = cfg.str("decode.mode", d.mode);
  d.beam_width = static_cast<int>(cfg.integer("decode.beam_width", d.beam_width));
  d.length_norm = cfg.real("decode.length_norm", d.length_norm);
  d.max_len = static_cast<int>(cfg.integer("decode.max_len", d.max_len));
  d.batch_size = static_cast<int>(cfg.integer("decode.batch_size", d.batch_size));
  d.validate();
  return d;
}

TrainOptions train_options(const Config& cfg, const fs::path& log_path) {
  TrainOptions t;
  t.max_epochs = static_cast<int>(cfg.integer("train.max_epochs", t.max_epochs));
  t.patience = static_cast<int>(cfg.integer("train.patience", t.patience));
  t.batch_size = static_cast<int>(cfg.integer("train.batch_size", t.batch_size));
  t.adam.lr = cfg.real("train.lr", t.adam.lr);
  t.seed = config_seed(cfg);
  t.gate_start_bias =
      static_cast<float>(cfg.real("train.gate_start_bias", t.gate_start_bias));
  // dev selection always decodes greedily; beam search is a test-time knob
  t.dev_decode = decode_options(cfg);
  t.dev_decode.mode = "greedy";
  t.log_path = log_path.string();
  t.validate();
  return t;
}

json train_report_json(const TrainReport& r) {
  json history = json::array();
  for (const EpochRecord& e : r.history)
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"dev_bleu", e.dev_bleu}});
  return {{"epochs_run", r.epochs_run},
          {"best_epoch", r.best_epoch},
          {"best_dev_bleu", r.best_dev_bleu},
          {"stopped_early", r.stopped_early},
          {"history", history}};
}

json bleu_json(const BleuReport& r) {
  return {{"bleu", r.bleu},
          {"precisions", r.precisions},
          {"brevity_penalty", r.brevity_penalty},
          {"candidate_length", r.candidate_length},
          {"reference_length", r.reference_length}};
}

json prf_json(const PrfReport& r) {
  return {{"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"overlap", r.overlap},
          {"candidate_total", r.candidate_total},
          {"reference_total", r.reference_total},
          {"precision_defined", r.precision_defined},
          {"recall_defined", r.recall_defined}};
}

PronounLexicon lexicon_from(const Config& cfg, const std::string& lang_key,
                            const std::string& file_key,
                            const std::string& fallback_lang) {
  std::string lang = cfg.str(lang_key, fallback_lang);
  std::string file = cfg.str(file_key, "");
  if (!file.empty()) {
    require_file(file, "pronoun lexicon");
    return PronounLexicon::load_file(lang, file);
  }
  return PronounLexicon::builtin(lang);
}

ChainMap chains_from(const Config& cfg, const Corpus& corpus) {
  std::string path = cfg.str("analyze.annotations", "");
  if (!path.empty()) {
    require_file(path, "annotations");
    return load_annotations(path);
  }
  ChainMap chains;
  for (const ParallelDocument& pd : corpus)
    chains[pd.id()] = heuristic_chain_fallback(pd.source);
  return chains;
}

// ---------------------------------------------------------------------------
// translation files: JSONL, one decoded document per line

struct TranslationDoc {
  std::string doc_id;
  std::string language;
  std::vector<Sentence> sentences;
};

std::vector<TranslationDoc> load_translations(const fs::path& path) {
  require_file(path, "translations");
  std::ifstream in(path);
  std::vector<TranslationDoc> docs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("translations " + path.string() + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("doc_id") || !j.contains("sentences") ||
        !j["doc_id"].is_string() || !j["sentences"].is_array())
      throw ValidationError("translations " + path.string() + " line " +
                            std::to_string(line_no) +
                            ": need doc_id and sentences");
    TranslationDoc doc;
    doc.doc_id = j["doc_id"].get<std::string>();
    doc.language = j.value("language", std::string());
    for (const auto& sent : j["sentences"]) {
      if (!sent.is_array())
        throw ValidationError("translations " + path.string() + " line " +
                              std::to_string(line_no) +
                              ": sentences must be token arrays");
      doc.sentences.push_back(sent.get<Sentence>());
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

/// Sentence-aligned (source, reference, candidate) triple over a corpus and
/// a decoded translation of it, matched by document order and id.
struct EvalData {
  std::vector<Sentence> src;
  std::vector<Sentence> ref;
  std::vector<Sentence> cand;
};

EvalData align_translation(const Corpus& corpus,
                           const std::vector<TranslationDoc>& hyp) {
  if (corpus.size() != hyp.size())
    throw ValidationError("translations cover " + std::to_string(hyp.size()) +
                          " documents, corpus has " +
                          std::to_string(corpus.size()));
  EvalData data;
  for (size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].id() != hyp[d].doc_id)
      throw ValidationError("document " + std::to_string(d) + " is '" +
                            corpus[d].id() + "' in the corpus but '" +
                            hyp[d].doc_id + "' in the translations");
    if (corpus[d].size() != hyp[d].sentences.size())
      throw ValidationError("document '" + corpus[d].id() + "': " +
                            std::to_string(hyp[d].sentences.size()) +
                            " translated sentences for " +
                            std::to_string(corpus[d].size()) + " references");
    for (size_t i = 0; i < corpus[d].size(); ++i) {
      data.src.push_back(corpus[d].source.sentences[i]);
      data.ref.push_back(corpus[d].target.sentences[i]);
      data.cand.push_back(hyp[d].sentences[i]);
    }
  }
  return data;
}

bool has_source_pronoun(const std::vector<Sentence>& src,
                        const PronounLexicon& lexicon) {
  for (const Sentence& s : src)
    for (const std::string& tok : s)
      if (lexicon.contains(tok)) return true;
  return false;
}

std::vector<std::vector<int>> link_all(const std::vector<Sentence>& src,
                                       const std::vector<Sentence>& tgt,
                                       const AlignmentModel& model) {
  std::vector<std::vector<int>> links;
  links.reserve(src.size());
  for (size_t i = 0; i < src.size(); ++i)
    links.push_back(align(src[i], tgt[i], model));
  return links;
}

/// BLEU plus pronoun metrics of one candidate against the reference. When
/// the source side carries no lexicon pronoun at all, the pronoun metrics
/// are reported as the string "undefined" instead of numbers.
json score_candidate(const Config& cfg, const EvalData& data,
                     const PronounLexicon& src_lex,
                     const PronounLexicon& tgt_lex) {
  json out{{"sentences", data.src.size()},
           {"bleu", bleu_json(bleu(data.cand, data.ref))}};
  if (!has_source_pronoun(data.src, src_lex)) {
    out["apt"] = "undefined";
    out["pronoun_prf"] = "undefined";
    return out;
  }
  int iterations =
      static_cast<int>(cfg.integer("evaluate.align_iterations", 5));
  // references are never empty (corpus invariant), but a weak model can
  // decode an empty hypothesis, which the aligner's trainer rejects
  std::vector<std::pair<Sentence, Sentence>> pairs;
  pairs.reserve(2 * data.src.size());
  for (size_t i = 0; i < data.src.size(); ++i) {
    pairs.emplace_back(data.src[i], data.ref[i]);
    if (!data.cand[i].empty()) pairs.emplace_back(data.src[i], data.cand[i]);
  }
  AlignmentModel aligner = train_aligner(pairs, iterations);
  AptOptions apt_opts;
  apt_opts.partial_weight = cfg.real("evaluate.apt_partial_weight", 0.0);
  AptReport apt_report =
      apt(data.src, data.cand, data.ref, link_all(data.src, data.cand, aligner),
          link_all(data.src, data.ref, aligner), src_lex, apt_opts);
  out["apt"] = {{"score", apt_report.score}, {"pronouns", apt_report.pronouns}};
  out["pronoun_prf"] =
      prf_json(pronoun_prf(data.src, data.cand, data.ref, src_lex, tgt_lex));
  out["aligner_iterations"] = iterations;
  return out;
}

// ---------------------------------------------------------------------------
// subcommands

void cmd_prepare(const Config& cfg) {
  fs::path dir = out_root(cfg);
  fs::path corpus_path = cfg.require_str("corpus.path");
  Corpus corpus = load_corpus_file(corpus_path, "corpus");

  FilterOptions filter;
  filter.max_runtime_min =
      cfg.real("corpus.filter.max_runtime_min", filter.max_runtime_min);
  filter.min_sentences = static_cast<int>(
      cfg.integer("corpus.filter.min_sentences", filter.min_sentences));
  filter.max_sentences = static_cast<int>(
      cfg.integer("corpus.filter.max_sentences", filter.max_sentences));
  Corpus kept = filter_documents(corpus, filter);

  SplitRatio ratio;
  ratio.train = cfg.real("corpus.split.train", ratio.train);
  ratio.dev = cfg.real("corpus.split.dev", ratio.dev);
  ratio.test = cfg.real("corpus.split.test", ratio.test);
  double heldout = cfg.real("corpus.heldout_fraction", 0.2);
  CorpusSplits splits = split_corpus(kept, ratio, heldout, config_seed(cfg));

  Outputs out;
  auto save_raw = [&](const Corpus& c, const char* name) {
    save_corpus(c, out.track(dir / "raw" / name).string());
  };
  save_raw(splits.train, "train.jsonl");
  save_raw(splits.dev, "dev.jsonl");
  save_raw(splits.test, "test.jsonl");
  save_raw(splits.held_out, "heldout.jsonl");

  std::string case_mode = cfg.str("preprocess.case", "truecase");
  if (case_mode != "truecase" && case_mode != "lowercase" && case_mode != "none")
    throw ConfigError("preprocess.case must be truecase, lowercase or none");
  std::string bpe_mode = cfg.str("preprocess.bpe_mode", "joint");
  if (bpe_mode != "joint" && bpe_mode != "separate" && bpe_mode != "none")
    throw ConfigError("preprocess.bpe_mode must be joint, separate or none");
  int merges = static_cast<int>(cfg.integer("preprocess.bpe_merges", 30000));
  if (merges < 0) throw ConfigError("preprocess.bpe_merges must be >= 0");
  if (splits.train.empty())
    throw ConfigError("prepare: empty training split, nothing to learn from");

  std::string src_lang = splits.train.front().source.language;
  std::string tgt_lang = splits.train.front().target.language;

  auto side_sentences = [](const Corpus& c, bool source) {
    std::vector<Sentence> all;
    for (const ParallelDocument& pd : c) {
      const auto& sents = source ? pd.source.sentences : pd.target.sentences;
      all.insert(all.end(), sents.begin(), sents.end());
    }
    return all;
  };
  auto for_each_sentence = [](Corpus& c, bool source, auto&& fn) {
    for (ParallelDocument& pd : c)
      for (Sentence& s : source ? pd.source.sentences : pd.target.sentences)
        fn(s);
  };

  Corpus* prepared[3] = {&splits.train, &splits.dev, &splits.test};
  if (case_mode == "truecase") {
    TruecaseModel src_tc = learn_truecase(side_sentences(splits.train, true));
    TruecaseModel tgt_tc = learn_truecase(side_sentences(splits.train, false));
    src_tc.save(out.track(dir / "prepared" / ("truecase." + src_lang + ".tsv"))
                    .string());
    tgt_tc.save(out.track(dir / "prepared" / ("truecase." + tgt_lang + ".tsv"))
                    .string());
    for (Corpus* c : prepared) {
      for_each_sentence(*c, true, [&](Sentence& s) { s = apply_truecase(s, src_tc); });
      for_each_sentence(*c, false, [&](Sentence& s) { s = apply_truecase(s, tgt_tc); });
    }
  } else if (case_mode == "lowercase") {
    auto lower = [](Sentence& s) {
      for (std::string& tok : s) tok = utf8::fold_case(tok);
    };
    for (Corpus* c : prepared) {
      for_each_sentence(*c, true, lower);
      for_each_sentence(*c, false, lower);
    }
  }

  if (bpe_mode == "joint") {
    std::vector<Sentence> pool = side_sentences(splits.train, true);
    std::vector<Sentence> tgt = side_sentences(splits.train, false);
    pool.insert(pool.end(), tgt.begin(), tgt.end());
    BpeModel bpe = learn_bpe(pool, merges);
    bpe.save(out.track(dir / "prepared" / "bpe.codes").string());
    for (Corpus* c : prepared) {
      for_each_sentence(*c, true, [&](Sentence& s) { s = apply_bpe(s, bpe); });
      for_each_sentence(*c, false, [&](Sentence& s) { s = apply_bpe(s, bpe); });
    }
  } else if (bpe_mode == "separate") {
    BpeModel src_bpe = learn_bpe(side_sentences(splits.train, true), merges);
    BpeModel tgt_bpe = learn_bpe(side_sentences(splits.train, false), merges);
    src_bpe.save(
        out.track(dir / "prepared" / ("bpe." + src_lang + ".codes")).string());
    tgt_bpe.save(
        out.track(dir / "prepared" / ("bpe." + tgt_lang + ".codes")).string());
    for (Corpus* c : prepared) {
      for_each_sentence(*c, true, [&](Sentence& s) { s = apply_bpe(s, src_bpe); });
      for_each_sentence(*c, false, [&](Sentence& s) { s = apply_bpe(s, tgt_bpe); });
    }
  }

  auto save_prepared = [&](const Corpus& c, const char* name) {
    save_corpus(c, out.track(dir / "prepared" / name).string());
  };
  save_prepared(splits.train, "train.jsonl");
  save_prepared(splits.dev, "dev.jsonl");
  save_prepared(splits.test, "test.jsonl");

  write_run_manifest(out, dir, "prepare", cfg);
  out.commit();
  std::cout << "prepare: " << corpus.size() << " documents, kept "
            << kept.size() << " -> " << splits.train.size() << " train / "
            << splits.dev.size() << " dev / " << splits.test.size()
            << " test / " << splits.held_out.size() << " held out\n";
}

void cmd_analyze(const Config& cfg) {
  fs::path dir = out_root(cfg);
  fs::path corpus_path = cfg.str("analyze.corpus", cfg.require_str("corpus.path"));
  Corpus corpus = load_corpus_file(corpus_path, "analysis corpus");
  ChainMap chains = chains_from(cfg, corpus);
  PronounLexicon lexicon =
      lexicon_from(cfg, "analyze.lexicon", "analyze.lexicon_file", "en");

  ClassificationReport report =
      classify_corpus(corpus, chains, lexicon.forms());
  CorpusStats stats = corpus_stats(corpus);

  Outputs out;
  write_json_file(out, dir / "analysis" / "classification.json",
                  {{"documents", stats.num_documents},
                   {"sentences", stats.num_sentences},
                   {"pronouns", report.total},
                   {"intrasentential", report.intrasentential},
                   {"anaphoric", report.anaphoric},
                   {"cataphoric", report.cataphoric},
                   {"intrasentential_pct", report.intrasentential_pct},
                   {"anaphoric_pct", report.anaphoric_pct},
                   {"cataphoric_pct", report.cataphoric_pct}});
  save_histogram_csv(report,
                     out.track(dir / "analysis" / "windows.csv").string());
  write_run_manifest(out, dir, "analyze", cfg);
  out.commit();
  std::cout << "analyze: " << report.total << " pronouns ("
            << report.intrasentential << " intrasentential, "
            << report.anaphoric << " anaphoric, " << report.cataphoric
            << " cataphoric)\n";
}

void cmd_extract_suite(const Config& cfg) {
  fs::path dir = out_root(cfg);
  fs::path corpus_path =
      cfg.str("suite.corpus", (dir / "raw" / "heldout.jsonl").string());
  Corpus corpus = load_corpus_file(corpus_path, "suite corpus");
  ChainMap chains = chains_from(cfg, corpus);
  PronounLexicon lexicon =
      lexicon_from(cfg, "analyze.lexicon", "analyze.lexicon_file", "en");

  std::vector<CataphoraExample> examples =
      extract_cataphora_suite(corpus, chains, lexicon.forms());

  std::map<std::string, const ParallelDocument*> by_id;
  for (const ParallelDocument& pd : corpus) by_id[pd.id()] = &pd;

  Corpus pairs;
  json listing = json::array();
  for (const CataphoraExample& ex : examples) {
    const ParallelDocument& pd = *by_id.at(ex.doc_id);
    ParallelDocument pair;
    pair.source.doc_id = ex.doc_id + "#" + std::to_string(ex.sentence_index);
    pair.source.language = pd.source.language;
    pair.target.doc_id = pair.source.doc_id;
    pair.target.language = pd.target.language;
    for (int i = ex.sentence_index; i <= ex.sentence_index + 1; ++i) {
      pair.source.sentences.push_back(pd.source.sentences[i]);
      pair.target.sentences.push_back(pd.target.sentences[i]);
    }
    pairs.push_back(std::move(pair));

    const Sentence& pron_sent = pd.source.sentences[ex.pronoun.sentence_index];
    const Sentence& post_sent =
        pd.source.sentences[ex.postcedent.sentence_index];
    std::string span;
    for (int t = ex.postcedent.start; t < ex.postcedent.end; ++t) {
      if (!span.empty()) span += " ";
      span += post_sent[t];
    }
    listing.push_back({{"doc_id", ex.doc_id},
                       {"sentence_index", ex.sentence_index},
                       {"pronoun", pron_sent[ex.pronoun.head_index]},
                       {"postcedent", span},
                       {"postcedent_head", post_sent[ex.postcedent.head_index]},
                       {"tags", ex.subsets}});
  }

  Outputs out;
  save_corpus(pairs, out.track(dir / "suite" / "pairs.jsonl").string());
  for (const char* tag : {"DET", "PROPN", "NOUN"}) {
    Corpus subset;
    for (size_t i = 0; i < examples.size(); ++i)
      if (examples[i].subsets.count(tag)) subset.push_back(pairs[i]);
    save_corpus(subset, out.track(dir / "suite" /
                                  ("pairs." + std::string(tag) + ".jsonl"))
                            .string());
  }
  write_json_file(out, dir / "suite" / "examples.json", listing);
  write_run_manifest(out, dir, "extract-suite", cfg);
  out.commit();
  std::cout << "extract-suite: " << examples.size() << " sentence pairs\n";
}

void cmd_train_baseline(const Config& cfg) {
  fs::path dir = out_root(cfg);
  Corpus train = load_corpus_file(
      cfg.str("train.corpus", (dir / "prepared" / "train.jsonl").string()),
      "training corpus");
  Corpus dev = load_corpus_file(
      cfg.str("train.dev_corpus", (dir / "prepared" / "dev.jsonl").string()),
      "dev corpus");

  Outputs out;
  fs::path log = out.track(dir / "logs" / "train-baseline.jsonl");
  fs::remove(log);  // the trainer appends; a stale log would accumulate
  TrainOptions opts = train_options(cfg, log);
  TrainReport report;
  Model model = train_baseline(train, dev, model_config(cfg), opts, &report);

  fs::path model_path = out.track(dir / "models" / "baseline.dmck");
  out.track(dir / "models" / "baseline.dmck.json");
  save_model(model, model_path.string());
  write_json_file(out, dir / "reports" / "train-baseline.json",
                  train_report_json(report));
  write_run_manifest(out, dir, "train-baseline", cfg);
  out.commit();
  std::cout << "train-baseline: " << report.epochs_run << " epochs, dev BLEU "
            << report.best_dev_bleu << " at epoch " << report.best_epoch
            << "\n";
}

void cmd_train_han(const Config& cfg) {
  fs::path dir = out_root(cfg);
  ContextSpec spec = ContextSpec::parse(cfg.require_str("context"));
  if (spec.empty())
    throw ConfigError("train-han: 'context' must name at least one offset");
  fs::path base_path = cfg.str("train.baseline_model",
                               (dir / "models" / "baseline.dmck").string());
  require_file(base_path, "baseline model");
  Model baseline = load_model(base_path.string());
  Corpus train = load_corpus_file(
      cfg.str("train.corpus", (dir / "prepared" / "train.jsonl").string()),
      "training corpus");
  Corpus dev = load_corpus_file(
      cfg.str("train.dev_corpus", (dir / "prepared" / "dev.jsonl").string()),
      "dev corpus");

  Outputs out;
  fs::path log = out.track(dir / "logs" / "train-han.jsonl");
  fs::remove(log);
  TrainOptions opts = train_options(cfg, log);
  TrainReport report;
  Model model = train_han(baseline, train, dev, spec, opts, &report);

  fs::path model_path = out.track(dir / "models" / "han.dmck");
  out.track(dir / "models" / "han.dmck.json");
  save_model(model, model_path.string());
  json rj = train_report_json(report);
  rj["context"] = spec.str();
  write_json_file(out, dir / "reports" / "train-han.json", rj);
  write_run_manifest(out, dir, "train-han", cfg);
  out.commit();
  std::cout << "train-han: context " << spec.str() << ", " << report.epochs_run
            << " epochs, dev BLEU " << report.best_dev_bleu << " at epoch "
            << report.best_epoch << "\n";
}

std::vector<std::vector<std::vector<int>>> corpus_ids(const Corpus& corpus,
                                                      const Vocabulary& vocab) {
  std::vector<std::vector<std::vector<int>>> docs;
  docs.reserve(corpus.size());
  for (const ParallelDocument& pd : corpus) {
    std::vector<std::vector<int>> doc;
    doc.reserve(pd.size());
    for (const Sentence& s : pd.source.sentences)
      doc.push_back(source_ids(vocab, s));
    docs.push_back(std::move(doc));
  }
  return docs;
}

/// Decodes a corpus and undoes the training-time preprocessing on the
/// hypotheses (BPE always, truecasing when configured), so translations are
/// plain word-level sentences.
std::vector<TranslationDoc> decode_corpus(const Config& cfg, Model& model,
                                          const Corpus& corpus,
                                          const ContextSpec& spec,
                                          std::vector<std::vector<double>>* logprobs,
                                          std::vector<std::vector<bool>>* truncated) {
  auto results =
      decode_documents(model, corpus_ids(corpus, model.vocab), spec,
                       decode_options(cfg));
  bool strip_bpe = cfg.str("preprocess.bpe_mode", "joint") != "none";
  std::string marker = cfg.str("preprocess.bpe_marker", "@@");
  bool uncase = cfg.str("preprocess.case", "truecase") == "truecase";
  std::vector<TranslationDoc> docs;
  docs.reserve(results.size());
  for (size_t d = 0; d < results.size(); ++d) {
    TranslationDoc doc;
    doc.doc_id = corpus[d].id();
    doc.language = corpus[d].target.language;
    if (logprobs) logprobs->emplace_back();
    if (truncated) truncated->emplace_back();
    for (const DecodeResult& r : results[d]) {
      Sentence s = r.tokens;
      if (strip_bpe) s = unapply_bpe(s, marker);
      if (uncase) s = detruecase(s);
      doc.sentences.push_back(std::move(s));
      if (logprobs) logprobs->back().push_back(r.logprob);
      if (truncated) truncated->back().push_back(r.truncated);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void cmd_translate(const Config& cfg) {
  fs::path dir = out_root(cfg);
  fs::path model_path =
      cfg.str("translate.model", (dir / "models" / "baseline.dmck").string());
  require_file(model_path, "model");
  Model model = load_model(model_path.string());
  Corpus corpus = load_corpus_file(
      cfg.str("translate.corpus", (dir / "prepared" / "test.jsonl").string()),
      "translation corpus");
  ContextSpec spec = ContextSpec::parse(cfg.str("decode.spec", ""));

  std::vector<std::vector<double>> logprobs;
  std::vector<std::vector<bool>> truncated;
  std::vector<TranslationDoc> docs =
      decode_corpus(cfg, model, corpus, spec, &logprobs, &truncated);

  Outputs out;
  fs::path out_path = cfg.str("translate.output",
                              (dir / "translations" / "test.jsonl").string());
  std::string text;
  for (size_t d = 0; d < docs.size(); ++d) {
    json sentences = json::array();
    for (const Sentence& s : docs[d].sentences) sentences.push_back(s);
    json rec{{"doc_id", docs[d].doc_id},
             {"language", docs[d].language},
             {"sentences", sentences},
             {"logprobs", logprobs[d]},
             {"truncated", truncated[d]}};
    text += rec.dump() + "\n";
  }
  write_text(out, out_path, text);
  write_run_manifest(out, dir, "translate", cfg);
  out.commit();
  size_t n = 0;
  for (const auto& d : docs) n += d.sentences.size();
  std::cout << "translate: " << docs.size() << " documents, " << n
            << " sentences, context " << spec.str() << " -> "
            << out_path.string() << "\n";
}

void cmd_evaluate(const Config& cfg) {
  fs::path dir = out_root(cfg);
  Corpus corpus = load_corpus_file(
      cfg.str("evaluate.corpus", (dir / "raw" / "test.jsonl").string()),
      "evaluation corpus");
  std::vector<TranslationDoc> hyp = load_translations(cfg.str(
      "evaluate.translation", (dir / "translations" / "test.jsonl").string()));
  EvalData data = align_translation(corpus, hyp);
  if (data.src.empty()) throw ValidationError("evaluation corpus is empty");

  std::string src_lang =
      corpus.empty() ? "en" : corpus.front().source.language;
  std::string tgt_lang =
      corpus.empty() ? "de" : corpus.front().target.language;
  PronounLexicon src_lex = lexicon_from(cfg, "evaluate.source_lexicon",
                                        "evaluate.source_lexicon_file", src_lang);
  PronounLexicon tgt_lex = lexicon_from(cfg, "evaluate.target_lexicon",
                                        "evaluate.target_lexicon_file", tgt_lang);

  json report = score_candidate(cfg, data, src_lex, tgt_lex);

  Outputs out;
  fs::path out_path =
      cfg.str("evaluate.output", (dir / "reports" / "evaluation.json").string());
  write_json_file(out, out_path, report);
  write_run_manifest(out, dir, "evaluate", cfg);
  out.commit();
  std::cout << "evaluate: BLEU " << report["bleu"]["bleu"] << " over "
            << data.src.size() << " sentences\n";
}

void cmd_significance(const Config& cfg) {
  fs::path dir = out_root(cfg);
  Corpus corpus = load_corpus_file(
      cfg.str("significance.corpus", (dir / "raw" / "test.jsonl").string()),
      "evaluation corpus");
  EvalData a = align_translation(
      corpus, load_translations(cfg.require_str("significance.translation_a")));
  EvalData b = align_translation(
      corpus, load_translations(cfg.require_str("significance.translation_b")));
  int trials = static_cast<int>(cfg.integer("significance.trials", 10000));

  SignificanceReport report =
      paired_significance(a.cand, b.cand, a.ref, trials, config_seed(cfg));

  Outputs out;
  write_json_file(out, dir / "reports" / "significance.json",
                  {{"p_value", report.p_value},
                   {"observed_delta", report.observed_delta},
                   {"bleu_a", report.bleu_a},
                   {"bleu_b", report.bleu_b},
                   {"trials", report.trials},
                   {"seed", report.seed}});
  write_run_manifest(out, dir, "significance", cfg);
  out.commit();
  std::cout << "significance: BLEU " << report.bleu_a << " vs "
            << report.bleu_b << ", p = " << report.p_value << "\n";
}

void cmd_ablate(const Config& cfg) {
  fs::path dir = out_root(cfg);
  fs::path model_path =
      cfg.str("ablate.model", (dir / "models" / "han.dmck").string());
  require_file(model_path, "model");
  Model model = load_model(model_path.string());
  Corpus corpus = load_corpus_file(
      cfg.str("ablate.corpus", (dir / "prepared" / "test.jsonl").string()),
      "decode corpus");
  Corpus reference = load_corpus_file(
      cfg.str("ablate.reference", (dir / "raw" / "test.jsonl").string()),
      "reference corpus");
  std::vector<std::string> spec_texts = cfg.str_list("ablate.specs");
  if (spec_texts.empty())
    throw ConfigError("ablate.specs must list at least one context spec");

  std::string src_lang =
      reference.empty() ? "en" : reference.front().source.language;
  std::string tgt_lang =
      reference.empty() ? "de" : reference.front().target.language;
  PronounLexicon src_lex = lexicon_from(cfg, "evaluate.source_lexicon",
                                        "evaluate.source_lexicon_file", src_lang);
  PronounLexicon tgt_lex = lexicon_from(cfg, "evaluate.target_lexicon",
                                        "evaluate.target_lexicon_file", tgt_lang);

  // validate every spec before the first (slow) decode
  std::vector<ContextSpec> specs;
  for (const std::string& text : spec_texts) {
    ContextSpec spec = ContextSpec::parse(text);
    if (!spec.subset_of(model.trained_spec))
      throw ConfigError("ablate spec " + spec.str() +
                        " is not a subset of the trained context " +
                        model.trained_spec.str());
    specs.push_back(spec);
  }

  json rows = json::array();
  std::string csv = "spec,bleu,apt,f1\n";
  for (const ContextSpec& spec : specs) {
    std::vector<TranslationDoc> docs =
        decode_corpus(cfg, model, corpus, spec, nullptr, nullptr);
    EvalData data = align_translation(reference, docs);
    json scored = score_candidate(cfg, data, src_lex, tgt_lex);
    scored["spec"] = spec.str();
    char line[128];
    if (scored["apt"].is_string()) {
      std::snprintf(line, sizeof line, "%s,%.4f,undefined,undefined\n",
                    spec.str().c_str(),
                    scored["bleu"]["bleu"].get<double>());
    } else {
      std::snprintf(line, sizeof line, "%s,%.4f,%.4f,%.4f\n",
                    spec.str().c_str(), scored["bleu"]["bleu"].get<double>(),
                    scored["apt"]["score"].get<double>(),
                    scored["pronoun_prf"]["f1"].get<double>());
    }
    csv += line;
    rows.push_back(std::move(scored));
  }

  Outputs out;
  write_json_file(out, dir / "reports" / "ablation.json", rows);
  write_text(out, dir / "reports" / "ablation.csv", csv);
  write_run_manifest(out, dir, "ablate", cfg);
  out.commit();
  std::cout << "ablate: " << specs.size() << " context specs -> "
            << (dir / "reports" / "ablation.csv").string() << "\n";
}

void cmd_attention(const Config& cfg) {
  fs::path dir = out_root(cfg);
  fs::path model_path =
      cfg.str("attention.model", (dir / "models" / "han.dmck").string());
  require_file(model_path, "model");
  Model model = load_model(model_path.string());
  if (model.stage != "han")
    throw ConfigError("attention requires a context-trained model, got stage " +
                      model.stage);
  long offset = cfg.integer("attention.offset", 1);
  ContextSpec probe = ContextSpec::of({static_cast<int>(offset)});
  if (!probe.subset_of(model.trained_spec))
    throw ConfigError("attention offset " + probe.str() +
                      " is not in the trained context " +
                      model.trained_spec.str());
  long limit = cfg.integer("attention.limit", 16);
  if (limit < 1) throw ConfigError("attention.limit must be >= 1");
  Corpus corpus = load_corpus_file(
      cfg.str("attention.corpus", (dir / "prepared" / "test.jsonl").string()),
      "attention corpus");

  Outputs out;
  json maps = json::array();
  long made = 0;
  for (const ParallelDocument& pd : corpus) {
    for (size_t i = 0; i < pd.size() && made < limit; ++i) {
      long j = static_cast<long>(i) + offset;
      if (j < 0 || j >= static_cast<long>(pd.size())) continue;
      std::vector<int> src = source_ids(model.vocab, pd.source.sentences[i]);
      std::vector<int> ctx = source_ids(model.vocab, pd.source.sentences[j]);
      MatrixOf<float> map =
          attention_map(model.params, model.config, src, ctx);

      std::string csv;
      char cell[32];
      for (Eigen::Index r = 0; r < map.rows(); ++r) {
        for (Eigen::Index c = 0; c < map.cols(); ++c) {
          std::snprintf(cell, sizeof cell, "%s%.6f", c ? "," : "",
                        static_cast<double>(map(r, c)));
          csv += cell;
        }
        csv += "\n";
      }
      std::string name = "map_" + std::to_string(made) + ".csv";
      write_text(out, dir / "attention" / name, csv);

      Sentence src_tokens = pd.source.sentences[i];
      src_tokens.push_back("</s>");
      Sentence ctx_tokens = pd.source.sentences[j];
      ctx_tokens.push_back("</s>");
      maps.push_back({{"file", name},
                      {"doc_id", pd.id()},
                      {"sentence_index", i},
                      {"offset", offset},
                      {"source_tokens", src_tokens},
                      {"context_tokens", ctx_tokens}});
      ++made;
    }
    if (made >= limit) break;
  }
  write_json_file(out, dir / "attention" / "maps.json",
                  {{"offset", offset}, {"maps", maps}});
  write_run_manifest(out, dir, "attention", cfg);
  out.commit();
  std::cout << "attention: " << made << " maps -> "
            << (dir / "attention").string() << "\n";
}

// ---------------------------------------------------------------------------

int fail(int code, const char* type, const std::string& message) {
  std::cerr << json{{"error", type}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document-level NMT workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  struct FlagOverride {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::deque<FlagOverride> flags;

  std::map<std::string, std::function<void(const Config&)>> commands = {
      {"prepare", cmd_prepare},
      {"analyze", cmd_analyze},
      {"extract-suite", cmd_extract_suite},
      {"train-baseline", cmd_train_baseline},
      {"train-han", cmd_train_han},
      {"translate", cmd_translate},
      {"evaluate", cmd_evaluate},
      {"significance", cmd_significance},
      {"ablate", cmd_ablate},
      {"attention", cmd_attention},
  };

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file (JSON, comments allowed)")
        ->required();
    sub->add_option("--set", overrides,
                    "override a config key, e.g. --set decode.spec=+1");
    auto bind = [&, sub](const std::string& flag, const std::string& key,
                         const std::string& desc) {
      flags.push_back({key, "", nullptr});
      FlagOverride& slot = flags.back();
      slot.opt = sub->add_option(flag, slot.value, desc)
                     ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    bind("--out-dir", "out_dir", "output directory");
    bind("--seed", "seed", "experiment seed");
    return bind;
  };

  {
    auto bind = common(app.add_subcommand("prepare",
                                          "filter, split and preprocess the corpus"));
    bind("--corpus", "corpus.path", "raw corpus JSONL");
  }
  {
    auto bind = common(app.add_subcommand("analyze",
                                          "pronoun resolution-window statistics"));
    bind("--corpus", "analyze.corpus", "corpus to analyze");
    bind("--annotations", "analyze.annotations", "coreference annotation JSONL");
  }
  {
    auto bind = common(app.add_subcommand("extract-suite",
                                          "extract cataphora sentence pairs"));
    bind("--corpus", "suite.corpus", "corpus to extract from");
    bind("--annotations", "analyze.annotations", "coreference annotation JSONL");
  }
  {
    auto bind = common(app.add_subcommand("train-baseline",
                                          "train the sentence-level model"));
    bind("--train", "train.corpus", "training corpus");
    bind("--dev", "train.dev_corpus", "development corpus");
  }
  {
    auto bind = common(app.add_subcommand("train-han",
                                          "fine-tune with context attention"));
    bind("--train", "train.corpus", "training corpus");
    bind("--dev", "train.dev_corpus", "development corpus");
    bind("--context", "context", "training context offsets, e.g. -1,+1");
    bind("--baseline", "train.baseline_model", "stage 1 checkpoint");
  }
  {
    auto bind = common(app.add_subcommand("translate", "decode a corpus"));
    bind("--model", "translate.model", "model checkpoint");
    bind("--corpus", "translate.corpus", "corpus to translate");
    bind("--output", "translate.output", "translations JSONL");
    bind("--spec", "decode.spec", "decode context offsets");
  }
  {
    auto bind = common(app.add_subcommand("evaluate",
                                          "BLEU, APT and pronoun F1"));
    bind("--corpus", "evaluate.corpus", "reference corpus");
    bind("--translation", "evaluate.translation", "translations JSONL");
    bind("--output", "evaluate.output", "report path");
  }
  {
    auto bind = common(app.add_subcommand("significance",
                                          "paired randomization test on BLEU"));
    bind("--corpus", "significance.corpus", "reference corpus");
    bind("--a", "significance.translation_a", "system A translations");
    bind("--b", "significance.translation_b", "system B translations");
  }
  {
    auto bind = common(app.add_subcommand("ablate",
                                          "decode one model under several specs"));
    bind("--model", "ablate.model", "model checkpoint");
    bind("--corpus", "ablate.corpus", "corpus to decode");
    bind("--reference", "ablate.reference", "word-level reference corpus");
  }
  {
    auto bind = common(app.add_subcommand("attention",
                                          "dump context attention maps"));
    bind("--model", "attention.model", "model checkpoint");
    bind("--corpus", "attention.corpus", "corpus to probe");
    bind("--offset", "attention.offset", "context offset to map");
    bind("--limit", "attention.limit", "maximum number of maps");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(1, "UsageError", e.what());
  }

  try {
    Config cfg = Config::load(config_path);
    for (const std::string& assignment : overrides) cfg.set(assignment);
    for (const FlagOverride& f : flags)
      if (f.opt->count() > 0) cfg.set_value(f.key, f.value);
    commands.at(app.get_subcommands().front()->get_name())(cfg);
    return 0;
  } catch (const ConfigError& e) {
    return fail(1, "ConfigError", e.what());
  } catch (const ValidationError& e) {
    return fail(1, "ValidationError", e.what());
  } catch (const ParseError& e) {
    return fail(2, "ParseError", e.what());
  } catch (const CheckpointError& e) {
    return fail(2, "CheckpointError", e.what());
  } catch (const DimensionError& e) {
    return fail(2, "DimensionError", e.what());
  } catch (const Error& e) {
    return fail(2, "Error", e.what());
  } catch (const std::exception& e) {
    return fail(2, "InternalError", e.what());
  }
}
