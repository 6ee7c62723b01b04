#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace docmt {

using Sentence = std::vector<std::string>;

/// One side of a document-aligned pair: an ordered list of pre-tokenized
/// sentences plus optional subtitle run-time metadata.
struct Document {
  std::string doc_id;
  std::string language;
  std::vector<Sentence> sentences;
  std::optional<double> runtime_minutes;

  size_t size() const { return sentences.size(); }
};

/// Sentence-aligned source/target document pair. Source and target always
/// have the same number of sentences; languages differ.
struct ParallelDocument {
  Document source;
  Document target;

  const std::string& id() const { return source.doc_id; }
  size_t size() const { return source.sentences.size(); }
};

using Corpus = std::vector<ParallelDocument>;

struct CorpusStats {
  size_t num_sentences = 0;
  size_t num_documents = 0;
  double avg_doc_length = 0.0;
};

/// Deterministic document-level partition of a corpus.
struct CorpusSplits {
  Corpus train;
  Corpus dev;
  Corpus test;
  Corpus held_out;
  std::uint64_t seed = 0;
};

struct SplitRatio {
  double train = 100.0;
  double dev = 1.0;
  double test = 1.5;
};

struct FilterOptions {
  double max_runtime_min = 50.0;
  int min_sentences = 100;
  int max_sentences = 999;
};

/// Reads a JSON-lines corpus file, one ParallelDocument per line. Raises
/// ParseError with the line number on malformed records and ValidationError
/// naming the document on invariant violations (unequal sentence counts,
/// empty sentences, duplicate ids).
Corpus load_corpus(const std::string& path);

/// Writes the JSON-lines corpus format read by load_corpus.
void save_corpus(const Corpus& corpus, const std::string& path);

/// Parses a single corpus record; line_no is used in error messages only.
ParallelDocument parse_corpus_record(const std::string& line, size_t line_no);
std::string corpus_record_to_json(const ParallelDocument& doc);

/// Keeps documents whose run-time is strictly below max_runtime_min
/// (documents without run-time metadata are kept) and whose sentence count
/// lies in [min_sentences, max_sentences].
Corpus filter_documents(const Corpus& corpus, const FilterOptions& opts = {});

/// Shuffles documents by seed, partitions them by the given ratio with
/// largest-remainder rounding, then moves heldout_fraction of the training
/// documents into held_out. Raises ConfigError when the corpus has fewer
/// documents than partitions or the ratio is invalid.
CorpusSplits split_corpus(const Corpus& corpus, const SplitRatio& ratio,
                          double heldout_fraction, std::uint64_t seed);

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace docmt
