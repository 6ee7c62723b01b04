#pragma once

#include <string>
#include <vector>

#include "docmt/han.hpp"
#include "docmt/model.hpp"

namespace docmt {

struct DecodeOptions {
  std::string mode = "greedy";  // "greedy" | "beam"
  int beam_width = 4;
  double length_norm = 0.6;  // beam score = logprob / len^length_norm
  int max_len = 64;          // generated tokens per sentence, excluding <s>
  int batch_size = 32;       // sentences decoded together in greedy mode

  void validate() const;
};

struct DecodeResult {
  Sentence tokens;  // vocabulary tokens with specials stripped
  double logprob = 0.0;
  double score = 0.0;  // length-normalized logprob
  bool truncated = false;
};

/// Translates isolated sentences (no context, any model stage).
std::vector<DecodeResult> decode_sentences(Model& model,
                                           const std::vector<std::vector<int>>& sources,
                                           const DecodeOptions& opts);

/// Translates every sentence of every document, integrating neighbor context
/// per decode_spec. The spec must be empty or a subset of the trained spec;
/// baseline models only accept the empty spec.
std::vector<std::vector<DecodeResult>> decode_documents(
    Model& model, const std::vector<std::vector<std::vector<int>>>& documents,
    const ContextSpec& decode_spec, const DecodeOptions& opts);

}  // namespace docmt
