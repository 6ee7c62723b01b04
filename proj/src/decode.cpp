#include "docmt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace docmt {

namespace {

using FMat = MatrixOf<float>;

struct Hypothesis {
  std::vector<int> prefix{Vocabulary::kBos};
  double logprob = 0.0;
  bool done = false;
  bool truncated = false;
};

double normalized(double logprob, size_t generated, double alpha) {
  double len = static_cast<double>(std::max<size_t>(generated, 1));
  return logprob / std::pow(len, alpha);
}

/// Encoder (plus context integration for han models) run once per batch;
/// generation steps treat the result as a constant.
FMat compute_states(Model& model, const Batch& src, const ContextBatch* ctx) {
  Tape<float> tape;
  Rng rng(0);
  ForwardTrace<float> enc =
      encode_batch(tape, model.params, model.config, src, false, rng);
  if (ctx == nullptr || ctx->num_offsets() == 0)
    return tape.value(enc.states);
  std::vector<Tensor> ctx_states;
  for (const Batch& nb : ctx->neighbors)
    ctx_states.push_back(
        encode_batch(tape, model.params, model.config, nb, false, rng).states);
  HanTrace<float> han = han_encode(tape, model.params, model.config, enc.states,
                                   src, ctx_states, *ctx);
  return tape.value(han.h_prime);
}

/// Log-probabilities over the vocabulary at the last position of each
/// prefix, all prefixes having equal length.
FMat next_token_logprobs(Model& model, const Batch& src, const FMat& states,
                         const std::vector<std::vector<int>>& prefixes) {
  Tape<float> tape;
  Rng rng(0);
  Batch tgt = Batch::pad(prefixes);
  Tensor enc = tape.constant(states);
  ForwardTrace<float> dec = decode_logits_batch(tape, model.params, model.config,
                                                enc, src, tgt, false, rng);
  const FMat& logits = tape.value(dec.states);
  FMat out(tgt.size, logits.cols());
  for (Eigen::Index b = 0; b < tgt.size; ++b) {
    Eigen::RowVectorXf row = logits.row(b * tgt.len + tgt.len - 1);
    float max_val = row.maxCoeff();
    float lse = std::log((row.array() - max_val).exp().sum()) + max_val;
    out.row(b) = row.array() - lse;
  }
  return out;
}

Batch subset_batch(const Batch& src, const std::vector<size_t>& keep) {
  Batch out;
  out.size = static_cast<Eigen::Index>(keep.size());
  out.len = src.len;
  for (size_t b : keep) {
    for (Eigen::Index j = 0; j < src.len; ++j) {
      out.ids.push_back(src.ids[b * static_cast<size_t>(src.len) + static_cast<size_t>(j)]);
      out.real.push_back(src.real[b * static_cast<size_t>(src.len) + static_cast<size_t>(j)]);
    }
  }
  return out;
}

FMat subset_states(const FMat& states, Eigen::Index len,
                   const std::vector<size_t>& keep) {
  FMat out(static_cast<Eigen::Index>(keep.size()) * len, states.cols());
  for (size_t i = 0; i < keep.size(); ++i)
    out.middleRows(static_cast<Eigen::Index>(i) * len, len) =
        states.middleRows(static_cast<Eigen::Index>(keep[i]) * len, len);
  return out;
}

DecodeResult finish(const Model& model, const Hypothesis& hyp, double alpha) {
  DecodeResult r;
  r.tokens = model.vocab.decode(hyp.prefix);
  r.logprob = hyp.logprob;
  size_t generated = hyp.prefix.size() - 1 + (hyp.done && !hyp.truncated ? 1 : 0);
  r.score = normalized(hyp.logprob, generated, alpha);
  r.truncated = hyp.truncated;
  return r;
}

std::vector<DecodeResult> greedy_generate(Model& model, const Batch& src,
                                          const FMat& states,
                                          const DecodeOptions& opts) {
  std::vector<Hypothesis> hyps(static_cast<size_t>(src.size));
  for (int step = 0; step < opts.max_len; ++step) {
    std::vector<size_t> active;
    for (size_t b = 0; b < hyps.size(); ++b)
      if (!hyps[b].done) active.push_back(b);
    if (active.empty()) break;
    Batch sub_src = subset_batch(src, active);
    FMat sub_states = subset_states(states, src.len, active);
    std::vector<std::vector<int>> prefixes;
    for (size_t b : active) prefixes.push_back(hyps[b].prefix);
    FMat lp = next_token_logprobs(model, sub_src, sub_states, prefixes);
    for (size_t i = 0; i < active.size(); ++i) {
      Hypothesis& hyp = hyps[active[i]];
      Eigen::RowVectorXf row = lp.row(static_cast<Eigen::Index>(i));
      row(Vocabulary::kPad) = -std::numeric_limits<float>::infinity();
      row(Vocabulary::kBos) = -std::numeric_limits<float>::infinity();
      Eigen::Index best = 0;
      row.maxCoeff(&best);
      hyp.logprob += row(best);
      if (best == Vocabulary::kEos) {
        hyp.done = true;
      } else {
        hyp.prefix.push_back(static_cast<int>(best));
        if (static_cast<int>(hyp.prefix.size()) - 1 >= opts.max_len) {
          hyp.done = true;
          hyp.truncated = true;
        }
      }
    }
  }
  std::vector<DecodeResult> out;
  for (Hypothesis& hyp : hyps) {
    if (!hyp.done) hyp.truncated = true;
    out.push_back(finish(model, hyp, opts.length_norm));
  }
  return out;
}

/// Length-normalized beam search over a single sentence. The greedy
/// hypothesis is scored as well and returned when it beats the beam, so the
/// returned score is never below greedy's.
DecodeResult beam_generate(Model& model, const Batch& src, const FMat& states,
                           const DecodeOptions& opts) {
  std::vector<Hypothesis> beam{Hypothesis{}};
  std::vector<Hypothesis> finished;
  for (int step = 0; step < opts.max_len && !beam.empty(); ++step) {
    std::vector<size_t> tile(beam.size(), 0);
    Batch sub_src = subset_batch(src, tile);
    FMat sub_states = subset_states(states, src.len, tile);
    std::vector<std::vector<int>> prefixes;
    for (const Hypothesis& hyp : beam) prefixes.push_back(hyp.prefix);
    FMat lp = next_token_logprobs(model, sub_src, sub_states, prefixes);

    struct Candidate {
      size_t hyp;
      int token;
      double logprob;
    };
    std::vector<Candidate> candidates;
    for (size_t h = 0; h < beam.size(); ++h)
      for (Eigen::Index v = 0; v < lp.cols(); ++v) {
        if (v == Vocabulary::kPad || v == Vocabulary::kBos) continue;
        candidates.push_back(
            {h, static_cast<int>(v), beam[h].logprob + lp(static_cast<Eigen::Index>(h), v)});
      }
    size_t keep = std::min<size_t>(static_cast<size_t>(opts.beam_width),
                                   candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        return a.logprob > b.logprob;
                      });
    std::vector<Hypothesis> next;
    for (size_t c = 0; c < keep; ++c) {
      Hypothesis hyp = beam[candidates[c].hyp];
      hyp.logprob = candidates[c].logprob;
      if (candidates[c].token == Vocabulary::kEos) {
        hyp.done = true;
        finished.push_back(hyp);
      } else {
        hyp.prefix.push_back(candidates[c].token);
        next.push_back(hyp);
      }
    }
    beam = std::move(next);
  }
  for (Hypothesis& hyp : beam) {  // ran out of steps
    hyp.done = true;
    hyp.truncated = true;
    finished.push_back(hyp);
  }
  DecodeResult best;
  bool have = false;
  for (const Hypothesis& hyp : finished) {
    DecodeResult r = finish(model, hyp, opts.length_norm);
    if (!have || r.score > best.score) {
      best = r;
      have = true;
    }
  }
  DecodeOptions greedy_opts = opts;
  greedy_opts.mode = "greedy";
  DecodeResult greedy = greedy_generate(model, src, states, greedy_opts)[0];
  if (!have || greedy.score > best.score) best = greedy;
  return best;
}

std::vector<DecodeResult> decode_batch(Model& model, const Batch& src,
                                       const ContextBatch* ctx,
                                       const DecodeOptions& opts) {
  FMat states = compute_states(model, src, ctx);
  if (opts.mode == "greedy") return greedy_generate(model, src, states, opts);
  // beam decodes sentence by sentence
  std::vector<DecodeResult> out;
  for (Eigen::Index b = 0; b < src.size; ++b) {
    std::vector<size_t> one{static_cast<size_t>(b)};
    Batch single = subset_batch(src, one);
    FMat single_states = subset_states(states, src.len, one);
    out.push_back(beam_generate(model, single, single_states, opts));
  }
  return out;
}

}  // namespace

void DecodeOptions::validate() const {
  if (mode != "greedy" && mode != "beam")
    throw ConfigError("decode mode must be greedy or beam, got '" + mode + "'");
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (length_norm < 0.0) throw ConfigError("length norm must be >= 0");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (batch_size < 1) throw ConfigError("decode batch size must be >= 1");
}

std::vector<DecodeResult> decode_sentences(Model& model,
                                           const std::vector<std::vector<int>>& sources,
                                           const DecodeOptions& opts) {
  opts.validate();
  std::vector<DecodeResult> out;
  for (size_t start = 0; start < sources.size();
       start += static_cast<size_t>(opts.batch_size)) {
    size_t end = std::min(sources.size(), start + static_cast<size_t>(opts.batch_size));
    std::vector<std::vector<int>> chunk(sources.begin() + static_cast<long>(start),
                                        sources.begin() + static_cast<long>(end));
    Batch src = Batch::pad(chunk);
    for (DecodeResult& r : decode_batch(model, src, nullptr, opts))
      out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::vector<DecodeResult>> decode_documents(
    Model& model, const std::vector<std::vector<std::vector<int>>>& documents,
    const ContextSpec& decode_spec, const DecodeOptions& opts) {
  opts.validate();
  if (model.stage == "baseline") {
    if (!decode_spec.empty())
      throw ConfigError("baseline model cannot decode with context spec " +
                        decode_spec.str());
  } else if (!decode_spec.subset_of(model.trained_spec)) {
    throw ConfigError("decode context spec " + decode_spec.str() +
                      " is not a subset of the trained spec " +
                      model.trained_spec.str());
  }

  std::vector<std::pair<size_t, size_t>> samples;
  for (size_t d = 0; d < documents.size(); ++d)
    for (size_t i = 0; i < documents[d].size(); ++i) samples.emplace_back(d, i);

  std::vector<std::vector<DecodeResult>> out(documents.size());
  for (size_t d = 0; d < documents.size(); ++d)
    out[d].resize(documents[d].size());

  std::vector<const std::vector<std::vector<int>>*> doc_ptrs;
  for (const auto& doc : documents) doc_ptrs.push_back(&doc);

  for (size_t start = 0; start < samples.size();
       start += static_cast<size_t>(opts.batch_size)) {
    size_t end = std::min(samples.size(), start + static_cast<size_t>(opts.batch_size));
    std::vector<std::pair<size_t, size_t>> chunk(
        samples.begin() + static_cast<long>(start),
        samples.begin() + static_cast<long>(end));
    std::vector<std::vector<int>> seqs;
    for (const auto& [d, i] : chunk) seqs.push_back(documents[d][i]);
    Batch src = Batch::pad(seqs);
    std::vector<DecodeResult> results;
    if (decode_spec.empty()) {
      results = decode_batch(model, src, nullptr, opts);
    } else {
      ContextBatch ctx = build_context_batch(doc_ptrs, chunk, decode_spec);
      results = decode_batch(model, src, &ctx, opts);
    }
    for (size_t i = 0; i < chunk.size(); ++i)
      out[chunk[i].first][chunk[i].second] = std::move(results[i]);
  }
  return out;
}

}  // namespace docmt
