#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "docmt/checkpoint.hpp"
#include "docmt/error.hpp"
#include "docmt/nmt.hpp"

namespace docmt {

/// Signed sentence offsets used as context, e.g. {+1} = following sentence.
/// Empty means no context.
struct ContextSpec {
  std::vector<int> offsets;  // sorted ascending, unique, never 0

  static ContextSpec of(std::vector<int> offs) {
    ContextSpec spec;
    spec.offsets = std::move(offs);
    std::sort(spec.offsets.begin(), spec.offsets.end());
    spec.offsets.erase(std::unique(spec.offsets.begin(), spec.offsets.end()),
                       spec.offsets.end());
    spec.validate();
    return spec;
  }

  /// Accepts "" or "none" for the empty spec, else comma-separated signed
  /// integers such as "-2,-1,+1,+2".
  static ContextSpec parse(const std::string& text) {
    if (text.empty() || text == "none") return ContextSpec{};
    std::vector<int> offs;
    size_t pos = 0;
    while (pos <= text.size()) {
      size_t comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      std::string piece = text.substr(pos, comma - pos);
      try {
        size_t used = 0;
        int v = std::stoi(piece, &used);
        if (used != piece.size()) throw std::invalid_argument(piece);
        offs.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("bad context offset '" + piece + "' in '" + text + "'");
      }
      pos = comma + 1;
      if (comma == text.size()) break;
    }
    return of(std::move(offs));
  }

  void validate() const {
    for (int k : offsets)
      if (k == 0) throw ConfigError("context offset 0 is not allowed");
  }

  bool empty() const { return offsets.empty(); }
  size_t size() const { return offsets.size(); }

  bool subset_of(const ContextSpec& other) const {
    for (int k : offsets)
      if (std::find(other.offsets.begin(), other.offsets.end(), k) ==
          other.offsets.end())
        return false;
    return true;
  }

  std::string str() const {
    if (offsets.empty()) return "none";
    std::string out;
    for (size_t i = 0; i < offsets.size(); ++i) {
      if (i) out += ",";
      if (offsets[i] > 0) out += "+";
      out += std::to_string(offsets[i]);
    }
    return out;
  }
};

inline bool operator==(const ContextSpec& a, const ContextSpec& b) {
  return a.offsets == b.offsets;
}

/// One neighbor slot of one sentence: the neighbor's token ids, or absent
/// when i + offset falls outside the document.
struct ContextItem {
  bool present = false;
  std::vector<int> ids;
};

/// Neighbors of sentence i in a document given as id sequences; result is
/// aligned with spec.offsets.
inline std::vector<ContextItem> gather_context(
    const std::vector<std::vector<int>>& doc, size_t i, const ContextSpec& spec) {
  if (i >= doc.size())
    throw ValidationError("sentence index " + std::to_string(i) +
                          " outside document of " + std::to_string(doc.size()));
  std::vector<ContextItem> items;
  items.reserve(spec.size());
  for (int k : spec.offsets) {
    long j = static_cast<long>(i) + k;
    ContextItem item;
    if (j >= 0 && j < static_cast<long>(doc.size())) {
      item.present = true;
      item.ids = doc[static_cast<size_t>(j)];
    }
    items.push_back(std::move(item));
  }
  return items;
}

/// Per-offset padded neighbor batches for a batch of (document, index)
/// samples, plus the per-offset presence flags.
struct ContextBatch {
  std::vector<Batch> neighbors;            // one Batch per offset, each size B
  std::vector<std::vector<char>> present;  // [offset][sample]

  size_t num_offsets() const { return neighbors.size(); }
};

inline ContextBatch build_context_batch(
    const std::vector<const std::vector<std::vector<int>>*>& docs,
    const std::vector<std::pair<size_t, size_t>>& samples,  // (doc, sentence)
    const ContextSpec& spec) {
  ContextBatch out;
  for (size_t o = 0; o < spec.size(); ++o) {
    std::vector<std::vector<int>> seqs;
    std::vector<char> present;
    for (const auto& [d, i] : samples) {
      auto items = gather_context(*docs[d], i, spec);
      const ContextItem& item = items[o];
      present.push_back(item.present ? 1 : 0);
      seqs.push_back(item.present ? item.ids : std::vector<int>{});
    }
    out.neighbors.push_back(Batch::pad(seqs));
    out.present.push_back(std::move(present));
  }
  return out;
}

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

/// Saturates the gate so lambda rounds to exactly 1 in float32, making a
/// freshly initialized context model decode bit-identically to its baseline.
/// float32 sigmoid(x) == 1.0 for x >= 16.7; the margin above that absorbs
/// the gate projection's contribution, which stays within a few units.
constexpr double kGatePassThroughBias = 30.0;

// small query/key projections keep the initial context attention near
// uniform and the second training stage well conditioned
constexpr double kContextQkGain = 0.1;

template <typename S>
void init_context_params(ParamStore<S>& ps, const TransformerConfig& cfg, Rng& rng) {
  Eigen::Index dim = cfg.model_dim;
  detail::add_attention(ps, "ctx.word", dim, rng, kContextQkGain);
  detail::add_attention(ps, "ctx.sent", dim, rng, kContextQkGain);
  MatrixOf<S> gate(2 * dim, dim);
  xavier_fill(gate, rng);
  ps.add("ctx.gate.w", std::move(gate));
  ps.add("ctx.gate.b",
         MatrixOf<S>::Constant(1, dim, static_cast<S>(kGatePassThroughBias)));
}

/// Copies baseline parameters into a new store and adds freshly initialized
/// context parameters with the gate saturated open (pass-through).
template <typename S>
ParamStore<S> init_from_baseline(const ParamStore<S>& baseline,
                                 const TransformerConfig& cfg, int vocab_size,
                                 Rng& rng) {
  ParamStore<S> expected;
  {
    Rng throwaway(0);
    init_transformer_params(expected, cfg, vocab_size, throwaway);
  }
  std::string problems;
  for (const auto& [name, p] : expected.entries()) {
    if (!baseline.has(name)) {
      problems += " missing " + name + ";";
      continue;
    }
    const auto& found = baseline.at(name).value;
    if (found.rows() != p.value.rows() || found.cols() != p.value.cols())
      problems += " " + name + " is " + Tape<S>::shape_str(found) +
                  ", expected " + Tape<S>::shape_str(p.value) + ";";
  }
  for (const auto& [name, p] : baseline.entries())
    if (!expected.has(name)) problems += " unexpected " + name + ";";
  if (!problems.empty())
    throw CheckpointError("baseline checkpoint incompatible:" + problems);

  ParamStore<S> han;
  for (const auto& [name, p] : baseline.entries()) han.add(name, p.value);
  init_context_params(han, cfg, rng);
  return han;
}

// ---------------------------------------------------------------------------
// forward pass
// ---------------------------------------------------------------------------

template <typename S>
struct HanTrace {
  Tensor h_prime;
  std::vector<Tensor> word_probs;  // per offset: (B*H*L) x Lc
  Tensor sent_probs;               // (B*L*heads) x K; valid iff has_sent
  bool has_sent = false;
};

namespace detail {

// constant (B*L) x dim matrix whose rows are 1 where pred(sample) holds
template <typename S>
MatrixOf<S> sample_row_mask(Eigen::Index batch, Eigen::Index len, Eigen::Index dim,
                            const std::vector<char>& pred) {
  MatrixOf<S> m = MatrixOf<S>::Zero(batch * len, dim);
  for (Eigen::Index b = 0; b < batch; ++b)
    if (pred[static_cast<size_t>(b)]) m.middleRows(b * len, len).setOnes();
  return m;
}

}  // namespace detail

/// Hierarchical context integration over already-encoded neighbors.
///
/// Per source position: word-level multi-head attention into each neighbor
/// sentence gives one vector per offset; with more than one neighbor present
/// a sentence-level attention over those vectors yields the context vector,
/// with exactly one it is that vector directly. The result is gated into H.
/// Rows of samples with no present neighbor pass through unchanged, so no
/// context parameter receives gradient from them.
template <typename S>
HanTrace<S> han_encode(Tape<S>& tape, ParamStore<S>& ps,
                       const TransformerConfig& cfg, Tensor h, const Batch& src,
                       const std::vector<Tensor>& ctx_states,
                       const ContextBatch& ctx) {
  HanTrace<S> trace;
  if (ctx.num_offsets() == 0) {
    trace.h_prime = h;
    return trace;
  }
  if (ctx_states.size() != ctx.num_offsets())
    throw DimensionError("han_encode: " + std::to_string(ctx_states.size()) +
                         " context encodings for " +
                         std::to_string(ctx.num_offsets()) + " offsets");
  const Eigen::Index batch = src.size;
  const Eigen::Index len = src.len;
  const Eigen::Index dim = cfg.model_dim;
  const int heads = cfg.num_heads;
  const Eigen::Index num_offsets = static_cast<Eigen::Index>(ctx.num_offsets());

  std::vector<char> any_present(static_cast<size_t>(batch), 0);
  std::vector<int> present_count(static_cast<size_t>(batch), 0);
  for (Eigen::Index o = 0; o < num_offsets; ++o)
    for (Eigen::Index b = 0; b < batch; ++b)
      if (ctx.present[static_cast<size_t>(o)][static_cast<size_t>(b)]) {
        any_present[static_cast<size_t>(b)] = 1;
        present_count[static_cast<size_t>(b)] += 1;
      }

  // word-level attention per offset; absent neighbors are fully masked and
  // their output rows forced to exact zero (killing the projection bias)
  std::vector<Tensor> per_offset;
  for (Eigen::Index o = 0; o < num_offsets; ++o) {
    const Batch& nb = ctx.neighbors[static_cast<size_t>(o)];
    MatrixOf<S> mask = padding_mask<S>(src, nb, heads);
    Tensor word = multi_head_attention(tape, ps, "ctx.word", h,
                                       ctx_states[static_cast<size_t>(o)], batch,
                                       heads, std::move(mask), &trace.word_probs);
    word = const_mul(tape, word,
                     detail::sample_row_mask<S>(
                         batch, len, dim, ctx.present[static_cast<size_t>(o)]));
    per_offset.push_back(word);
  }

  Tensor context;
  if (num_offsets == 1) {
    context = per_offset[0];
  } else {
    // sum of per-offset vectors serves the samples with exactly one
    // present neighbor (the absent ones are zero rows)
    Tensor single = per_offset[0];
    for (Eigen::Index o = 1; o < num_offsets; ++o)
      single = add(tape, single, per_offset[static_cast<size_t>(o)]);
    std::vector<char> is_single(static_cast<size_t>(batch));
    std::vector<char> is_multi(static_cast<size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
      is_single[static_cast<size_t>(b)] = present_count[static_cast<size_t>(b)] == 1;
      is_multi[static_cast<size_t>(b)] = present_count[static_cast<size_t>(b)] >= 2;
    }
    single = const_mul(
        tape, single, detail::sample_row_mask<S>(batch, len, dim, is_single));

    // sentence-level attention over the per-offset vectors, only meaningful
    // for samples with at least two present neighbors
    Tensor sq = linear(tape, ps, "ctx.sent.q", h);
    std::vector<Tensor> keys, vals;
    for (Tensor o : per_offset) {
      keys.push_back(linear(tape, ps, "ctx.sent.k", o));
      vals.push_back(linear(tape, ps, "ctx.sent.v", o));
    }
    Eigen::Index dk = dim / heads;
    S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));
    Tensor scores = stacked_attn_scores(tape, sq, keys, heads, scale);
    MatrixOf<S> sent_mask = MatrixOf<S>::Zero(batch * len * heads, num_offsets);
    for (Eigen::Index b = 0; b < batch; ++b) {
      if (!is_multi[static_cast<size_t>(b)]) continue;
      for (Eigen::Index o = 0; o < num_offsets; ++o)
        if (ctx.present[static_cast<size_t>(o)][static_cast<size_t>(b)])
          sent_mask.block(b * len * heads, o, len * heads, 1).setOnes();
    }
    Tensor probs = masked_softmax_rows(tape, scores, std::move(sent_mask));
    trace.sent_probs = probs;
    trace.has_sent = true;
    Tensor summarized = stacked_attn_apply(tape, probs, vals, heads);
    summarized = linear(tape, ps, "ctx.sent.o", summarized);
    summarized = const_mul(
        tape, summarized, detail::sample_row_mask<S>(batch, len, dim, is_multi));
    context = add(tape, single, summarized);
  }

  // lambda = sigmoid([H; C] Wg + bg); H' = lambda*H + (1-lambda)*C
  Tensor gate_in = concat_cols(tape, h, context);
  Tensor lambda = sigmoid(
      tape, add_bias(tape, matmul(tape, gate_in, tape.leaf(ps.at("ctx.gate.w"))),
                     tape.leaf(ps.at("ctx.gate.b"))));
  Tensor gated = add(tape, mul(tape, lambda, h),
                     mul(tape, affine(tape, lambda, S(-1), S(1)), context));

  // rows without any neighbor bypass the gate entirely
  bool all_present = true, none_present = true;
  for (char p : any_present) {
    all_present = all_present && p;
    none_present = none_present && !p;
  }
  if (none_present) {
    trace.h_prime = h;
  } else if (all_present) {
    trace.h_prime = gated;
  } else {
    std::vector<char> absent(static_cast<size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b)
      absent[static_cast<size_t>(b)] = !any_present[static_cast<size_t>(b)];
    Tensor kept = const_mul(
        tape, gated, detail::sample_row_mask<S>(batch, len, dim, any_present));
    Tensor passed = const_mul(
        tape, h, detail::sample_row_mask<S>(batch, len, dim, absent));
    trace.h_prime = add(tape, kept, passed);
  }
  return trace;
}

/// Full context-model loss for one batch: encode source and neighbors with
/// the shared encoder, integrate context, decode, cross-entropy.
template <typename S>
Tensor han_loss(Tape<S>& tape, ParamStore<S>& ps, const TransformerConfig& cfg,
                const Batch& src, const ContextBatch& ctx, const Batch& tgt_in,
                const std::vector<int>& tgt_out, bool train, Rng& rng) {
  ForwardTrace<S> enc = encode_batch(tape, ps, cfg, src, train, rng);
  std::vector<Tensor> ctx_states;
  for (const Batch& nb : ctx.neighbors)
    ctx_states.push_back(encode_batch(tape, ps, cfg, nb, train, rng).states);
  HanTrace<S> han = han_encode(tape, ps, cfg, enc.states, src, ctx_states, ctx);
  ForwardTrace<S> dec = decode_logits_batch(tape, ps, cfg, han.h_prime, src,
                                            tgt_in, train, rng);
  return cross_entropy_mean(tape, dec.states, tgt_out, Vocabulary::kPad,
                            cfg.label_smoothing);
}

/// Word-level context attention between one source sentence and one context
/// sentence, averaged over heads: (src_len x ctx_len), rows sum to 1.
template <typename S>
MatrixOf<S> attention_map(ParamStore<S>& ps, const TransformerConfig& cfg,
                          const std::vector<int>& src_ids,
                          const std::vector<int>& ctx_ids) {
  if (src_ids.empty() || ctx_ids.empty())
    throw ValidationError("attention_map: empty sentence");
  Tape<S> tape;
  Rng rng(0);
  Batch src = Batch::pad({src_ids});
  Batch nb = Batch::pad({ctx_ids});
  Tensor h = encode_batch(tape, ps, cfg, src, false, rng).states;
  Tensor c = encode_batch(tape, ps, cfg, nb, false, rng).states;
  std::vector<Tensor> probs;
  MatrixOf<S> mask = padding_mask<S>(src, nb, cfg.num_heads);
  multi_head_attention(tape, ps, "ctx.word", h, c, 1, cfg.num_heads,
                       std::move(mask), &probs);
  const auto& p = tape.value(probs[0]);  // (heads * src_len) x ctx_len
  MatrixOf<S> map = MatrixOf<S>::Zero(src.len, nb.len);
  for (int head = 0; head < cfg.num_heads; ++head)
    map += p.middleRows(head * src.len, src.len);
  map /= static_cast<S>(cfg.num_heads);
  return map;
}

}  // namespace docmt
