#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "docmt/error.hpp"
#include "docmt/params.hpp"
#include "docmt/rng.hpp"
#include "docmt/tensor.hpp"
#include "docmt/vocab.hpp"

namespace docmt {

struct TransformerConfig {
  int num_layers = 4;
  int model_dim = 512;
  int num_heads = 8;
  int ffn_dim = 2048;
  int max_positions = 256;
  double dropout = 0.1;
  double label_smoothing = 0.0;
  bool shared_embeddings = true;

  void validate() const {
    if (num_layers < 1) throw ConfigError("config: num_layers must be >= 1");
    if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0)
      throw ConfigError("config: model_dim " + std::to_string(model_dim) +
                        " must be a positive multiple of num_heads " +
                        std::to_string(num_heads));
    if (ffn_dim < 1) throw ConfigError("config: ffn_dim must be >= 1");
    if (max_positions < 2) throw ConfigError("config: max_positions must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("config: dropout must be in [0, 1)");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
      throw ConfigError("config: label_smoothing must be in [0, 1)");
  }
};

/// Named configurations: "tiny" for desk-scale experiments and tests,
/// "paper" for the full-size reference setup.
inline TransformerConfig transformer_preset(const std::string& name) {
  TransformerConfig c;
  if (name == "tiny") {
    c.num_layers = 2;
    c.model_dim = 64;
    c.num_heads = 4;
    c.ffn_dim = 256;
  } else if (name == "paper") {
    c.num_layers = 4;
    c.model_dim = 512;
    c.num_heads = 8;
    c.ffn_dim = 2048;
  } else {
    throw ConfigError("unknown model preset '" + name + "'");
  }
  return c;
}

/// A padded batch of token id sequences, flattened row-major to B*L.
struct Batch {
  std::vector<int> ids;
  std::vector<char> real;  // 1 for actual tokens, 0 for padding
  Eigen::Index size = 0;   // B
  Eigen::Index len = 0;    // L

  static Batch pad(const std::vector<std::vector<int>>& seqs) {
    Batch b;
    b.size = static_cast<Eigen::Index>(seqs.size());
    b.len = 1;
    for (const auto& s : seqs)
      b.len = std::max(b.len, static_cast<Eigen::Index>(s.size()));
    b.ids.assign(static_cast<size_t>(b.size * b.len), Vocabulary::kPad);
    b.real.assign(static_cast<size_t>(b.size * b.len), 0);
    for (Eigen::Index i = 0; i < b.size; ++i) {
      const auto& s = seqs[static_cast<size_t>(i)];
      for (size_t j = 0; j < s.size(); ++j) {
        b.ids[static_cast<size_t>(i * b.len) + j] = s[j];
        b.real[static_cast<size_t>(i * b.len) + j] = 1;
      }
    }
    return b;
  }
};

// source side appends </s>; the decoder consumes <s> + y and predicts y + </s>
inline std::vector<int> source_ids(const Vocabulary& vocab, const Sentence& s) {
  std::vector<int> ids = vocab.encode(s);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

inline std::vector<int> target_input_ids(const Vocabulary& vocab, const Sentence& s) {
  std::vector<int> ids{Vocabulary::kBos};
  for (int id : vocab.encode(s)) ids.push_back(id);
  return ids;
}

/// Gold next-token ids aligned with target_input_ids, padded with kPad
/// (which the loss ignores).
inline std::vector<int> target_output_ids(const Vocabulary& vocab, const Sentence& s,
                                          Eigen::Index padded_len) {
  std::vector<int> ids = vocab.encode(s);
  ids.push_back(Vocabulary::kEos);
  ids.resize(static_cast<size_t>(padded_len), Vocabulary::kPad);
  return ids;
}

template <typename S>
MatrixOf<S> sinusoidal_positions(Eigen::Index len, Eigen::Index dim) {
  MatrixOf<S> pe(len, dim);
  for (Eigen::Index p = 0; p < len; ++p)
    for (Eigen::Index i = 0; i < dim; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      double angle = static_cast<double>(p) / std::pow(10000.0, exponent);
      pe(p, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

// ---------------------------------------------------------------------------
// attention masks (constants, never differentiated)
// ---------------------------------------------------------------------------

/// (B*H*Lq) x Lk mask admitting only real key positions.
template <typename S>
MatrixOf<S> padding_mask(const Batch& q, const Batch& k, int heads) {
  MatrixOf<S> m(q.size * heads * q.len, k.len);
  for (Eigen::Index b = 0; b < q.size; ++b) {
    Eigen::RowVectorX<S> keys(k.len);
    for (Eigen::Index j = 0; j < k.len; ++j)
      keys(j) = k.real[static_cast<size_t>(b * k.len + j)] ? S(1) : S(0);
    for (Eigen::Index h = 0; h < heads; ++h)
      m.middleRows((b * heads + h) * q.len, q.len).rowwise() = keys;
  }
  return m;
}

/// Causal self-attention mask: key j visible to query i iff j <= i and real.
template <typename S>
MatrixOf<S> causal_mask(const Batch& batch, int heads) {
  MatrixOf<S> m = MatrixOf<S>::Zero(batch.size * heads * batch.len, batch.len);
  for (Eigen::Index b = 0; b < batch.size; ++b)
    for (Eigen::Index h = 0; h < heads; ++h)
      for (Eigen::Index i = 0; i < batch.len; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
          if (batch.real[static_cast<size_t>(b * batch.len + j)])
            m((b * heads + h) * batch.len + i, j) = S(1);
  return m;
}

// ---------------------------------------------------------------------------
// parameter initialization
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
void add_linear(ParamStore<S>& ps, const std::string& prefix, Eigen::Index in,
                Eigen::Index out, Rng& rng, double gain = 1.0) {
  MatrixOf<S> w(in, out);
  xavier_fill(w, rng, gain);
  ps.add(prefix + ".w", std::move(w));
  ps.add(prefix + ".b", 1, out);
}

template <typename S>
void add_layer_norm(ParamStore<S>& ps, const std::string& prefix, Eigen::Index dim) {
  ps.add(prefix + ".g", MatrixOf<S>::Ones(1, dim));
  ps.add(prefix + ".b", 1, dim);
}

template <typename S>
void add_attention(ParamStore<S>& ps, const std::string& prefix, Eigen::Index dim,
                   Rng& rng, double qk_gain = 1.0) {
  add_linear(ps, prefix + ".q", dim, dim, rng, qk_gain);
  add_linear(ps, prefix + ".k", dim, dim, rng, qk_gain);
  add_linear(ps, prefix + ".v", dim, dim, rng);
  add_linear(ps, prefix + ".o", dim, dim, rng);
}

template <typename S>
void add_ffn(ParamStore<S>& ps, const std::string& prefix, Eigen::Index dim,
             Eigen::Index ffn, Rng& rng) {
  add_linear(ps, prefix + ".w1", dim, ffn, rng);
  add_linear(ps, prefix + ".w2", ffn, dim, rng);
}

}  // namespace detail

/// Creates every baseline parameter under deterministic names:
/// embed, enc.{i}.{attn,ffn,ln1,ln2}, enc.ln, dec.{i}.{self,cross,ffn,ln1..3},
/// dec.ln, and out (unless embeddings are shared).
template <typename S>
void init_transformer_params(ParamStore<S>& ps, const TransformerConfig& cfg,
                             int vocab_size, Rng& rng) {
  cfg.validate();
  if (vocab_size <= Vocabulary::kUnk)
    throw ConfigError("config: vocabulary is empty");
  Eigen::Index dim = cfg.model_dim;
  MatrixOf<S> embed(vocab_size, dim);
  xavier_fill(embed, rng);
  ps.add("embed", std::move(embed));
  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string enc = "enc." + std::to_string(l);
    detail::add_attention(ps, enc + ".attn", dim, rng);
    detail::add_ffn(ps, enc + ".ffn", dim, cfg.ffn_dim, rng);
    detail::add_layer_norm(ps, enc + ".ln1", dim);
    detail::add_layer_norm(ps, enc + ".ln2", dim);
    std::string dec = "dec." + std::to_string(l);
    detail::add_attention(ps, dec + ".self", dim, rng);
    detail::add_attention(ps, dec + ".cross", dim, rng);
    detail::add_ffn(ps, dec + ".ffn", dim, cfg.ffn_dim, rng);
    detail::add_layer_norm(ps, dec + ".ln1", dim);
    detail::add_layer_norm(ps, dec + ".ln2", dim);
    detail::add_layer_norm(ps, dec + ".ln3", dim);
  }
  detail::add_layer_norm(ps, "enc.ln", dim);
  detail::add_layer_norm(ps, "dec.ln", dim);
  if (!cfg.shared_embeddings) {
    MatrixOf<S> out(dim, vocab_size);
    xavier_fill(out, rng);
    ps.add("out.w", std::move(out));
  }
}

// ---------------------------------------------------------------------------
// forward building blocks
// ---------------------------------------------------------------------------

template <typename S>
Tensor linear(Tape<S>& tape, ParamStore<S>& ps, const std::string& prefix,
              Tensor x) {
  return add_bias(tape, matmul(tape, x, tape.leaf(ps.at(prefix + ".w"))),
                  tape.leaf(ps.at(prefix + ".b")));
}

template <typename S>
Tensor layer_norm(Tape<S>& tape, ParamStore<S>& ps, const std::string& prefix,
                  Tensor x) {
  Tensor normed = layer_norm_rows(tape, x);
  return add_bias(tape, mul_bias(tape, normed, tape.leaf(ps.at(prefix + ".g"))),
                  tape.leaf(ps.at(prefix + ".b")));
}

/// Standard multi-head attention with projections named prefix.{q,k,v,o}.
/// Appends the post-softmax weights to *probs when probs is non-null.
template <typename S>
Tensor multi_head_attention(Tape<S>& tape, ParamStore<S>& ps,
                            const std::string& prefix, Tensor queries_in,
                            Tensor keys_in, Eigen::Index batch, int heads,
                            MatrixOf<S> mask, std::vector<Tensor>* probs = nullptr) {
  Eigen::Index dk = tape.cols(queries_in) / heads;
  Tensor q = linear(tape, ps, prefix + ".q", queries_in);
  Tensor k = linear(tape, ps, prefix + ".k", keys_in);
  Tensor v = linear(tape, ps, prefix + ".v", keys_in);
  S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));
  Tensor s = attn_scores(tape, q, k, batch, heads, scale);
  Tensor p = masked_softmax_rows(tape, s, std::move(mask));
  if (probs) probs->push_back(p);
  Tensor o = attn_apply(tape, p, v, batch, heads);
  return linear(tape, ps, prefix + ".o", o);
}

template <typename S>
Tensor feed_forward(Tape<S>& tape, ParamStore<S>& ps, const std::string& prefix,
                    Tensor x) {
  return linear(tape, ps, prefix + ".w2",
                relu(tape, linear(tape, ps, prefix + ".w1", x)));
}

/// Token embeddings scaled by sqrt(model_dim) plus sinusoidal positions,
/// tiled over the batch; dropout only while training.
template <typename S>
Tensor embed_sequence(Tape<S>& tape, ParamStore<S>& ps, const TransformerConfig& cfg,
                      const Batch& batch, bool train, Rng& rng) {
  if (batch.len > cfg.max_positions)
    throw ValidationError("sequence length " + std::to_string(batch.len) +
                          " exceeds max positions " +
                          std::to_string(cfg.max_positions));
  Tensor e = embedding_lookup(tape, tape.leaf(ps.at("embed")), batch.ids);
  e = scale(tape, e, static_cast<S>(std::sqrt(static_cast<double>(cfg.model_dim))));
  MatrixOf<S> pe = sinusoidal_positions<S>(batch.len, cfg.model_dim);
  MatrixOf<S> tiled(batch.size * batch.len, cfg.model_dim);
  for (Eigen::Index b = 0; b < batch.size; ++b)
    tiled.middleRows(b * batch.len, batch.len) = pe;
  Tensor x = add_const(tape, e, tiled);
  if (train) x = dropout(tape, x, cfg.dropout, rng);
  return x;
}

template <typename S>
struct ForwardTrace {
  Tensor states;                   // (B*L) x model_dim, or logits for decoder
  std::vector<Tensor> attn_probs;  // every attention distribution, in order
};

/// Pre-norm encoder stack over a padded source batch.
template <typename S>
ForwardTrace<S> encode_batch(Tape<S>& tape, ParamStore<S>& ps,
                             const TransformerConfig& cfg, const Batch& src,
                             bool train, Rng& rng) {
  ForwardTrace<S> trace;
  Tensor x = embed_sequence(tape, ps, cfg, src, train, rng);
  MatrixOf<S> mask = padding_mask<S>(src, src, cfg.num_heads);
  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string p = "enc." + std::to_string(l);
    Tensor normed = layer_norm(tape, ps, p + ".ln1", x);
    Tensor a = multi_head_attention(tape, ps, p + ".attn", normed, normed,
                                    src.size, cfg.num_heads, mask,
                                    &trace.attn_probs);
    if (train) a = dropout(tape, a, cfg.dropout, rng);
    x = add(tape, x, a);
    Tensor f = feed_forward(tape, ps, p + ".ffn",
                            layer_norm(tape, ps, p + ".ln2", x));
    if (train) f = dropout(tape, f, cfg.dropout, rng);
    x = add(tape, x, f);
  }
  trace.states = layer_norm(tape, ps, "enc.ln", x);
  return trace;
}

/// Pre-norm decoder stack producing next-token logits for every position of
/// the (padded) target input batch.
template <typename S>
ForwardTrace<S> decode_logits_batch(Tape<S>& tape, ParamStore<S>& ps,
                                    const TransformerConfig& cfg,
                                    Tensor encoder_states, const Batch& src,
                                    const Batch& tgt_in, bool train, Rng& rng) {
  ForwardTrace<S> trace;
  Tensor x = embed_sequence(tape, ps, cfg, tgt_in, train, rng);
  MatrixOf<S> self_mask = causal_mask<S>(tgt_in, cfg.num_heads);
  MatrixOf<S> cross_mask = padding_mask<S>(tgt_in, src, cfg.num_heads);
  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string p = "dec." + std::to_string(l);
    Tensor normed = layer_norm(tape, ps, p + ".ln1", x);
    Tensor a = multi_head_attention(tape, ps, p + ".self", normed, normed,
                                    tgt_in.size, cfg.num_heads, self_mask,
                                    &trace.attn_probs);
    if (train) a = dropout(tape, a, cfg.dropout, rng);
    x = add(tape, x, a);
    Tensor c = multi_head_attention(tape, ps, p + ".cross",
                                    layer_norm(tape, ps, p + ".ln2", x),
                                    encoder_states, tgt_in.size, cfg.num_heads,
                                    cross_mask, &trace.attn_probs);
    if (train) c = dropout(tape, c, cfg.dropout, rng);
    x = add(tape, x, c);
    Tensor f = feed_forward(tape, ps, p + ".ffn",
                            layer_norm(tape, ps, p + ".ln3", x));
    if (train) f = dropout(tape, f, cfg.dropout, rng);
    x = add(tape, x, f);
  }
  x = layer_norm(tape, ps, "dec.ln", x);
  if (cfg.shared_embeddings)
    trace.states = matmul(tape, x, transpose(tape, tape.leaf(ps.at("embed"))));
  else
    trace.states = matmul(tape, x, tape.leaf(ps.at("out.w")));
  return trace;
}

/// Mean cross-entropy of a source/target batch under the baseline model.
template <typename S>
Tensor transformer_loss(Tape<S>& tape, ParamStore<S>& ps,
                        const TransformerConfig& cfg, const Batch& src,
                        const Batch& tgt_in, const std::vector<int>& tgt_out,
                        bool train, Rng& rng) {
  ForwardTrace<S> enc = encode_batch(tape, ps, cfg, src, train, rng);
  ForwardTrace<S> dec = decode_logits_batch(tape, ps, cfg, enc.states, src,
                                            tgt_in, train, rng);
  return cross_entropy_mean(tape, dec.states, tgt_out, Vocabulary::kPad,
                            cfg.label_smoothing);
}

/// Contextual states for one sentence: (len x model_dim).
template <typename S>
MatrixOf<S> encode_sentence(ParamStore<S>& ps, const TransformerConfig& cfg,
                            const std::vector<int>& ids) {
  Tape<S> tape;
  Rng rng(0);
  Batch src = Batch::pad({ids});
  ForwardTrace<S> trace = encode_batch(tape, ps, cfg, src, false, rng);
  return tape.value(trace.states);
}

}  // namespace docmt
