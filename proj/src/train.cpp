#include "docmt/train.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "docmt/bleu.hpp"
#include "docmt/error.hpp"
#include "docmt/nmt.hpp"
#include "docmt/rng.hpp"

namespace docmt {

void TrainOptions::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  adam.validate();
  dev_decode.validate();
}

namespace {

struct PreparedDoc {
  std::vector<std::vector<int>> src;  // with trailing </s>
  std::vector<Sentence> tgt;          // reference tokens for dev BLEU
};

std::vector<PreparedDoc> prepare(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<PreparedDoc> docs;
  docs.reserve(corpus.size());
  for (const ParallelDocument& pd : corpus) {
    PreparedDoc doc;
    for (size_t i = 0; i < pd.size(); ++i) {
      doc.src.push_back(source_ids(vocab, pd.source.sentences[i]));
      doc.tgt.push_back(pd.target.sentences[i]);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::pair<size_t, size_t>> all_samples(const std::vector<PreparedDoc>& docs) {
  std::vector<std::pair<size_t, size_t>> samples;
  for (size_t d = 0; d < docs.size(); ++d)
    for (size_t s = 0; s < docs[d].src.size(); ++s) samples.emplace_back(d, s);
  return samples;
}

struct BatchData {
  Batch src;
  Batch tgt_in;
  std::vector<int> tgt_out;
  ContextBatch ctx;  // unused when the context spec is empty
};

BatchData make_batch(const std::vector<PreparedDoc>& docs, const Vocabulary& vocab,
                     const std::vector<std::pair<size_t, size_t>>& samples,
                     size_t begin, size_t end, const ContextSpec& spec) {
  std::vector<std::vector<int>> src_seqs, tgt_in_seqs;
  for (size_t i = begin; i < end; ++i) {
    const auto& [d, s] = samples[i];
    src_seqs.push_back(docs[d].src[s]);
    tgt_in_seqs.push_back(target_input_ids(vocab, docs[d].tgt[s]));
  }
  BatchData data;
  data.src = Batch::pad(src_seqs);
  data.tgt_in = Batch::pad(tgt_in_seqs);
  for (size_t i = begin; i < end; ++i) {
    const auto& [d, s] = samples[i];
    std::vector<int> out = target_output_ids(vocab, docs[d].tgt[s], data.tgt_in.len);
    data.tgt_out.insert(data.tgt_out.end(), out.begin(), out.end());
  }
  if (!spec.empty()) {
    std::vector<const std::vector<std::vector<int>>*> doc_ptrs;
    for (const PreparedDoc& doc : docs) doc_ptrs.push_back(&doc.src);
    std::vector<std::pair<size_t, size_t>> slice(samples.begin() + begin,
                                                 samples.begin() + end);
    data.ctx = build_context_batch(doc_ptrs, slice, spec);
  }
  return data;
}

double dev_bleu(Model& model, const std::vector<PreparedDoc>& dev,
                const ContextSpec& spec, const DecodeOptions& opts) {
  std::vector<std::vector<std::vector<int>>> sources;
  std::vector<Sentence> references;
  for (const PreparedDoc& doc : dev) {
    sources.push_back(doc.src);
    references.insert(references.end(), doc.tgt.begin(), doc.tgt.end());
  }
  std::vector<std::vector<DecodeResult>> decoded =
      decode_documents(model, sources, spec, opts);
  std::vector<Sentence> hypotheses;
  for (const auto& doc : decoded)
    for (const DecodeResult& r : doc) hypotheses.push_back(r.tokens);
  return bleu(hypotheses, references).bleu;
}

void append_log(const std::string& path, const EpochRecord& rec, double lr) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot open training log " + path);
  nlohmann::json line{{"epoch", rec.epoch},
                      {"loss", rec.train_loss},
                      {"dev_bleu", rec.dev_bleu},
                      {"lr", lr}};
  out << line.dump() << "\n";
}

/// Shared epoch loop for both stages; the context spec decides which loss
/// graph each batch builds.
void run_training(Model& model, const std::vector<PreparedDoc>& train_docs,
                  const std::vector<PreparedDoc>& dev_docs, const ContextSpec& spec,
                  const TrainOptions& opts, TrainReport* report) {
  std::vector<std::pair<size_t, size_t>> samples = all_samples(train_docs);
  if (samples.empty()) throw ConfigError("training corpus has no sentences");

  Adam<float> adam(opts.adam);
  Rng rng(opts.seed);
  ParamStore<float> best = model.params;
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  double best_bleu = -1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    Rng order = rng.fork(static_cast<std::uint64_t>(epoch));
    order.shuffle(samples);
    Rng dropout_rng = rng.fork(0x5eed0000u + static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t begin = 0; begin < samples.size(); begin += opts.batch_size) {
      size_t end = std::min(samples.size(), begin + opts.batch_size);
      BatchData data =
          make_batch(train_docs, model.vocab, samples, begin, end, spec);
      Tape<float> tape;
      Tensor loss =
          spec.empty()
              ? transformer_loss(tape, model.params, model.config, data.src,
                                 data.tgt_in, data.tgt_out, true, dropout_rng)
              : han_loss(tape, model.params, model.config, data.src, data.ctx,
                         data.tgt_in, data.tgt_out, true, dropout_rng);
      loss_sum += static_cast<double>(tape.value(loss)(0, 0));
      ++batches;
      tape.backward(loss);
      adam.step(model.params);
      model.params.zero_grads();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.dev_bleu = dev_bleu(model, dev_docs, spec, opts.dev_decode);
    rep.history.push_back(rec);
    rep.epochs_run = epoch;
    append_log(opts.log_path, rec, opts.adam.lr);

    if (rec.dev_bleu > best_bleu + 1e-9) {
      best_bleu = rec.dev_bleu;
      rep.best_epoch = epoch;
      rep.best_dev_bleu = rec.dev_bleu;
      best = model.params;
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      rep.stopped_early = true;
      break;
    }
  }
  model.params = std::move(best);
}

}  // namespace

Model train_baseline(const Corpus& train, const Corpus& dev,
                     const TransformerConfig& cfg, const TrainOptions& opts,
                     TrainReport* report) {
  cfg.validate();
  opts.validate();
  if (train.empty()) throw ConfigError("training corpus is empty");
  if (dev.empty()) throw ConfigError("dev corpus is empty");

  std::vector<const std::vector<Sentence>*> sides;
  for (const ParallelDocument& pd : train) {
    sides.push_back(&pd.source.sentences);
    sides.push_back(&pd.target.sentences);
  }
  Model model;
  model.config = cfg;
  model.vocab = build_vocabulary(sides);
  model.stage = "baseline";
  Rng init_rng(opts.seed);
  init_transformer_params(model.params, cfg,
                          static_cast<Eigen::Index>(model.vocab.size()), init_rng);

  std::vector<PreparedDoc> train_docs = prepare(train, model.vocab);
  std::vector<PreparedDoc> dev_docs = prepare(dev, model.vocab);
  run_training(model, train_docs, dev_docs, ContextSpec{}, opts, report);
  return model;
}

Model train_han(const Model& baseline, const Corpus& train, const Corpus& dev,
                const ContextSpec& spec, const TrainOptions& opts,
                TrainReport* report) {
  opts.validate();
  spec.validate();
  if (spec.empty()) throw ConfigError("context spec for fine-tuning is empty");
  if (baseline.stage != "baseline")
    throw ConfigError("fine-tuning starts from a baseline checkpoint, got stage " +
                      baseline.stage);
  if (train.empty()) throw ConfigError("training corpus is empty");
  if (dev.empty()) throw ConfigError("dev corpus is empty");

  Model model;
  model.config = baseline.config;
  model.vocab = baseline.vocab;
  model.stage = "han";
  model.trained_spec = spec;
  Rng init_rng(opts.seed);
  model.params = init_from_baseline(
      baseline.params, baseline.config,
      static_cast<Eigen::Index>(baseline.vocab.size()), init_rng);
  model.params.at("ctx.gate.b").value.setConstant(opts.gate_start_bias);

  std::vector<PreparedDoc> train_docs = prepare(train, model.vocab);
  std::vector<PreparedDoc> dev_docs = prepare(dev, model.vocab);
  run_training(model, train_docs, dev_docs, spec, opts, report);
  return model;
}

}  // namespace docmt
