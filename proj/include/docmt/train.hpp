#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "docmt/adam.hpp"
#include "docmt/corpus.hpp"
#include "docmt/decode.hpp"
#include "docmt/han.hpp"
#include "docmt/model.hpp"

namespace docmt {

struct TrainOptions {
  int max_epochs = 30;
  int patience = 5;  // epochs without dev BLEU improvement before stopping
  int batch_size = 32;
  AdamOptions adam;
  std::uint64_t seed = 1;
  float gate_start_bias = 1.0f;  // gate bias reset at the start of stage 2
  DecodeOptions dev_decode;
  std::string log_path;  // when non-empty, appends one JSON line per epoch

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_bleu = 0.0;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_dev_bleu = 0.0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
};

/// Stage 1: sentence-level model from scratch. Builds the vocabulary from
/// the training corpus, selects the epoch with the best greedy dev BLEU.
Model train_baseline(const Corpus& train, const Corpus& dev,
                     const TransformerConfig& cfg, const TrainOptions& opts,
                     TrainReport* report = nullptr);

/// Stage 2: fine-tune a trained sentence-level model with context layers.
/// All baseline weights continue training; the gate bias restarts at
/// opts.gate_start_bias and the optimizer state is fresh.
Model train_han(const Model& baseline, const Corpus& train, const Corpus& dev,
                const ContextSpec& spec, const TrainOptions& opts,
                TrainReport* report = nullptr);

}  // namespace docmt
