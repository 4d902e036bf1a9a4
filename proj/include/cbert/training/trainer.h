#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cbert/model/encoder.h"
#include "cbert/numkernel/ops.h"
#include "cbert/textcodec/dataset.h"
#include "cbert/training/masking.h"
#include "json.hpp"

namespace cbert::train {

using model::Encoder;
using model::EncoderConfig;

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t patience = 3;
  double clip_norm = 1.0;  // global gradient-norm cap; 0 disables
  std::size_t val_masks = 8;  // fixed maskings of the validation split
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

struct MaskedBatch {
  model::InputBatch input;
  std::vector<int> targets;  // [B * T], kIgnoreId where nothing is predicted
};

// Masks every example with `policy`; skipped examples are left out. cond_ids
// are `cond_of(label)` broadcast over each row.
MaskedBatch make_masked_batch(const std::vector<const text::LabeledExample*>& examples, const MaskPolicy& policy,
                              std::size_t vocab_size, const std::function<int(int)>& cond_of, Rng& rng);

struct MaskedLoss {
  nk::Tensor loss;  // mean cross-entropy over target positions
  std::size_t targets = 0;
  std::size_t correct = 0;  // argmax hits, for masked accuracy
};

// The head is only evaluated on target rows.
MaskedLoss masked_lm_loss(const Encoder& encoder, const MaskedBatch& batch, bool train, Rng* rng);

// Line-oriented metrics: a format-tag record followed by one JSON object per
// (phase, epoch, split).
class MetricsLog {
 public:
  static constexpr const char* kFormat = "cbert-metrics/1";
  void add(nlohmann::json record) { records_.push_back(std::move(record)); }
  const std::vector<nlohmann::json>& records() const { return records_; }
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<nlohmann::json> records_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  bool operator==(const EpochMetrics&) const = default;
};

struct TrainResult {
  Encoder encoder;  // weights from the epoch with the lowest validation loss
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
};

// Plain MLM from a fresh initialisation; every token carries condition 0.
// When the corpus has no validation examples, early stopping watches a fixed
// masking of the training split instead.
TrainResult pretrain_mlm(const text::Dataset& corpus, const EncoderConfig& config, const MaskPolicy& policy,
                         const TrainConfig& train_cfg, MetricsLog* log = nullptr);

// Further MLM training of an existing encoder, condition 0 everywhere.
TrainResult continue_mlm(const text::Dataset& corpus, const Encoder& start, const MaskPolicy& policy,
                         const TrainConfig& train_cfg, MetricsLog* log = nullptr);

// Resizes the condition table to the dataset's label count, then trains the
// whole model on conditional MLM with each sentence's label as condition.
TrainResult finetune_cmlm(const text::Dataset& dataset, const Encoder& pretrained, const MaskPolicy& policy,
                          const TrainConfig& train_cfg, MetricsLog* log = nullptr);

}  // namespace cbert::train
