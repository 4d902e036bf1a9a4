#include "cbert/training/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbert/common/errors.h"
#include "cbert/numkernel/adam.h"
#include "cbert/numkernel/checkpoint.h"

namespace cbert::train {
namespace {

using text::Dataset;
using text::LabeledExample;
using text::Split;

std::vector<std::vector<const LabeledExample*>> chunk(const Dataset& data, const std::vector<std::size_t>& order,
                                                      std::size_t batch_size) {
  std::vector<std::vector<const LabeledExample*>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<const LabeledExample*> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      batch.push_back(&data.examples[order[i]]);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

struct Totals {
  double loss_sum = 0.0;
  std::size_t targets = 0;
  std::size_t correct = 0;

  void add(const MaskedLoss& l) {
    loss_sum += l.loss.item() * static_cast<double>(l.targets);
    targets += l.targets;
    correct += l.correct;
  }
  double mean() const { return targets == 0 ? 0.0 : loss_sum / static_cast<double>(targets); }
  double accuracy() const { return targets == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(targets); }
};

TrainResult train_loop(Encoder encoder, const Dataset& data, const std::function<int(int)>& cond_of,
                       const MaskPolicy& policy, const TrainConfig& cfg, MetricsLog* log, const std::string& phase) {
  cfg.validate();
  policy.validate();
  const std::vector<std::size_t> train_idx = data.indices(Split::train);
  if (train_idx.empty()) throw ParameterError(phase + ": dataset has no training examples");
  std::vector<std::size_t> val_idx = data.indices(Split::val);
  const bool val_is_train = val_idx.empty();
  if (val_is_train) val_idx = train_idx;

  const std::size_t vocab = encoder.config.vocab_size;
  Rng val_rng = derive_rng(cfg.seed, "val-mask");
  std::vector<MaskedBatch> val_batches;
  // Several fixed maskings of the split, so one unlucky draw does not
  // decide early stopping.
  for (std::size_t r = 0; r < cfg.val_masks; ++r) {
    for (const auto& rows : chunk(data, val_idx, cfg.batch_size)) {
      MaskedBatch b = make_masked_batch(rows, policy, vocab, cond_of, val_rng);
      if (b.input.batch > 0) val_batches.push_back(std::move(b));
    }
  }

  nk::Adam optimizer(encoder.params.all(), cfg.lr);
  std::vector<nk::Tensor> params = encoder.params.all();
  TrainResult result{encoder.clone(), {}, 0};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    Rng shuffle_rng = derive_rng(cfg.seed, "shuffle", epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    Rng mask_rng = derive_rng(cfg.seed, "mask", epoch);
    Rng drop_rng = derive_rng(cfg.seed, "dropout", epoch);

    Totals train_totals;
    for (const auto& rows : chunk(data, order, cfg.batch_size)) {
      MaskedBatch batch = make_masked_batch(rows, policy, vocab, cond_of, mask_rng);
      if (batch.input.batch == 0) continue;
      MaskedLoss loss = masked_lm_loss(encoder, batch, true, &drop_rng);
      ++step;
      if (loss.targets == 0) continue;
      if (!std::isfinite(loss.loss.item())) {
        throw TrainingError(phase + ": non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step));
      }
      optimizer.zero_grad();
      loss.loss.backward();
      if (cfg.clip_norm > 0.0) nk::clip_grad_norm(params, cfg.clip_norm);
      optimizer.step();
      train_totals.add(loss);
    }

    Totals val_totals;
    for (const MaskedBatch& batch : val_batches) val_totals.add(masked_lm_loss(encoder, batch, false, nullptr));
    if (!std::isfinite(val_totals.mean())) {
      throw TrainingError(phase + ": non-finite validation loss after epoch " + std::to_string(epoch));
    }
    EpochMetrics m{epoch, train_totals.mean(), val_totals.mean(), val_totals.accuracy()};
    result.history.push_back(m);
    if (log != nullptr) {
      log->add({{"phase", phase}, {"epoch", epoch}, {"split", "train"}, {"loss", m.train_loss},
                {"masked_accuracy", train_totals.accuracy()}, {"targets", train_totals.targets}});
      log->add({{"phase", phase}, {"epoch", epoch}, {"split", val_is_train ? "train-fixed" : "val"},
                {"loss", m.val_loss}, {"masked_accuracy", m.val_accuracy}, {"targets", val_totals.targets}});
    }
    if (m.val_loss < best) {
      best = m.val_loss;
      result.encoder = encoder.clone();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1 || epochs > 50) throw ParameterError("train config: epochs must lie in [1, 50], got " + std::to_string(epochs));
  if (batch_size == 0) throw ParameterError("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ParameterError("train config: lr must be positive");
  if (patience == 0) throw ParameterError("train config: patience must be >= 1");
  if (!(clip_norm >= 0.0)) throw ParameterError("train config: clip_norm must be >= 0");
  if (val_masks == 0) throw ParameterError("train config: val_masks must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr},
          {"patience", patience}, {"clip_norm", clip_norm}, {"val_masks", val_masks}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.patience = j.value("patience", c.patience);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.val_masks = j.value("val_masks", c.val_masks);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

MaskedBatch make_masked_batch(const std::vector<const LabeledExample*>& examples, const MaskPolicy& policy,
                              std::size_t vocab_size, const std::function<int(int)>& cond_of, Rng& rng) {
  std::vector<std::vector<int>> rows;
  std::vector<std::vector<int>> targets;
  std::vector<int> conds;
  for (const LabeledExample* ex : examples) {
    auto masked = mask_tokens(ex->tokens, policy, vocab_size, rng);
    if (!masked) continue;
    rows.push_back(std::move(masked->tokens));
    targets.push_back(std::move(masked->targets));
    conds.push_back(cond_of(ex->label));
  }
  MaskedBatch out;
  if (rows.empty()) return out;
  out.input = model::InputBatch::pack(rows, conds);
  out.targets.assign(out.input.batch * out.input.length, kIgnoreId);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    std::copy(targets[r].begin(), targets[r].end(), out.targets.begin() + static_cast<std::ptrdiff_t>(r * out.input.length));
  }
  return out;
}

MaskedLoss masked_lm_loss(const Encoder& encoder, const MaskedBatch& batch, bool train, Rng* rng) {
  std::vector<int> rows;
  std::vector<int> compact;
  for (std::size_t i = 0; i < batch.targets.size(); ++i) {
    if (batch.targets[i] == kIgnoreId) continue;
    rows.push_back(static_cast<int>(i));
    compact.push_back(batch.targets[i]);
  }
  MaskedLoss out;
  if (rows.empty()) {
    out.loss = nk::Tensor::scalar(0.0);
    return out;
  }
  nk::Tensor hidden = model::encode_hidden(encoder, batch.input, train, rng);
  nk::Tensor flat = nk::reshape(hidden, {batch.targets.size(), encoder.config.hidden});
  nk::Tensor logits = model::mlm_head(encoder, nk::embedding_lookup(flat, rows));
  auto ce = nk::cross_entropy(logits, compact, kIgnoreId);
  out.loss = ce.loss;
  out.targets = ce.count;
  const std::size_t v = encoder.config.vocab_size;
  auto data = logits.data();
  for (std::size_t r = 0; r < compact.size(); ++r) {
    auto first = data.begin() + static_cast<std::ptrdiff_t>(r * v);
    const auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(v)) - first;
    if (best == compact[r]) ++out.correct;
  }
  return out;
}

std::string MetricsLog::serialize() const {
  std::string out = nlohmann::json{{"format", kFormat}}.dump() + "\n";
  for (const auto& r : records_) out += r.dump() + "\n";
  return out;
}

void MetricsLog::save(const std::filesystem::path& path) const { nk::write_file_bytes(path, serialize()); }

TrainResult pretrain_mlm(const Dataset& corpus, const EncoderConfig& config, const MaskPolicy& policy,
                         const TrainConfig& train_cfg, MetricsLog* log) {
  train_cfg.validate();
  EncoderConfig cfg = config;
  if (cfg.vocab_size == 0) cfg.vocab_size = corpus.vocab_size;
  if (corpus.vocab_size != 0 && cfg.vocab_size != corpus.vocab_size) {
    throw ParameterError("pretrain: encoder vocab_size " + std::to_string(cfg.vocab_size) +
                         " differs from the corpus vocabulary of " + std::to_string(corpus.vocab_size));
  }
  if (corpus.size() == 0) throw ParameterError("pretrain: corpus is empty");
  Rng init_rng = derive_rng(train_cfg.seed, "init");
  Encoder encoder = model::init_encoder(cfg, init_rng);
  return train_loop(std::move(encoder), corpus, [](int) { return 0; }, policy, train_cfg, log, "pretrain");
}

TrainResult continue_mlm(const Dataset& corpus, const Encoder& start, const MaskPolicy& policy,
                         const TrainConfig& train_cfg, MetricsLog* log) {
  return train_loop(start.clone(), corpus, [](int) { return 0; }, policy, train_cfg, log, "mlm");
}

TrainResult finetune_cmlm(const Dataset& dataset, const Encoder& pretrained, const MaskPolicy& policy,
                          const TrainConfig& train_cfg, MetricsLog* log) {
  train_cfg.validate();
  if (dataset.num_labels < 1) throw ParameterError("finetune: dataset has no labels");
  dataset.validate();
  Rng table_rng = derive_rng(train_cfg.seed, "cond-table");
  Encoder encoder = model::swap_condition_table(pretrained, static_cast<std::size_t>(dataset.num_labels), table_rng);
  return train_loop(std::move(encoder), dataset, [](int label) { return label; }, policy, train_cfg, log, "finetune");
}

}  // namespace cbert::train
