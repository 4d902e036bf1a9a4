#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cbert/common/rng.h"
#include "cbert/numkernel/tensor.h"
#include "cbert/textcodec/dataset.h"
#include "json.hpp"

namespace cbert::clf {

using nk::Tensor;
using text::Dataset;
using text::Split;

enum class ClassifierKind { cnn, rnn };
const char* kind_name(ClassifierKind kind);
ClassifierKind parse_kind(const std::string& name);

// Convolutions of each width over the embedded sentence, max-pooled over
// time, concatenated, then ReLU hidden layer and softmax output.
struct CnnConfig {
  std::vector<std::size_t> widths{3, 4, 5};
  std::size_t filters = 32;  // per width
  std::size_t embed = 32;
  std::size_t hidden = 32;
  double dropout = 0.5;
  double lr = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static CnnConfig from_json(const nlohmann::json& j);
  bool operator==(const CnnConfig&) const = default;
};

// Single-layer LSTM; the last real step's hidden state feeds an affine
// softmax layer.
struct RnnConfig {
  std::size_t embed = 32;
  std::size_t state = 32;
  double dropout = 0.2;
  double lr = 3e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static RnnConfig from_json(const nlohmann::json& j);
  bool operator==(const RnnConfig&) const = default;
};

struct Classifier {
  ClassifierKind kind = ClassifierKind::cnn;
  CnnConfig cnn;
  RnnConfig rnn;
  std::size_t vocab_size = 0;
  int num_labels = 0;
  std::vector<std::pair<std::string, Tensor>> params;

  const Tensor& param(const std::string& name) const;
  std::vector<Tensor> tensors() const;
  Classifier clone() const;
  double dropout() const { return kind == ClassifierKind::cnn ? cnn.dropout : rnn.dropout; }
};

Classifier init_cnn(const CnnConfig& config, std::size_t vocab_size, int num_labels, Rng& rng);
Classifier init_rnn(const RnnConfig& config, std::size_t vocab_size, int num_labels, Rng& rng);

// Logits [rows, num_labels]. Rows are right-padded internally; padding never
// changes any row's result.
Tensor classifier_logits(const Classifier& classifier, const std::vector<std::vector<int>>& rows, bool train,
                         Rng* rng);

// One LSTM step on [B, E] input with [B, S] state; exposed for testing.
struct LstmState {
  Tensor h, c;
};
LstmState lstm_step(const Classifier& classifier, const Tensor& x, const LstmState& prev);

std::vector<std::vector<double>> predict_proba(const Classifier& classifier, const std::vector<std::vector<int>>& rows);
std::vector<int> predict(const Classifier& classifier, const std::vector<std::vector<int>>& rows);

struct SplitEval {
  Split split = Split::test;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  bool operator==(const SplitEval&) const = default;
};

struct EvalReport {
  std::vector<SplitEval> splits;
  std::size_t epochs_used = 0;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;

  const SplitEval* find(Split split) const;
  nlohmann::json to_json() const;
  bool operator==(const EvalReport&) const = default;
};

// Eval mode. Empty split and vocabulary or label-count mismatch are errors.
SplitEval evaluate(const Classifier& classifier, const Dataset& dataset, Split split);

struct TrainedClassifier {
  Classifier classifier;  // weights of the best validation epoch
  EvalReport report;      // train and val, plus test when present
  std::vector<double> val_history;
};

// Adam with dropout; stops when validation accuracy has not improved for
// `patience` epochs. Requires training and validation examples.
TrainedClassifier train_cnn(const Dataset& dataset, const CnnConfig& config);
TrainedClassifier train_rnn(const Dataset& dataset, const RnnConfig& config);

// Tries every (lr, dropout) pair and keeps the best validation accuracy;
// ties go to the earlier pair.
struct GridSpec {
  std::vector<double> lrs;
  std::vector<double> dropouts;
};
TrainedClassifier train_cnn_grid(const Dataset& dataset, const CnnConfig& base, const GridSpec& grid);
TrainedClassifier train_rnn_grid(const Dataset& dataset, const RnnConfig& base, const GridSpec& grid);

void save_classifier(const Classifier& classifier, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace cbert::clf
