#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cbert/augment/augment.h"
#include "cbert/classify/classifier.h"
#include "cbert/model/encoder.h"

namespace cbert::clf {

// Augmenter arms, in table order.
inline const std::vector<std::string>& known_arms() {
  static const std::vector<std::string> arms{"none", "synonym", "bert", "cbert"};
  return arms;
}

struct ExperimentInputs {
  const Dataset* dataset = nullptr;  // needs train, val and test examples
  const model::Encoder* conditional = nullptr;    // for "cbert"
  const model::Encoder* unconditional = nullptr;  // for "bert"
  const aug::BoundSynonyms* synonyms = nullptr;   // for "synonym"
  aug::AugmentationPolicy policy;
  ClassifierKind kind = ClassifierKind::cnn;
  CnnConfig cnn;
  RnnConfig rnn;
  std::size_t cv_folds = 0;  // 0 or 1: the dataset's own splits
};

struct ArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t skipped = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool operator==(const ArmResult&) const = default;
};

struct ComparisonTable {
  static constexpr const char* kFormat = "cbert-comparison/1";
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  std::vector<ArmResult> rows;  // arm-major, then seed, then fold

  // Mean test accuracy of an arm over all its rows.
  double mean(const std::string& arm) const;
  std::string render_text() const;
  // Format-tag line, then one JSON object per row.
  std::string render_records() const;
};

// Ten-fold style partition: fold f of k becomes the test split, a seeded
// slice of the remainder becomes val, the rest train.
Dataset cross_validation_fold(const Dataset& dataset, std::size_t fold, std::size_t folds, std::uint64_t seed);

// For every seed: each arm augments the training split with augmentation
// seed derived from (seed, "augment"), then trains the classifier with the
// same seed, so the arms differ only in their augmented data.
ComparisonTable ab_experiment(const ExperimentInputs& inputs, const std::vector<std::string>& arms,
                              const std::vector<std::uint64_t>& seeds);

}  // namespace cbert::clf
