#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cbert/classify/classifier.h"
#include "cbert/model/encoder.h"
#include "cbert/textcodec/dataset.h"

namespace cbert::style {

using text::LabeledExample;

// Contribution of each regular token to the classifier's decision for the
// example's own label: p(label | sentence) - p(label | sentence without it).
struct AttributionScores {
  std::vector<std::size_t> positions;  // token positions that were scored
  std::vector<double> scores;          // parallel to positions
  std::string method = "leave-one-out";
};

AttributionScores attribute_words(const clf::Classifier& classifier, const LabeledExample& example);

struct TransferResult {
  LabeledExample example;              // rewritten, labelled target_label
  std::vector<std::size_t> positions;  // rewritten positions, ascending
  std::vector<std::string> warnings;
};

// Masks the top_m most label-relevant tokens and refills them greedily from
// the conditional model under target_label, never keeping the original word
// unless it is the only candidate. top_m is clamped to the maskable tokens.
TransferResult transfer_style(const model::Encoder& encoder, const clf::Classifier& classifier,
                              const LabeledExample& example, int target_label, std::size_t top_m = 1);

struct StylePair {
  std::string original;
  std::string generated;
};

inline constexpr const char* kPairsFormatTag = "# format: cbert-style-pairs/1";

// "Original:<TAB>..." and "Generated:<TAB>..." lines, a blank line between
// pairs, after the format tag.
std::string render_pairs(const std::vector<StylePair>& pairs);

}  // namespace cbert::style
