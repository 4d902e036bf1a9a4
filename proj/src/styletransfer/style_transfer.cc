#include "cbert/styletransfer/style_transfer.h"

#include <algorithm>
#include <numeric>

#include "cbert/augment/augment.h"
#include "cbert/common/errors.h"
#include "cbert/training/masking.h"

namespace cbert::style {

AttributionScores attribute_words(const clf::Classifier& classifier, const LabeledExample& example) {
  if (example.label < 0 || example.label >= classifier.num_labels) {
    throw IndexError("attribute_words: label " + std::to_string(example.label) + " outside the classifier's " +
                     std::to_string(classifier.num_labels) + " labels");
  }
  AttributionScores out;
  std::vector<std::vector<int>> rows{example.tokens};
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    if (text::is_special_id(example.tokens[i])) continue;
    out.positions.push_back(i);
    std::vector<int> without = example.tokens;
    without.erase(without.begin() + static_cast<std::ptrdiff_t>(i));
    // A one-word sentence is compared against CLS alone.
    if (without.empty()) without.push_back(text::kClsId);
    rows.push_back(std::move(without));
  }
  if (out.positions.empty()) return out;
  const auto probs = clf::predict_proba(classifier, rows);
  const auto label = static_cast<std::size_t>(example.label);
  for (std::size_t r = 1; r < probs.size(); ++r) out.scores.push_back(probs[0][label] - probs[r][label]);
  return out;
}

TransferResult transfer_style(const model::Encoder& encoder, const clf::Classifier& classifier,
                              const LabeledExample& example, int target_label, std::size_t top_m) {
  if (top_m == 0) throw ParameterError("transfer_style: top_m must be >= 1");
  if (target_label == example.label) throw ParameterError("transfer_style: target label equals the source label");
  if (target_label < 0 || static_cast<std::size_t>(target_label) >= encoder.config.num_conditions) {
    throw IndexError("transfer_style: target label " + std::to_string(target_label) + " has no condition row");
  }
  TransferResult out{example, {}, {}};
  out.example.label = target_label;

  const AttributionScores attr = attribute_words(classifier, example);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < attr.positions.size(); ++i) {
    if (train::is_maskable(example.tokens[attr.positions[i]])) order.push_back(i);
  }
  if (order.empty()) {
    out.warnings.push_back("transfer_style: no maskable tokens; sentence left unchanged");
    return out;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return attr.scores[a] > attr.scores[b]; });
  std::size_t m = top_m;
  if (m > order.size()) {
    out.warnings.push_back("transfer_style: top_m " + std::to_string(top_m) + " clamped to " +
                           std::to_string(order.size()) + " maskable tokens");
    m = order.size();
  }
  for (std::size_t i = 0; i < m; ++i) out.positions.push_back(attr.positions[order[i]]);
  std::sort(out.positions.begin(), out.positions.end());

  const auto rows = model::mlm_distribution(encoder, example.tokens, out.positions, target_label);
  aug::AugmentationPolicy greedy;
  greedy.sampler = aug::Sampler::greedy;
  greedy.exclude_original = true;
  Rng unused(0);
  for (std::size_t i = 0; i < out.positions.size(); ++i) {
    const std::size_t pos = out.positions[i];
    out.example.tokens[pos] = aug::sample_candidate(rows[i], example.tokens[pos], greedy, unused);
  }
  return out;
}

std::string render_pairs(const std::vector<StylePair>& pairs) {
  std::string out = std::string(kPairsFormatTag) + "\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out += "\n";
    out += "Original:\t" + pairs[i].original + "\n";
    out += "Generated:\t" + pairs[i].generated + "\n";
  }
  return out;
}

}  // namespace cbert::style
