#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cbert/augment/synonyms.h"
#include "cbert/model/encoder.h"
#include "cbert/textcodec/dataset.h"
#include "json.hpp"

namespace cbert::aug {

using model::Encoder;
using text::Dataset;
using text::LabeledExample;

enum class Sampler { greedy, top_k };

struct AugmentationPolicy {
  std::size_t k = 1;
  Sampler sampler = Sampler::top_k;
  std::size_t top_k = 10;
  double temperature = 1.0;
  bool exclude_original = true;
  std::size_t multiplier = 1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static AugmentationPolicy from_json(const nlohmann::json& j);
  bool operator==(const AugmentationPolicy&) const = default;
};

struct Augmentation {
  LabeledExample example;
  std::vector<std::size_t> positions;  // token positions that were rewritten
  std::size_t fallbacks = 0;           // positions where only the original remained
};

// Draws one id from a vocabulary distribution. Specials never qualify;
// `exclude` is removed too unless nothing else is left, in which case it is
// returned and `fell_back` is set.
int sample_candidate(const std::vector<double>& probs, int exclude, const AugmentationPolicy& policy, Rng& rng,
                     bool* fell_back = nullptr);

// Masks policy.k positions (drawn before anything else from `rng`) and fills
// all of them from one forward pass conditioned on `cond_id`.
std::optional<Augmentation> contextual_fill(const Encoder& encoder, const LabeledExample& example, int cond_id,
                                            const AugmentationPolicy& policy, Rng& rng);

// Conditional fill: the example's own label is the condition.
std::optional<Augmentation> augment_sentence(const Encoder& encoder, const LabeledExample& example,
                                             const AugmentationPolicy& policy, Rng& rng);
// Unconditional baseline: condition 0, the pretraining segment.
std::optional<Augmentation> bert_augment(const Encoder& unconditional, const LabeledExample& example,
                                         const AugmentationPolicy& policy, Rng& rng);
// Replaces min(k, covered) table-covered words by a uniform synonym.
std::optional<Augmentation> synonym_augment(const LabeledExample& example, const BoundSynonyms& table, std::size_t k,
                                            Rng& rng);

using Augmenter = std::function<std::optional<Augmentation>(const LabeledExample&, Rng&)>;

struct Generated {
  std::size_t source = 0;  // index of the original in the input dataset
  std::size_t pass = 0;    // 1-based multiplier pass
  std::vector<std::size_t> positions;
};

struct AugmentResult {
  Dataset dataset;                  // originals first, then generations
  std::vector<Generated> generated; // parallel to the appended examples
  std::size_t attempted = 0;
  std::size_t skipped = 0;
  std::size_t fallbacks = 0;
};

// Every training-split sentence is augmented once per pass; other splits are
// copied untouched. Sentence i in pass m draws from its own stream derived
// from (seed, m, i), so the order of work does not affect the result.
AugmentResult augment_with(const Dataset& dataset, const Augmenter& augmenter, std::size_t multiplier,
                           std::uint64_t seed);

AugmentResult augment_dataset(const Encoder& encoder, const Dataset& dataset, const AugmentationPolicy& policy);

// TSV rendering of an augmentation of `corpus` (the records `dataset` was
// built from, same order). Originals keep their text verbatim; generated
// sentences substitute the new words into the source's tokens, so words
// outside the vocabulary survive where they were not rewritten.
std::string render_augmented_tsv(const text::TsvCorpus& corpus, const text::Vocabulary& vocab, std::size_t max_len,
                                 const AugmentResult& result, const std::string& augmenter_name);

}  // namespace cbert::aug
