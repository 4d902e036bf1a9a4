#include "cbert/augment/augment.h"

#include <algorithm>
#include <cmath>

#include "cbert/common/errors.h"
#include "cbert/textcodec/tokenizer.h"
#include "cbert/textcodec/vocabulary.h"
#include "cbert/training/masking.h"

namespace cbert::aug {
namespace {

std::string sampler_name(Sampler s) { return s == Sampler::greedy ? "greedy" : "top_k"; }

std::string join_positions(const std::vector<std::size_t>& positions) {
  std::string out;
  for (std::size_t i = 0; i < positions.size(); ++i) out += (i ? "," : "") + std::to_string(positions[i]);
  return out;
}

}  // namespace

void AugmentationPolicy::validate() const {
  if (k == 0) throw ParameterError("augmentation policy: k must be >= 1");
  if (top_k == 0) throw ParameterError("augmentation policy: top_k must be >= 1");
  if (!(temperature > 0.0)) throw ParameterError("augmentation policy: temperature must be positive");
  if (multiplier == 0) throw ParameterError("augmentation policy: multiplier must be >= 1");
}

nlohmann::json AugmentationPolicy::to_json() const {
  return {{"k", k},
          {"sampler", sampler_name(sampler)},
          {"top_k", top_k},
          {"temperature", temperature},
          {"exclude_original", exclude_original},
          {"multiplier", multiplier},
          {"seed", seed}};
}

AugmentationPolicy AugmentationPolicy::from_json(const nlohmann::json& j) {
  AugmentationPolicy p;
  try {
    p.k = j.value("k", p.k);
    const std::string sampler = j.value("sampler", sampler_name(p.sampler));
    if (sampler == "greedy") {
      p.sampler = Sampler::greedy;
    } else if (sampler == "top_k") {
      p.sampler = Sampler::top_k;
    } else {
      throw ConfigError("augmentation policy: unknown sampler '" + sampler + "'");
    }
    p.top_k = j.value("top_k", p.top_k);
    p.temperature = j.value("temperature", p.temperature);
    p.exclude_original = j.value("exclude_original", p.exclude_original);
    p.multiplier = j.value("multiplier", p.multiplier);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("augmentation policy: ") + e.what());
  }
  p.validate();
  return p;
}

int sample_candidate(const std::vector<double>& probs, int exclude, const AugmentationPolicy& policy, Rng& rng,
                     bool* fell_back) {
  std::vector<int> candidates;
  for (int id = text::kNumSpecials; id < static_cast<int>(probs.size()); ++id) {
    if (!(policy.exclude_original && id == exclude)) candidates.push_back(id);
  }
  if (fell_back != nullptr) *fell_back = false;
  if (candidates.empty()) {
    if (exclude < text::kNumSpecials || exclude >= static_cast<int>(probs.size())) {
      throw ParameterError("sample_candidate: vocabulary has no regular tokens");
    }
    if (fell_back != nullptr) *fell_back = true;
    return exclude;
  }
  // Highest probability first, lower id on ties.
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  if (policy.sampler == Sampler::greedy) return candidates.front();

  candidates.resize(std::min(candidates.size(), policy.top_k));
  const double top = probs[candidates.front()];
  if (!(top > 0.0)) return candidates.front();
  std::vector<double> weights;
  double total = 0.0;
  for (int id : candidates) {
    const double w = probs[id] > 0.0 ? std::exp((std::log(probs[id]) - std::log(top)) / policy.temperature) : 0.0;
    weights.push_back(w);
    total += w;
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (u < weights[i]) return candidates[i];
    u -= weights[i];
  }
  return candidates.back();
}

std::optional<Augmentation> contextual_fill(const Encoder& encoder, const LabeledExample& example, int cond_id,
                                            const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  auto positions = train::select_positions(example.tokens, train::MaskPolicy::fixed_k(policy.k), rng);
  if (!positions) return std::nullopt;
  const auto rows = model::mlm_distribution(encoder, example.tokens, *positions, cond_id);
  Augmentation out{example, *positions, 0};
  for (std::size_t i = 0; i < positions->size(); ++i) {
    const std::size_t pos = (*positions)[i];
    bool fell_back = false;
    out.example.tokens[pos] = sample_candidate(rows[i], example.tokens[pos], policy, rng, &fell_back);
    if (fell_back) ++out.fallbacks;
  }
  return out;
}

std::optional<Augmentation> augment_sentence(const Encoder& encoder, const LabeledExample& example,
                                             const AugmentationPolicy& policy, Rng& rng) {
  return contextual_fill(encoder, example, example.label, policy, rng);
}

std::optional<Augmentation> bert_augment(const Encoder& unconditional, const LabeledExample& example,
                                         const AugmentationPolicy& policy, Rng& rng) {
  return contextual_fill(unconditional, example, 0, policy, rng);
}

std::optional<Augmentation> synonym_augment(const LabeledExample& example, const BoundSynonyms& table, std::size_t k,
                                            Rng& rng) {
  if (k == 0) throw ParameterError("synonym_augment: k must be >= 1");
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < example.tokens.size(); ++i) {
    if (!text::is_special_id(example.tokens[i]) && table.by_id.contains(example.tokens[i])) covered.push_back(i);
  }
  if (covered.empty()) return std::nullopt;
  const std::size_t count = std::min(k, covered.size());
  for (std::size_t i = 0; i < count; ++i) std::swap(covered[i], covered[i + rng.uniform_index(covered.size() - i)]);
  covered.resize(count);
  std::sort(covered.begin(), covered.end());
  Augmentation out{example, covered, 0};
  for (std::size_t pos : covered) {
    const auto& options = table.by_id.at(example.tokens[pos]);
    out.example.tokens[pos] = options[rng.uniform_index(options.size())];
  }
  return out;
}

AugmentResult augment_with(const Dataset& dataset, const Augmenter& augmenter, std::size_t multiplier,
                           std::uint64_t seed) {
  if (multiplier == 0) throw ParameterError("augment: multiplier must be >= 1");
  AugmentResult result;
  result.dataset = dataset;
  const auto train = dataset.indices(text::Split::train);
  for (std::size_t pass = 1; pass <= multiplier; ++pass) {
    const std::string stream = "augment-pass-" + std::to_string(pass);
    for (std::size_t i : train) {
      Rng rng = derive_rng(seed, stream, i);
      ++result.attempted;
      auto generated = augmenter(dataset.examples[i], rng);
      if (!generated) {
        ++result.skipped;
        continue;
      }
      result.fallbacks += generated->fallbacks;
      result.dataset.push_back(std::move(generated->example), text::Split::train);
      result.generated.push_back({i, pass, std::move(generated->positions)});
    }
  }
  return result;
}

AugmentResult augment_dataset(const Encoder& encoder, const Dataset& dataset, const AugmentationPolicy& policy) {
  policy.validate();
  if (encoder.config.num_conditions < static_cast<std::size_t>(dataset.num_labels)) {
    throw ParameterError("augment: encoder has " + std::to_string(encoder.config.num_conditions) +
                         " conditions but the dataset has " + std::to_string(dataset.num_labels) + " labels");
  }
  return augment_with(
      dataset, [&](const LabeledExample& ex, Rng& rng) { return augment_sentence(encoder, ex, policy, rng); },
      policy.multiplier, policy.seed);
}

std::string render_augmented_tsv(const text::TsvCorpus& corpus, const text::Vocabulary& vocab, std::size_t max_len,
                                 const AugmentResult& result, const std::string& augmenter_name) {
  const std::size_t originals = result.dataset.size() - result.generated.size();
  if (originals != corpus.records.size()) {
    throw DimensionError("render_augmented_tsv: corpus has " + std::to_string(corpus.records.size()) +
                         " records, augmented dataset has " + std::to_string(originals) + " originals");
  }
  std::string out = std::string(text::kTsvFormatTag) + "\n";
  for (std::size_t i = 0; i < originals; ++i) {
    const auto& rec = corpus.records[i];
    out += std::to_string(rec.label) + "\t" + rec.text + "\tsplit=" + text::split_name(result.dataset.splits[i]) +
           ";augmenter=original;source=" + std::to_string(i) + "\n";
  }
  for (std::size_t g = 0; g < result.generated.size(); ++g) {
    const Generated& gen = result.generated[g];
    const LabeledExample& ex = result.dataset.examples[originals + g];
    std::vector<std::string> words = text::tokenize(corpus.records[gen.source].text);
    if (words.size() + 1 > max_len) words.resize(max_len - 1);
    for (std::size_t pos : gen.positions) words.at(pos - 1) = vocab.token(ex.tokens[pos]);
    out += std::to_string(ex.label) + "\t" + text::join_tokens(words) + "\tsplit=train;augmenter=" + augmenter_name +
           ";source=" + std::to_string(gen.source) + ";pass=" + std::to_string(gen.pass) +
           ";positions=" + join_positions(gen.positions) + "\n";
  }
  return out;
}

}  // namespace cbert::aug
