#include "cbert/training/masking.h"

#include <algorithm>
#include <cmath>

#include "cbert/common/errors.h"
#include "cbert/textcodec/vocabulary.h"

namespace cbert::train {

MaskPolicy MaskPolicy::ratio(double p_mask, CorruptSplit corrupt) {
  MaskPolicy p;
  p.mode = MaskMode::ratio;
  p.p_mask = p_mask;
  p.corrupt = corrupt;
  p.validate();
  return p;
}

MaskPolicy MaskPolicy::fixed_k(std::size_t k, CorruptSplit corrupt) {
  MaskPolicy p;
  p.mode = MaskMode::fixed_k;
  p.k = k;
  p.corrupt = corrupt;
  p.validate();
  return p;
}

void MaskPolicy::validate() const {
  if (mode == MaskMode::ratio && !(p_mask > 0.0 && p_mask <= 1.0)) {
    throw ParameterError("mask policy: p_mask must lie in (0, 1]");
  }
  if (mode == MaskMode::fixed_k && k == 0) throw ParameterError("mask policy: k must be >= 1");
  const auto& c = corrupt;
  if (c.mask < 0 || c.random < 0 || c.keep < 0 || std::abs(c.mask + c.random + c.keep - 1.0) > 1e-9) {
    throw ParameterError("mask policy: corrupt split fractions must be non-negative and sum to 1");
  }
}

nlohmann::json MaskPolicy::to_json() const {
  return {{"mode", mode == MaskMode::ratio ? "ratio" : "fixed_k"},
          {"p_mask", p_mask},
          {"k", k},
          {"corrupt", {corrupt.mask, corrupt.random, corrupt.keep}}};
}

MaskPolicy MaskPolicy::from_json(const nlohmann::json& j) {
  MaskPolicy p;
  try {
    const std::string mode = j.value("mode", std::string("ratio"));
    if (mode == "ratio") {
      p.mode = MaskMode::ratio;
    } else if (mode == "fixed_k") {
      p.mode = MaskMode::fixed_k;
    } else {
      throw ConfigError("mask policy: unknown mode '" + mode + "'");
    }
    p.p_mask = j.value("p_mask", p.p_mask);
    p.k = j.value("k", p.k);
    if (j.contains("corrupt")) {
      const auto& c = j.at("corrupt");
      if (!c.is_array() || c.size() != 3) throw ConfigError("mask policy: corrupt must be [mask, random, keep]");
      p.corrupt = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mask policy: ") + e.what());
  }
  p.validate();
  return p;
}

bool is_maskable(int token_id) { return token_id >= text::kNumSpecials; }

std::vector<std::size_t> maskable_positions(std::span<const int> tokens) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_maskable(tokens[i])) out.push_back(i);
  }
  return out;
}

std::optional<std::vector<std::size_t>> select_positions(std::span<const int> tokens, const MaskPolicy& policy,
                                                         Rng& rng) {
  std::vector<std::size_t> pool = maskable_positions(tokens);
  if (pool.empty()) return std::nullopt;
  std::size_t count = 0;
  if (policy.mode == MaskMode::fixed_k) {
    if (pool.size() < policy.k) return std::nullopt;
    count = policy.k;
  } else {
    for (std::size_t i = 0; i < pool.size(); ++i) count += rng.bernoulli(policy.p_mask) ? 1 : 0;
    count = std::max<std::size_t>(count, 1);
  }
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::optional<MaskedRow> mask_tokens(std::span<const int> tokens, const MaskPolicy& policy, std::size_t vocab_size,
                                     Rng& rng) {
  auto positions = select_positions(tokens, policy, rng);
  if (!positions) return std::nullopt;
  const std::size_t regular = vocab_size > static_cast<std::size_t>(text::kNumSpecials)
                                  ? vocab_size - text::kNumSpecials
                                  : 0;
  MaskedRow row;
  row.tokens.assign(tokens.begin(), tokens.end());
  row.targets.assign(tokens.size(), kIgnoreId);
  for (std::size_t pos : *positions) {
    row.targets[pos] = tokens[pos];
    const double u = rng.uniform();
    if (u < policy.corrupt.mask) {
      row.tokens[pos] = text::kMaskId;
    } else if (u < policy.corrupt.mask + policy.corrupt.random && regular > 0) {
      row.tokens[pos] = text::kNumSpecials + static_cast<int>(rng.uniform_index(regular));
    }
  }
  row.positions = std::move(*positions);
  return row;
}

}  // namespace cbert::train
