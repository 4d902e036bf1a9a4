#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cbert/common/rng.h"
#include "json.hpp"

namespace cbert::train {

inline constexpr int kIgnoreId = -1;

enum class MaskMode { ratio, fixed_k };

// How a selected position is corrupted: replaced by MASK, by a random
// non-special token, or left as is.
struct CorruptSplit {
  double mask = 0.8;
  double random = 0.1;
  double keep = 0.1;
  bool operator==(const CorruptSplit&) const = default;
};

struct MaskPolicy {
  MaskMode mode = MaskMode::ratio;
  double p_mask = 0.15;
  std::size_t k = 1;
  CorruptSplit corrupt;

  static MaskPolicy ratio(double p_mask, CorruptSplit corrupt = {});
  static MaskPolicy fixed_k(std::size_t k, CorruptSplit corrupt = {});

  void validate() const;
  nlohmann::json to_json() const;
  static MaskPolicy from_json(const nlohmann::json& j);
  bool operator==(const MaskPolicy&) const = default;
};

// Specials (PAD, UNK, MASK, CLS) are never selected.
bool is_maskable(int token_id);
std::vector<std::size_t> maskable_positions(std::span<const int> tokens);

// Picks positions uniformly without replacement: exactly k in fixed_k mode,
// Binomial(n, p_mask) but at least one in ratio mode. Sorted ascending.
// nullopt is the skip signal (fewer maskable tokens than k, or none at all).
std::optional<std::vector<std::size_t>> select_positions(std::span<const int> tokens, const MaskPolicy& policy,
                                                         Rng& rng);

struct MaskedRow {
  std::vector<int> tokens;   // corrupted input
  std::vector<int> targets;  // original id at selected positions, kIgnoreId elsewhere
  std::vector<std::size_t> positions;
};

// Selection followed by corruption; random replacements are drawn from the
// non-special ids of a vocabulary of `vocab_size`.
std::optional<MaskedRow> mask_tokens(std::span<const int> tokens, const MaskPolicy& policy, std::size_t vocab_size,
                                     Rng& rng);

}  // namespace cbert::train
