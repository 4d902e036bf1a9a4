#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cbert/common/rng.h"
#include "cbert/numkernel/tensor.h"
#include "json.hpp"

namespace cbert::model {

using nk::Tensor;

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t ffn = 256;
  std::size_t max_len = 64;
  std::size_t vocab_size = 0;
  std::size_t num_conditions = 2;
  double dropout = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Tensor attn_ln_gain, attn_ln_bias;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ffn_ln_gain, ffn_ln_bias;
  Tensor w1, b1, w2, b2;
};

// All learned weights. token_emb doubles as the output projection of the
// masked-LM head; cond_emb is the segment table during plain pretraining
// and the label table after conditional fine-tuning.
struct EncoderParams {
  Tensor token_emb;  // [V, H]
  Tensor pos_emb;    // [max_len, H]
  Tensor cond_emb;   // [num_conditions, H]
  std::vector<LayerParams> layers;
  Tensor final_ln_gain, final_ln_bias;
  Tensor head_w, head_b;  // transform before the tied output projection
  Tensor head_ln_gain, head_ln_bias;
  Tensor out_bias;  // [V]

  // Stable name -> tensor listing; checkpoint order and optimizer order.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> all() const;
  EncoderParams clone() const;
};

struct Encoder {
  EncoderConfig config;
  EncoderParams params;

  Encoder clone() const { return {config, params.clone()}; }
};

Encoder init_encoder(const EncoderConfig& config, Rng& rng);

// Dense [batch, length] layout; pad_mask is 1 for real tokens.
struct InputBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> token_ids;
  std::vector<int> cond_ids;
  std::vector<std::uint8_t> pad_mask;

  static InputBatch single(std::span<const int> tokens, int cond_id);
  // Right-pads every row to the longest one with PAD.
  static InputBatch pack(const std::vector<std::vector<int>>& rows, std::span<const int> cond_per_row);
};

// Optional capture of attention probabilities, one [B, T, T] tensor per
// layer and head, in layer-major order.
struct ForwardTrace {
  std::vector<Tensor> attention;
};

// Final hidden states [B, T, H].
Tensor encode_hidden(const Encoder& encoder, const InputBatch& batch, bool train, Rng* rng,
                     ForwardTrace* trace = nullptr);
// Masked-LM head on hidden rows [N, H] -> logits [N, V].
Tensor mlm_head(const Encoder& encoder, const Tensor& hidden_rows);
// Logits at every position, [B, T, V].
Tensor forward(const Encoder& encoder, const InputBatch& batch, bool train, Rng* rng,
               ForwardTrace* trace = nullptr);

// Replaces `masked_positions` of `tokens` with MASK and returns the softmax
// over the vocabulary at each of them, from one eval-mode forward pass with
// every position conditioned on `cond_id`.
std::vector<std::vector<double>> mlm_distribution(const Encoder& encoder, std::span<const int> tokens,
                                                  std::span<const std::size_t> masked_positions, int cond_id);

// Resizes the condition table. Shrinking or keeping the size copies the
// leading rows; growing draws a fresh table. Other weights are shared
// copies of the originals, bitwise equal.
Encoder swap_condition_table(const Encoder& encoder, std::size_t new_num_conditions, Rng& rng);

// Writes `path` (tensor container) and `path` + ".json" (config sidecar).
void save_encoder(const Encoder& encoder, const std::filesystem::path& path);
// Validates shapes against the sidecar and, if given, an expected config.
Encoder load_encoder(const std::filesystem::path& path, const std::optional<EncoderConfig>& expected = std::nullopt);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace cbert::model
