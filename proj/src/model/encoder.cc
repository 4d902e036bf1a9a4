#include "cbert/model/encoder.h"

#include <cmath>
#include <fstream>
#include <limits>

#include "cbert/common/errors.h"
#include "cbert/numkernel/checkpoint.h"
#include "cbert/numkernel/ops.h"
#include "cbert/textcodec/vocabulary.h"

namespace cbert::model {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-12;
constexpr const char* kSidecarFormat = "cbert-encoder/1";

Tensor normal_param(nk::Shape shape, Rng& rng) {
  std::vector<double> values(nk::shape_numel(shape));
  for (double& v : values) v = kInitStd * rng.normal();
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor zeros_param(nk::Shape shape) { return Tensor::zeros(std::move(shape), true); }
Tensor ones_param(nk::Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return nk::add_bias(nk::matmul(x, w), b); }

void validate_batch(const EncoderConfig& config, const InputBatch& batch) {
  const std::size_t n = batch.batch * batch.length;
  if (n == 0) throw DimensionError("encoder: empty batch");
  if (batch.token_ids.size() != n || batch.cond_ids.size() != n || batch.pad_mask.size() != n) {
    throw DimensionError("encoder: batch arrays do not match " + std::to_string(batch.batch) + "x" +
                         std::to_string(batch.length));
  }
  if (batch.length > config.max_len) {
    throw DimensionError("encoder: sequence length " + std::to_string(batch.length) + " exceeds max_len " +
                         std::to_string(config.max_len));
  }
  for (int c : batch.cond_ids) {
    if (c < 0 || static_cast<std::size_t>(c) >= config.num_conditions) {
      throw IndexError("encoder: condition id " + std::to_string(c) + " outside [0, " +
                       std::to_string(config.num_conditions) + ")");
    }
  }
  for (int t : batch.token_ids) {
    if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size) {
      throw IndexError("encoder: token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(config.vocab_size));
    }
  }
  for (std::size_t b = 0; b < batch.batch; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < batch.length; ++t) any = any || batch.pad_mask[b * batch.length + t];
    if (!any) throw DimensionError("encoder: row " + std::to_string(b) + " is all padding");
  }
}

Tensor self_attention(const EncoderConfig& config, const LayerParams& layer, const Tensor& x,
                      const Tensor& key_mask, ForwardTrace* trace) {
  const std::size_t d = config.hidden / config.heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor q = linear(x, layer.wq, layer.bq);
  Tensor k = linear(x, layer.wk, layer.bk);
  Tensor v = linear(x, layer.wv, layer.bv);
  std::vector<Tensor> contexts;
  contexts.reserve(config.heads);
  for (std::size_t h = 0; h < config.heads; ++h) {
    Tensor qh = nk::slice_last(q, h * d, d);
    Tensor kh = nk::slice_last(k, h * d, d);
    Tensor vh = nk::slice_last(v, h * d, d);
    Tensor scores = nk::add(nk::scale(nk::bmm(qh, nk::transpose(kh)), inv_sqrt_d), key_mask);
    Tensor probs = nk::softmax(scores, 2);
    if (trace != nullptr) trace->attention.push_back(probs);
    contexts.push_back(nk::bmm(probs, vh));
  }
  Tensor context = config.heads == 1 ? contexts[0] : nk::concat_last(contexts);
  return linear(context, layer.wo, layer.bo);
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers == 0) throw ParameterError("encoder config: layers must be >= 1");
  if (hidden < 2) throw ParameterError("encoder config: hidden must be >= 2");
  if (heads == 0 || hidden % heads != 0) {
    throw ParameterError("encoder config: hidden " + std::to_string(hidden) + " not divisible by heads " +
                         std::to_string(heads));
  }
  if (ffn == 0) throw ParameterError("encoder config: ffn must be >= 1");
  if (max_len < 2) throw ParameterError("encoder config: max_len must be >= 2");
  if (vocab_size <= static_cast<std::size_t>(text::kNumSpecials)) {
    throw ParameterError("encoder config: vocab_size must exceed the " + std::to_string(text::kNumSpecials) +
                         " specials");
  }
  if (num_conditions == 0) throw ParameterError("encoder config: num_conditions must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("encoder config: dropout must lie in [0, 1)");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"layers", layers},       {"hidden", hidden},         {"heads", heads},
          {"ffn", ffn},             {"max_len", max_len},       {"vocab_size", vocab_size},
          {"num_conditions", num_conditions}, {"dropout", dropout}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn = j.at("ffn").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.num_conditions = j.at("num_conditions").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out{
      {"token_emb", token_emb}, {"pos_emb", pos_emb}, {"cond_emb", cond_emb}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerParams& l = layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    out.insert(out.end(), {{p + "attn_ln.gain", l.attn_ln_gain},
                           {p + "attn_ln.bias", l.attn_ln_bias},
                           {p + "attn.wq", l.wq},
                           {p + "attn.bq", l.bq},
                           {p + "attn.wk", l.wk},
                           {p + "attn.bk", l.bk},
                           {p + "attn.wv", l.wv},
                           {p + "attn.bv", l.bv},
                           {p + "attn.wo", l.wo},
                           {p + "attn.bo", l.bo},
                           {p + "ffn_ln.gain", l.ffn_ln_gain},
                           {p + "ffn_ln.bias", l.ffn_ln_bias},
                           {p + "ffn.w1", l.w1},
                           {p + "ffn.b1", l.b1},
                           {p + "ffn.w2", l.w2},
                           {p + "ffn.b2", l.b2}});
  }
  out.insert(out.end(), {{"final_ln.gain", final_ln_gain},
                         {"final_ln.bias", final_ln_bias},
                         {"head.w", head_w},
                         {"head.b", head_b},
                         {"head_ln.gain", head_ln_gain},
                         {"head_ln.bias", head_ln_bias},
                         {"out_bias", out_bias}});
  return out;
}

std::vector<Tensor> EncoderParams::all() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

EncoderParams EncoderParams::clone() const {
  auto copy = [](const Tensor& t) { return t.detach(true); };
  EncoderParams p;
  p.token_emb = copy(token_emb);
  p.pos_emb = copy(pos_emb);
  p.cond_emb = copy(cond_emb);
  for (const LayerParams& l : layers) {
    p.layers.push_back({copy(l.attn_ln_gain), copy(l.attn_ln_bias), copy(l.wq), copy(l.bq), copy(l.wk),
                        copy(l.bk), copy(l.wv), copy(l.bv), copy(l.wo), copy(l.bo), copy(l.ffn_ln_gain),
                        copy(l.ffn_ln_bias), copy(l.w1), copy(l.b1), copy(l.w2), copy(l.b2)});
  }
  p.final_ln_gain = copy(final_ln_gain);
  p.final_ln_bias = copy(final_ln_bias);
  p.head_w = copy(head_w);
  p.head_b = copy(head_b);
  p.head_ln_gain = copy(head_ln_gain);
  p.head_ln_bias = copy(head_ln_bias);
  p.out_bias = copy(out_bias);
  return p;
}

Encoder init_encoder(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t h = config.hidden, f = config.ffn, v = config.vocab_size;
  EncoderParams p;
  p.token_emb = normal_param({v, h}, rng);
  p.pos_emb = normal_param({config.max_len, h}, rng);
  p.cond_emb = normal_param({config.num_conditions, h}, rng);
  for (std::size_t i = 0; i < config.layers; ++i) {
    LayerParams l;
    l.attn_ln_gain = ones_param({h});
    l.attn_ln_bias = zeros_param({h});
    l.wq = normal_param({h, h}, rng);
    l.bq = zeros_param({h});
    l.wk = normal_param({h, h}, rng);
    l.bk = zeros_param({h});
    l.wv = normal_param({h, h}, rng);
    l.bv = zeros_param({h});
    l.wo = normal_param({h, h}, rng);
    l.bo = zeros_param({h});
    l.ffn_ln_gain = ones_param({h});
    l.ffn_ln_bias = zeros_param({h});
    l.w1 = normal_param({h, f}, rng);
    l.b1 = zeros_param({f});
    l.w2 = normal_param({f, h}, rng);
    l.b2 = zeros_param({h});
    p.layers.push_back(std::move(l));
  }
  p.final_ln_gain = ones_param({h});
  p.final_ln_bias = zeros_param({h});
  p.head_w = normal_param({h, h}, rng);
  p.head_b = zeros_param({h});
  p.head_ln_gain = ones_param({h});
  p.head_ln_bias = zeros_param({h});
  p.out_bias = zeros_param({v});
  return {config, std::move(p)};
}

InputBatch InputBatch::single(std::span<const int> tokens, int cond_id) {
  InputBatch b;
  b.batch = 1;
  b.length = tokens.size();
  b.token_ids.assign(tokens.begin(), tokens.end());
  b.cond_ids.assign(tokens.size(), cond_id);
  b.pad_mask.assign(tokens.size(), 1);
  return b;
}

InputBatch InputBatch::pack(const std::vector<std::vector<int>>& rows, std::span<const int> cond_per_row) {
  if (rows.size() != cond_per_row.size()) throw DimensionError("InputBatch::pack: rows and conditions differ");
  InputBatch b;
  b.batch = rows.size();
  for (const auto& r : rows) b.length = std::max(b.length, r.size());
  const std::size_t n = b.batch * b.length;
  b.token_ids.assign(n, text::kPadId);
  b.cond_ids.assign(n, 0);
  b.pad_mask.assign(n, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t t = 0; t < b.length; ++t) {
      b.cond_ids[i * b.length + t] = cond_per_row[i];
      if (t < rows[i].size()) {
        b.token_ids[i * b.length + t] = rows[i][t];
        b.pad_mask[i * b.length + t] = 1;
      }
    }
  }
  return b;
}

Tensor encode_hidden(const Encoder& encoder, const InputBatch& batch, bool train, Rng* rng, ForwardTrace* trace) {
  const EncoderConfig& config = encoder.config;
  const EncoderParams& p = encoder.params;
  validate_batch(config, batch);
  if (train && config.dropout > 0.0 && rng == nullptr) throw ParameterError("encoder: training forward needs an rng");
  Rng unused(0);
  Rng& drop_rng = rng != nullptr ? *rng : unused;

  const std::size_t b = batch.batch, t = batch.length, h = config.hidden;
  std::vector<int> positions(b * t);
  for (std::size_t i = 0; i < b * t; ++i) positions[i] = static_cast<int>(i % t);

  Tensor x = nk::add(nk::add(nk::embedding_lookup(p.token_emb, batch.token_ids),
                             nk::embedding_lookup(p.pos_emb, positions)),
                     nk::embedding_lookup(p.cond_emb, batch.cond_ids));
  x = nk::dropout(nk::reshape(x, {b, t, h}), config.dropout, drop_rng, train);

  // Additive key mask: -inf on padded keys, shared by every query and head.
  std::vector<double> mask(b * t * t, 0.0);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t k = 0; k < t; ++k) {
      if (batch.pad_mask[s * t + k]) continue;
      for (std::size_t q = 0; q < t; ++q) mask[(s * t + q) * t + k] = -std::numeric_limits<double>::infinity();
    }
  }
  const Tensor key_mask = Tensor::from({b, t, t}, std::move(mask));

  for (const LayerParams& layer : p.layers) {
    Tensor attn_in = nk::layer_norm(x, layer.attn_ln_gain, layer.attn_ln_bias, kLayerNormEps);
    Tensor attn = self_attention(config, layer, attn_in, key_mask, trace);
    x = nk::add(x, nk::dropout(attn, config.dropout, drop_rng, train));
    Tensor ffn_in = nk::layer_norm(x, layer.ffn_ln_gain, layer.ffn_ln_bias, kLayerNormEps);
    Tensor ffn = linear(nk::gelu(linear(ffn_in, layer.w1, layer.b1)), layer.w2, layer.b2);
    x = nk::add(x, nk::dropout(ffn, config.dropout, drop_rng, train));
  }
  return nk::layer_norm(x, p.final_ln_gain, p.final_ln_bias, kLayerNormEps);
}

Tensor mlm_head(const Encoder& encoder, const Tensor& hidden_rows) {
  const EncoderParams& p = encoder.params;
  Tensor t = nk::gelu(linear(hidden_rows, p.head_w, p.head_b));
  t = nk::layer_norm(t, p.head_ln_gain, p.head_ln_bias, kLayerNormEps);
  return nk::add_bias(nk::matmul(t, nk::transpose(p.token_emb)), p.out_bias);
}

Tensor forward(const Encoder& encoder, const InputBatch& batch, bool train, Rng* rng, ForwardTrace* trace) {
  Tensor hidden = encode_hidden(encoder, batch, train, rng, trace);
  const std::size_t rows = batch.batch * batch.length;
  Tensor logits = mlm_head(encoder, nk::reshape(hidden, {rows, encoder.config.hidden}));
  return nk::reshape(logits, {batch.batch, batch.length, encoder.config.vocab_size});
}

std::vector<std::vector<double>> mlm_distribution(const Encoder& encoder, std::span<const int> tokens,
                                                  std::span<const std::size_t> masked_positions, int cond_id) {
  if (masked_positions.empty()) throw ParameterError("mlm_distribution: no masked positions");
  std::vector<int> masked(tokens.begin(), tokens.end());
  std::vector<int> rows;
  for (std::size_t pos : masked_positions) {
    if (pos >= tokens.size()) {
      throw IndexError("mlm_distribution: position " + std::to_string(pos) + " outside sequence of " +
                       std::to_string(tokens.size()));
    }
    if (tokens[pos] == text::kClsId || tokens[pos] == text::kPadId) {
      throw ParameterError("mlm_distribution: position " + std::to_string(pos) + " holds CLS or PAD");
    }
    masked[pos] = text::kMaskId;
    rows.push_back(static_cast<int>(pos));
  }
  const InputBatch batch = InputBatch::single(masked, cond_id);
  Tensor hidden = encode_hidden(encoder, batch, false, nullptr);
  Tensor picked = nk::embedding_lookup(nk::reshape(hidden, {tokens.size(), encoder.config.hidden}), rows);
  Tensor probs = nk::softmax(mlm_head(encoder, picked), 1);
  const std::size_t v = encoder.config.vocab_size;
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.emplace_back(probs.data().begin() + static_cast<std::ptrdiff_t>(i * v),
                     probs.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * v));
  }
  return out;
}

Encoder swap_condition_table(const Encoder& encoder, std::size_t new_num_conditions, Rng& rng) {
  if (new_num_conditions == 0) throw ParameterError("swap_condition_table: need at least one condition");
  Encoder out = encoder.clone();
  const std::size_t h = encoder.config.hidden;
  if (new_num_conditions <= encoder.config.num_conditions) {
    auto src = encoder.params.cond_emb.data();
    out.params.cond_emb =
        Tensor::from({new_num_conditions, h}, std::vector<double>(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(new_num_conditions * h)), true);
  } else {
    out.params.cond_emb = normal_param({new_num_conditions, h}, rng);
  }
  out.config.num_conditions = new_num_conditions;
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

void save_encoder(const Encoder& encoder, const std::filesystem::path& path) {
  std::vector<nk::NamedTensor> entries;
  for (const auto& [name, t] : encoder.params.named()) {
    entries.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  nk::save_checkpoint(path, entries);
  const nlohmann::json sidecar{{"format", kSidecarFormat}, {"config", encoder.config.to_json()}};
  nk::write_file_bytes(sidecar_path(path), sidecar.dump(2) + "\n");
}

Encoder load_encoder(const std::filesystem::path& path, const std::optional<EncoderConfig>& expected) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(nk::read_file_bytes(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("config sidecar '" + sidecar_path(path).string() + "' is not valid JSON: " + e.what());
  }
  if (!sidecar.is_object() || sidecar.value("format", "") != kSidecarFormat) {
    throw CheckpointError("config sidecar '" + sidecar_path(path).string() + "' lacks format tag " + kSidecarFormat);
  }
  if (!sidecar.contains("config")) {
    throw CheckpointError("config sidecar '" + sidecar_path(path).string() + "' has no config entry");
  }
  EncoderConfig config;
  try {
    config = EncoderConfig::from_json(sidecar.at("config"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError("config sidecar '" + sidecar_path(path).string() + "': " + e.what());
  }
  if (expected) {
    EncoderConfig relaxed = *expected;
    relaxed.num_conditions = config.num_conditions;
    if (relaxed == config && expected->num_conditions != config.num_conditions) {
      throw CheckpointError("checkpoint '" + path.string() + "' has " + std::to_string(config.num_conditions) +
                            " condition rows but the configuration expects " +
                            std::to_string(expected->num_conditions) +
                            "; resize the table with swap_condition_table (the finetune step does this)");
    }
    if (!(*expected == config)) {
      throw CheckpointError("checkpoint '" + path.string() + "' was saved with config " + config.to_json().dump() +
                            ", expected " + expected->to_json().dump());
    }
  }
  const auto entries = nk::load_checkpoint(path);
  Rng skeleton_rng(0);
  Encoder encoder = init_encoder(config, skeleton_rng);
  auto named = encoder.params.named();
  if (entries.size() != named.size()) {
    throw CheckpointError("checkpoint '" + path.string() + "' holds " + std::to_string(entries.size()) +
                          " tensors, config implies " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, tensor] = named[i];
    if (entries[i].name != name || entries[i].shape != tensor.shape()) {
      throw CheckpointError("checkpoint entry " + std::to_string(i) + " is '" + entries[i].name + "' " +
                            nk::shape_str(entries[i].shape) + ", expected '" + name + "' " +
                            nk::shape_str(tensor.shape()));
    }
    std::copy(entries[i].values.begin(), entries[i].values.end(), tensor.mutable_data().begin());
  }
  return encoder;
}

}  // namespace cbert::model
