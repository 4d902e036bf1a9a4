// Acceptance suite: one PASS/FAIL line per criterion, details indented
// above it. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cbert/augment/augment.h"
#include "cbert/augment/synonyms.h"
#include "cbert/classify/classifier.h"
#include "cbert/classify/experiment.h"
#include "cbert/cli/cli.h"
#include "cbert/common/errors.h"
#include "cbert/model/encoder.h"
#include "cbert/numkernel/checkpoint.h"
#include "cbert/numkernel/ops.h"
#include "cbert/styletransfer/style_transfer.h"
#include "cbert/textcodec/dataset.h"
#include "cbert/training/masking.h"
#include "cbert/training/trainer.h"
#include "support/gradcheck.h"
#include "support/synthetic_corpus.h"

using namespace cbert;
namespace fs = std::filesystem;
using nk::Tensor;

namespace {

struct Verdict {
  bool pass = false;
  std::string summary;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void detail(const std::string& line) { std::cout << "  " << line << "\n" << std::flush; }

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cbert_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------- AC-1

Tensor project(const Tensor& y, const Tensor& w) { return nk::sum(nk::mul(y, w)); }

Verdict ac1() {
  using testing::grad_check;
  using testing::random_tensor;
  using testing::random_weights_like;
  std::map<std::string, double> worst;
  const auto record = [&](const std::string& op, const testing::GradCheckResult& r) {
    worst[op] = std::max(worst[op], r.max_relative_error);
  };

  Rng rng(20240601);
  for (std::size_t trial = 0; trial < 5; ++trial) {
    const std::size_t m = 2 + trial, k = 3 + trial % 2, n = 1 + trial % 4, b = 1 + trial % 3;
    Tensor a = random_tensor({m, k}, rng), bm = random_tensor({k, n}, rng);
    Tensor w = random_weights_like(nk::matmul(a, bm), rng);
    record("matmul", grad_check({a, bm}, [&] { return project(nk::matmul(a, bm), w); }));

    Tensor x3 = random_tensor({b, m, k}, rng), y3 = random_tensor({b, k, n}, rng);
    w = random_weights_like(nk::bmm(x3, y3), rng);
    record("bmm", grad_check({x3, y3}, [&] { return project(nk::bmm(x3, y3), w); }));

    Tensor x = random_tensor({m, k}, rng), y = random_tensor({m, k}, rng), bias = random_tensor({k}, rng);
    w = random_weights_like(x, rng);
    record("add", grad_check({x, y}, [&] { return project(nk::add(x, y), w); }));
    record("sub", grad_check({x, y}, [&] { return project(nk::sub(x, y), w); }));
    record("mul", grad_check({x, y}, [&] { return project(nk::mul(x, y), w); }));
    record("scale", grad_check({x}, [&] { return project(nk::scale(x, 0.7 - trial), w); }));
    record("add_bias", grad_check({x, bias}, [&] { return project(nk::add_bias(x, bias), w); }));
    record("relu", grad_check({x}, [&] { return project(nk::relu(x), w); }));
    record("gelu", grad_check({x}, [&] { return project(nk::gelu(x), w); }));
    record("tanh", grad_check({x}, [&] { return project(nk::tanh(x), w); }));
    record("sigmoid", grad_check({x}, [&] { return project(nk::sigmoid(x), w); }));
    record("dropout", grad_check({x}, [&] {
             Rng replay(7 + trial);
             return project(nk::dropout(x, 0.3, replay, true), w);
           }));
    for (std::size_t axis = 0; axis < 3; ++axis) {
      Tensor s = random_tensor({b + 1, m, k}, rng);
      Tensor ws = random_weights_like(s, rng);
      record("softmax", grad_check({s}, [&, axis] { return project(nk::softmax(s, axis), ws); }));
    }
    Tensor gain = random_tensor({k}, rng);
    record("layer_norm", grad_check({x, gain, bias}, [&] { return project(nk::layer_norm(x, gain, bias), w); }));

    Tensor table = random_tensor({5 + trial, 3}, rng);
    const std::vector<int> ids{0, 2, 2, 1, static_cast<int>(4 + trial), 0};
    Tensor we = random_weights_like(nk::embedding_lookup(table, ids), rng);
    record("embedding_lookup", grad_check({table}, [&] { return project(nk::embedding_lookup(table, ids), we); }));

    Tensor t3 = random_tensor({b, m + 2, k}, rng), other = random_tensor({b, m + 2, 2}, rng);
    Tensor wt = random_weights_like(nk::transpose(t3), rng);
    record("transpose", grad_check({t3}, [&] { return project(nk::transpose(t3), wt); }));
    Tensor wr = random_weights_like(nk::reshape(t3, {b * (m + 2), k}), rng);
    record("reshape", grad_check({t3}, [&] { return project(nk::reshape(t3, {b * (m + 2), k}), wr); }));
    Tensor wsl = random_weights_like(nk::slice_last(t3, 1, k - 1), rng);
    record("slice_last", grad_check({t3}, [&] { return project(nk::slice_last(t3, 1, k - 1), wsl); }));
    Tensor wc = random_weights_like(nk::concat_last({t3, other}), rng);
    record("concat_last", grad_check({t3, other}, [&] { return project(nk::concat_last({t3, other}), wc); }));
    Tensor wts = random_weights_like(nk::time_step(t3, trial % (m + 2)), rng);
    record("time_step", grad_check({t3}, [&] { return project(nk::time_step(t3, trial % (m + 2)), wts); }));
    const std::size_t width = 1 + trial % 3;
    Tensor wu = random_weights_like(nk::unfold_windows(t3, width), rng);
    record("unfold_windows", grad_check({t3}, [&] { return project(nk::unfold_windows(t3, width), wu); }));
    std::vector<std::uint8_t> valid(b * (m + 2), 1);
    valid[0] = 0;
    Tensor wm = random_weights_like(nk::max_over_time(t3, valid), rng);
    record("max_over_time", grad_check({t3}, [&] { return project(nk::max_over_time(t3, valid), wm); }));
    record("sum", grad_check({t3}, [&] { return nk::scale(nk::sum(t3), 0.5); }));

    Tensor logits = random_tensor({4 + trial, 7}, rng, 2.0);
    std::vector<int> targets(4 + trial);
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i % 3 == 1 ? -1 : static_cast<int>(rng.uniform_index(7));
    record("cross_entropy", grad_check({logits}, [&] { return nk::cross_entropy(logits, targets, -1).loss; }));
  }
  double op_worst = 0.0;
  std::string worst_op;
  for (const auto& [op, e] : worst) {
    if (e >= op_worst) {
      op_worst = e;
      worst_op = op;
    }
  }
  detail(std::to_string(worst.size()) + " ops x 5 instances, worst " + worst_op + " " + fmt("%.2e", op_worst));

  double model_worst = 0.0, bk_max = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    model::EncoderConfig c;
    c.layers = 2;
    c.hidden = 8;
    c.heads = 2;
    c.ffn = 16;
    c.max_len = 8;
    c.vocab_size = 12;
    c.dropout = 0.0;
    Rng r(500 + inst);
    model::Encoder enc = model::init_encoder(c, r);
    for (Tensor& p : enc.params.all()) {
      if (p.rank() == 2) {
        for (double& v : p.mutable_data()) v = 0.5 * r.normal();
      }
    }
    const std::vector<int> conds{0, 1};
    const auto batch = model::InputBatch::pack({{3, 4, 5, 6, 7, 8}, {3, 9, 10, 11}}, conds);
    std::vector<int> targets(batch.batch * batch.length, -1);
    targets[2] = 5;
    targets[4] = 11;
    targets[batch.length + 1] = 9;
    const auto loss = [&] {
      Tensor logits = model::forward(enc, batch, false, nullptr);
      const nk::Shape flat{batch.batch * batch.length, c.vocab_size};
      return nk::cross_entropy(nk::reshape(logits, flat), targets, -1).loss;
    };
    // key biases cannot move a softmax row, so their exact gradient is zero
    std::vector<Tensor> params, key_biases;
    for (auto& [name, t] : enc.params.named()) (name.ends_with("attn.bk") ? key_biases : params).push_back(t);
    const auto res = testing::grad_check(params, loss);
    model_worst = std::max(model_worst, res.max_relative_error);
    checked += res.checked;
    loss().backward();
    for (const Tensor& bk : key_biases) {
      for (double g : bk.grad()) bk_max = std::max(bk_max, std::abs(g));
    }
  }
  detail("2-layer H=8 encoder + masked-LM loss, 5 instances, " + std::to_string(checked) + " parameters checked, worst " +
         fmt("%.2e", model_worst) + "; key-bias |grad| max " + fmt("%.1e", bk_max) + " (exact value 0)");
  const bool pass = op_worst < 1e-4 && model_worst < 1e-3 && bk_max < 1e-9;
  return {pass, "gradient suite: ops " + fmt("%.2e", op_worst) + " < 1e-4, model " + fmt("%.2e", model_worst) +
                    " < 1e-3"};
}

// ---------------------------------------------------------------- AC-2

Verdict ac2() {
  constexpr std::size_t kTrials = 10000;
  constexpr std::size_t kVocab = 30;
  std::size_t violations = 0, fixed_exact = 0, fixed_trials = 0, skips = 0, aug_checked = 0;
  std::vector<std::string> notes;
  const auto fail = [&](const std::string& what, std::size_t trial) {
    if (violations++ < 5) notes.push_back("trial " + std::to_string(trial) + ": " + what);
  };

  model::EncoderConfig ec;
  ec.layers = 1;
  ec.hidden = 8;
  ec.heads = 2;
  ec.ffn = 16;
  ec.max_len = 32;
  ec.vocab_size = kVocab;
  Rng init(11);
  const model::Encoder enc = model::init_encoder(ec, init);
  std::map<std::string, std::vector<std::string>> groups;
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[MASK]", "[CLS]"};
  for (std::size_t i = 4; i < kVocab; ++i) tokens.push_back("w" + std::to_string(i));
  const text::Vocabulary vocab = text::Vocabulary::from_tokens(tokens);
  for (std::size_t i = 4; i + 1 < kVocab; i += 2) groups["w" + std::to_string(i)] = {"w" + std::to_string(i + 1)};
  const aug::BoundSynonyms synonyms = aug::bind_synonyms(aug::SynonymTable::from_map(groups), vocab);

  // fixed sentence for the position-frequency check
  const std::vector<int> uniform_row{3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 0, 0};
  std::vector<std::size_t> freq(uniform_row.size(), 0);

  for (std::size_t trial = 0; trial < kTrials; ++trial) {
    Rng rng = derive_rng(2024, "ac2-trial", trial);
    const std::size_t n = 1 + rng.uniform_index(20);
    std::vector<int> row{text::kClsId};
    for (std::size_t i = 0; i < n; ++i) {
      // occasional UNK, otherwise a regular id
      row.push_back(rng.bernoulli(0.1) ? text::kUnkId : static_cast<int>(4 + rng.uniform_index(kVocab - 4)));
    }
    const std::size_t pads = rng.uniform_index(4);
    row.insert(row.end(), pads, text::kPadId);
    const bool fixed = trial % 2 == 1;
    const train::MaskPolicy policy = fixed ? train::MaskPolicy::fixed_k(1 + rng.uniform_index(4))
                                           : train::MaskPolicy::ratio(0.05 + 0.45 * rng.uniform());
    const std::uint64_t seed = rng.next_u64();
    const std::size_t maskable = train::maskable_positions(row).size();

    Rng r1(seed), r2(seed);
    const auto m1 = train::mask_tokens(row, policy, kVocab, r1);
    const auto m2 = train::mask_tokens(row, policy, kVocab, r2);
    if (m1.has_value() != m2.has_value() || (m1 && (m1->tokens != m2->tokens || m1->targets != m2->targets ||
                                                    m1->positions != m2->positions))) {
      fail("masking not deterministic under a fixed seed", trial);
    }
    if (fixed) ++fixed_trials;
    if (!m1) {
      ++skips;
      if (!(fixed ? maskable < policy.k : maskable == 0)) fail("unexpected skip", trial);
      if (fixed) ++fixed_exact;  // skipping is the correct outcome for k > maskable
    } else {
      if (m1->tokens.size() != row.size()) fail("masking changed the length", trial);
      if (fixed) {
        if (m1->positions.size() == policy.k) ++fixed_exact;
        else fail("fixed_k masked " + std::to_string(m1->positions.size()), trial);
      } else if (m1->positions.empty()) {
        fail("ratio mode masked nothing", trial);
      }
      std::set<std::size_t> chosen(m1->positions.begin(), m1->positions.end());
      for (std::size_t p : m1->positions) {
        if (row[p] == text::kClsId || row[p] == text::kPadId || !train::is_maskable(row[p])) {
          fail("masked a special token", trial);
        }
      }
      for (std::size_t i = 0; i < row.size(); ++i) {
        const bool at = chosen.count(i) > 0;
        if (at && m1->targets[i] != row[i]) fail("target differs from the original", trial);
        if (!at && (m1->targets[i] != train::kIgnoreId || m1->tokens[i] != row[i])) {
          fail("unselected position touched", trial);
        }
      }
    }

    Rng ur = derive_rng(2024, "ac2-uniform", trial);
    const auto sel = train::select_positions(uniform_row, train::MaskPolicy::fixed_k(3), ur);
    if (!sel || sel->size() != 3) {
      fail("uniform selection did not pick 3", trial);
    } else {
      for (std::size_t p : *sel) ++freq[p];
    }

    if (trial % 10 == 0) {
      // substitution-only augmentation: contextual and synonym
      aug::AugmentationPolicy ap;
      ap.k = 1 + rng.uniform_index(3);
      ap.sampler = trial % 20 == 0 ? aug::Sampler::greedy : aug::Sampler::top_k;
      text::LabeledExample ex{row, static_cast<int>(trial % 2)};
      Rng a1(seed), a2(seed);
      const auto g1 = aug::contextual_fill(enc, ex, ex.label, ap, a1);
      const auto g2 = aug::contextual_fill(enc, ex, ex.label, ap, a2);
      Rng s1(seed), s2(seed);
      const auto y1 = aug::synonym_augment(ex, synonyms, ap.k, s1);
      const auto y2 = aug::synonym_augment(ex, synonyms, ap.k, s2);
      for (const auto* pair : {&g1, &y1}) {
        const auto& g = *pair;
        if (!g) continue;
        ++aug_checked;
        if (g->example.tokens.size() != row.size()) fail("augmentation changed the length", trial);
        if (g->example.label != ex.label) fail("augmentation changed the label", trial);
        std::set<std::size_t> at(g->positions.begin(), g->positions.end());
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (!at.count(i) && g->example.tokens[i] != row[i]) fail("augmentation touched an unselected token", trial);
          if (at.count(i) && !train::is_maskable(row[i])) fail("augmentation replaced a special", trial);
          if (at.count(i) && text::is_special_id(g->example.tokens[i])) fail("augmentation inserted a special", trial);
        }
      }
      if (g1.has_value() != g2.has_value() || (g1 && g1->example != g2->example)) fail("contextual fill not deterministic", trial);
      if (y1.has_value() != y2.has_value() || (y1 && y1->example != y2->example)) fail("synonym fill not deterministic", trial);
    }
  }
  const double expected = 3.0 * kTrials / 10.0;
  double worst_dev = 0.0;
  for (std::size_t p = 1; p <= 10; ++p) worst_dev = std::max(worst_dev, std::abs(freq[p] - expected) / expected);
  const bool freq_ok = worst_dev <= 0.15 && freq[0] == 0 && freq[11] == 0 && freq[12] == 0;
  detail(std::to_string(kTrials) + " trials, " + std::to_string(skips) + " correct skips, fixed_k exact " +
         std::to_string(fixed_exact) + "/" + std::to_string(fixed_trials) + ", " + std::to_string(aug_checked) +
         " augmentations checked");
  detail("position frequency: expected " + fmt("%.0f", expected) + " per maskable slot, worst deviation " +
         fmt("%.1f%%", 100.0 * worst_dev) + " (limit 15%); CLS/PAD hits " + std::to_string(freq[0] + freq[11] + freq[12]));
  for (const auto& n : notes) detail("violation: " + n);
  return {violations == 0 && freq_ok,
          "masking/augmentation invariants: " + std::to_string(violations) + " violations, frequency deviation " +
              fmt("%.1f%%", 100.0 * worst_dev)};
}

// ------------------------------------------------ shared synthetic setup

struct Corpus {
  std::vector<testing::SyntheticSentence> sentences;
  text::Vocabulary vocab;
  text::Dataset dataset;
  std::vector<int> pos_ids, neg_ids;
};

Corpus sentiment_corpus() {
  Corpus c;
  c.sentences = testing::make_sentiment_corpus(200, 42);
  std::vector<std::string> texts;
  for (const auto& s : c.sentences) texts.push_back(s.text);
  c.vocab = text::build_vocab_from_texts(texts, 1, 1000);
  c.dataset = text::make_dataset(testing::to_tsv_corpus(c.sentences), c.vocab, 64, {0.1, 42});
  for (const auto& w : testing::positive_words()) c.pos_ids.push_back(c.vocab.id(w));
  for (const auto& w : testing::negative_words()) c.neg_ids.push_back(c.vocab.id(w));
  return c;
}

struct Models {
  model::Encoder unconditional;
  model::Encoder conditional;
};

// Toy encoder, at most 10 epochs per stage.
train::TrainConfig toy_training(std::uint64_t seed) {
  train::TrainConfig t;
  t.epochs = 20;
  t.patience = 20;  // run every epoch, keep the best checkpoint
  t.batch_size = 8;
  t.lr = 2e-3;
  t.seed = seed;
  return t;
}

Models train_models(const text::Dataset& data, std::size_t vocab_size, std::uint64_t seed) {
  model::EncoderConfig c;
  c.vocab_size = vocab_size;
  const auto policy = train::MaskPolicy::ratio(0.15);
  train::TrainResult pre = train::pretrain_mlm(data, c, policy, toy_training(seed));
  train::TrainResult ft = train::finetune_cmlm(data, pre.encoder, policy, toy_training(seed));
  return {std::move(pre.encoder), std::move(ft.encoder)};
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

Corpus* g_corpus = nullptr;
Models* g_models = nullptr;

// ---------------------------------------------------------------- AC-3

Verdict ac3() {
  static Corpus corpus = sentiment_corpus();
  g_corpus = &corpus;
  detail("corpus: " + std::to_string(corpus.dataset.size()) + " sentences, vocab " + std::to_string(corpus.vocab.size()));
  static Models models = train_models(corpus.dataset, corpus.vocab.size(), 42);
  g_models = &models;
  bool pass = corpus.vocab.size() < 100;
  std::string summary = "conditioning oracle:";
  for (int cond : {0, 1}) {
    const auto& right = cond == 1 ? corpus.pos_ids : corpus.neg_ids;
    double total = 0.0, lowest = 1.0;
    std::size_t argmax_ok = 0, above = 0;
    for (const auto& ex : corpus.dataset.examples) {
      const std::vector<std::size_t> slot{testing::kSentimentSlot};
      const auto dist = model::mlm_distribution(models.conditional, ex.tokens, slot, cond)[0];
      double mass = 0.0;
      for (int id : right) mass += dist[static_cast<std::size_t>(id)];
      total += mass;
      lowest = std::min(lowest, mass);
      above += mass >= 0.8 ? 1 : 0;
      const int best = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      argmax_ok += contains(right, best) ? 1 : 0;
    }
    const std::size_t n = corpus.dataset.size();
    const double mean = total / static_cast<double>(n);
    detail("cond " + std::to_string(cond) + ": argmax in label-" + std::to_string(cond) + " set " +
           std::to_string(argmax_ok) + "/" + std::to_string(n) + ", mass mean " + fmt("%.3f", mean) + " min " +
           fmt("%.3f", lowest) + ", sentences with mass >= 0.8: " + std::to_string(above) + "/" + std::to_string(n));
    pass = pass && argmax_ok == n && above == n;
    summary += " cond " + std::to_string(cond) + " min mass " + fmt("%.3f", lowest) + " (>= 0.8)";
  }
  return {pass, summary};
}

// ---------------------------------------------------------------- AC-4

struct FillStats {
  std::size_t slot_fills = 0, wrong = 0;
  double rate() const { return slot_fills ? static_cast<double>(wrong) / static_cast<double>(slot_fills) : 1.0; }
};

FillStats slot_stats(const Corpus& c, const text::Dataset& source, const aug::AugmentResult& r) {
  FillStats s;
  const std::size_t originals = r.dataset.size() - r.generated.size();
  for (std::size_t j = 0; j < r.generated.size(); ++j) {
    const auto& g = r.generated[j];
    if (source.examples[g.source].label != 1) continue;
    if (!std::count(g.positions.begin(), g.positions.end(), testing::kSentimentSlot)) continue;
    ++s.slot_fills;
    const int filled = r.dataset.examples[originals + j].tokens[testing::kSentimentSlot];
    s.wrong += contains(c.neg_ids, filled) ? 1 : 0;
  }
  return s;
}

aug::AugmentationPolicy ac_policy(std::uint64_t seed) {
  aug::AugmentationPolicy p;
  p.k = 1;
  p.sampler = aug::Sampler::top_k;
  p.top_k = 10;
  p.temperature = 1.0;
  p.multiplier = 5;
  p.seed = seed;
  return p;
}

Verdict ac4() {
  if (g_corpus == nullptr) return {false, "needs the corpus built for AC-3"};
  const Corpus& c = *g_corpus;
  bool pass = true;
  double worst_cbert = 0.0, best_bert = 1.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Models m = train_models(c.dataset, c.vocab.size(), seed);
    const auto policy = ac_policy(seed);
    const auto cbert = aug::augment_dataset(m.conditional, c.dataset, policy);
    const auto bert = aug::augment_with(
        c.dataset,
        [&](const text::LabeledExample& ex, Rng& rng) { return aug::bert_augment(m.unconditional, ex, policy, rng); },
        policy.multiplier, policy.seed);
    const FillStats sc = slot_stats(c, c.dataset, cbert), sb = slot_stats(c, c.dataset, bert);
    detail("seed " + std::to_string(seed) + ": conditional " + std::to_string(sc.wrong) + "/" +
           std::to_string(sc.slot_fills) + " = " + fmt("%.1f%%", 100 * sc.rate()) + ", unconditional " +
           std::to_string(sb.wrong) + "/" + std::to_string(sb.slot_fills) + " = " + fmt("%.1f%%", 100 * sb.rate()));
    pass = pass && sc.slot_fills > 0 && sb.slot_fills > 0 && sc.rate() <= 0.05 && sb.rate() >= 0.20;
    worst_cbert = std::max(worst_cbert, sc.rate());
    best_bert = std::min(best_bert, sb.rate());
  }
  return {pass, "label-compatibility gap: label-1 slot filled with a label-0 word, conditional max " +
                    fmt("%.1f%%", 100 * worst_cbert) + " (<= 5%), unconditional min " + fmt("%.1f%%", 100 * best_bert) +
                    " (>= 20%)"};
}

// ---------------------------------------------------------------- AC-5

Verdict ac5() {
  // 500 sentences: 300 train, 100 val, 100 test; train and val labels are
  // flipped with probability 0.2, the test labels stay clean.
  auto all = testing::make_sentiment_corpus(250, 2025);
  Rng shuffle = derive_rng(2025, "ac5-split");
  for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[shuffle.uniform_index(i)]);
  std::vector<testing::SyntheticSentence> fit(all.begin(), all.begin() + 400), test(all.begin() + 400, all.end());
  fit = testing::inject_label_noise(fit, 0.2, 2025);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < fit.size(); ++i) flipped += fit[i].label != all[i].label ? 1 : 0;

  std::vector<std::string> texts;
  for (const auto& s : fit) texts.push_back(s.text);
  const text::Vocabulary vocab = text::build_vocab_from_texts(texts, 1, 1000);
  text::Dataset labelled, lm;
  labelled.num_labels = lm.num_labels = 2;
  labelled.vocab_size = lm.vocab_size = vocab.size();
  for (std::size_t i = 0; i < fit.size(); ++i) {
    const text::Split s = i < 300 ? text::Split::train : text::Split::val;
    text::LabeledExample ex{text::encode(fit[i].text, vocab, 64), fit[i].label};
    labelled.push_back(ex, s);
    lm.push_back(ex, s);
  }
  for (const auto& s : test) labelled.push_back({text::encode(s.text, vocab, 64), s.label}, text::Split::test);
  detail("300 train / 100 val / 100 test, " + std::to_string(flipped) + " of 400 train+val labels flipped");

  // language models never see the test split
  const Models m = train_models(lm, vocab.size(), 2025);
  clf::ExperimentInputs in;
  in.dataset = &labelled;
  in.conditional = &m.conditional;
  in.unconditional = &m.unconditional;
  in.policy = ac_policy(0);
  in.policy.multiplier = 2;
  in.kind = clf::ClassifierKind::cnn;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const clf::ComparisonTable table = clf::ab_experiment(in, {"none", "bert", "cbert"}, seeds);
  std::istringstream lines(table.render_text());
  for (std::string line; std::getline(lines, line);) detail(line);
  const double none = table.mean("none"), bert = table.mean("bert"), cbert = table.mean("cbert");
  const bool pass = cbert >= none && cbert >= bert;
  return {pass, "downstream A/B (CNN, 5 seeds): mean test accuracy cbert " + fmt("%.4f", cbert) + " vs none " +
                    fmt("%.4f", none) + " vs bert " + fmt("%.4f", bert)};
}

// ---------------------------------------------------------------- AC-6

int run_cli(const std::vector<std::string>& args, std::string* output = nullptr) {
  std::vector<std::string> full{"cbert"};
  full.insert(full.end(), args.begin(), args.end());
  std::ostringstream out, err;
  const int code = cli::run(full, out, err);
  if (output) *output = out.str() + err.str();
  if (code != 0 && !output) detail("cli " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
  return code;
}

Verdict ac6() {
  if (g_models == nullptr) return {false, "needs the models trained for AC-3"};
  const Corpus& c = *g_corpus;
  const Models& m = *g_models;
  clf::CnnConfig cc;
  cc.seed = 42;
  const clf::TrainedClassifier judge = clf::train_cnn(c.dataset, cc);
  detail("classifier val accuracy " + fmt("%.3f", judge.report.find(text::Split::val)->accuracy));

  std::size_t total = 0, slot_only = 0, hits = 0;
  std::vector<std::vector<int>> outputs;
  for (const auto& ex : c.dataset.examples) {
    if (ex.label != 1) continue;
    ++total;
    const style::TransferResult r = style::transfer_style(m.conditional, judge.classifier, ex, 0, 1);
    std::size_t diff = 0;
    bool outside = false;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (ex.tokens[i] == r.example.tokens[i]) continue;
      ++diff;
      outside = outside || i != testing::kSentimentSlot;
    }
    const bool ok = r.positions == std::vector<std::size_t>{testing::kSentimentSlot} && diff == 1 && !outside;
    slot_only += ok ? 1 : 0;
    outputs.push_back(r.example.tokens);
  }
  const auto predicted = clf::predict(judge.classifier, outputs);
  for (int p : predicted) hits += p == 0 ? 1 : 0;
  const double rate = static_cast<double>(hits) / static_cast<double>(total);
  detail("label 1 -> 0 on " + std::to_string(total) + " sentences: only the attributed slot changed in " +
         std::to_string(slot_only) + ", classifier predicts 0 on " + std::to_string(hits) + " (" +
         fmt("%.1f%%", 100 * rate) + ")");

  // the same transfer through the command line, checking the pair layout
  const fs::path dir = work_dir("ac6");
  testing::write_tsv(dir / "data.tsv", c.sentences);
  c.vocab.save(dir / "vocab.txt");
  model::save_encoder(m.conditional, dir / "cond.ckpt");
  clf::save_classifier(judge.classifier, dir / "clf.ckpt");
  const int code = run_cli({"style-transfer", "--data", (dir / "data.tsv").string(), "--vocab",
                            (dir / "vocab.txt").string(), "--encoder", (dir / "cond.ckpt").string(), "--classifier",
                            (dir / "clf.ckpt").string(), "--target-label", "0", "--seed", "42", "--out",
                            (dir / "run").string()});
  bool layout = code == 0;
  std::size_t pairs = 0;
  if (layout) {
    std::istringstream in(nk::read_file_bytes(dir / "run" / "pairs.txt"));
    std::string line;
    std::getline(in, line);
    layout = line == style::kPairsFormatTag;
    std::vector<std::string> shown;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line.rfind("Original:\t", 0) != 0) {
        layout = false;
        break;
      }
      std::string gen;
      if (!std::getline(in, gen) || gen.rfind("Generated:\t", 0) != 0) {
        layout = false;
        break;
      }
      if (shown.size() < 4) {
        shown.push_back(line);
        shown.push_back(gen);
      }
      ++pairs;
    }
    for (const auto& s : shown) detail(s);
  }
  layout = layout && pairs == total;
  detail("cli pairs.txt: " + std::to_string(pairs) + " pairs, layout " + (layout ? "ok" : "BAD"));
  const bool pass = slot_only == total && rate >= 0.8 && layout;
  return {pass, "style transfer 1 -> 0: slot-only " + std::to_string(slot_only) + "/" + std::to_string(total) +
                    ", target predicted " + fmt("%.1f%%", 100 * rate) + " (>= 80%), pair layout " +
                    (layout ? "ok" : "bad")};
}

// ---------------------------------------------------------------- AC-7

std::vector<std::string> run_pipeline(const fs::path& data, const fs::path& config, const fs::path& root) {
  std::vector<std::string> failures;
  const auto step = [&](std::vector<std::string> args) {
    if (run_cli(args) != 0) failures.push_back(args.front());
  };
  const std::string d = data.string(), cfg = config.string(), r = root.string();
  step({"build-vocab", "--config", cfg, "--data", d, "--out", r + "/vocab"});
  const std::string vocab = r + "/vocab/vocab.txt";
  step({"pretrain", "--config", cfg, "--data", d, "--vocab", vocab, "--out", r + "/pretrain"});
  step({"finetune", "--config", cfg, "--data", d, "--vocab", vocab, "--encoder", r + "/pretrain/encoder.ckpt", "--out",
        r + "/finetune"});
  step({"augment", "--config", cfg, "--data", d, "--vocab", vocab, "--encoder", r + "/finetune/encoder.ckpt", "--out",
        r + "/augment"});
  step({"train-classifier", "--config", cfg, "--data", r + "/augment/augmented.tsv", "--vocab", vocab, "--out",
        r + "/classifier"});
  step({"eval", "--config", cfg, "--data", d, "--vocab", vocab, "--classifier", r + "/classifier/classifier.ckpt",
        "--out", r + "/eval"});
  step({"style-transfer", "--config", cfg, "--data", d, "--vocab", vocab, "--encoder", r + "/finetune/encoder.ckpt",
        "--classifier", r + "/classifier/classifier.ckpt", "--out", r + "/transfer"});
  return failures;
}

std::string without_paths(const fs::path& run_config) {
  nlohmann::json j = nlohmann::json::parse(nk::read_file_bytes(run_config));
  j["config"].erase("paths");
  return j.dump();
}

struct MalformedCase {
  std::string name;
  ErrorCategory expected;
  std::function<void()> action;
};

Verdict ac7() {
  const fs::path dir = work_dir("ac7");
  testing::write_tsv(dir / "data.tsv", testing::make_sentiment_corpus(30, 3));
  const nlohmann::json tiny{
      {"seed", 7},
      {"max_len", 16},
      {"val_fraction", 0.2},
      {"encoder", {{"layers", 1}, {"hidden", 16}, {"heads", 2}, {"ffn", 32}, {"max_len", 16}}},
      {"train", {{"epochs", 2}, {"batch_size", 16}}},
      {"augment", {{"k", 1}, {"multiplier", 2}}},
      {"cnn", {{"epochs", 3}, {"filters", 8}, {"embed", 8}, {"hidden", 8}}}};
  nk::write_file_bytes(dir / "config.json", tiny.dump(2));
  const std::string inputs_before = nk::read_file_bytes(dir / "data.tsv") + nk::read_file_bytes(dir / "config.json");

  auto fa = run_pipeline(dir / "data.tsv", dir / "config.json", dir / "a");
  auto fb = run_pipeline(dir / "data.tsv", dir / "config.json", dir / "b");
  bool pass = fa.empty() && fb.empty();
  for (const auto& f : fa) detail("run a: step " + f + " failed");
  for (const auto& f : fb) detail("run b: step " + f + " failed");

  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    const fs::path other = dir / "b" / rel;
    ++compared;
    bool same = fs::exists(other);
    if (same) {
      same = rel.filename() == "run_config.json"
                 ? without_paths(entry.path()) == without_paths(other)
                 : nk::read_file_bytes(entry.path()) == nk::read_file_bytes(other);
    }
    if (!same) {
      ++differing;
      detail("differs between runs: " + rel.string());
    }
  }
  detail("two pipeline runs: " + std::to_string(compared) + " files compared, " + std::to_string(differing) +
         " differ (run_config.json compared without its input paths)");
  pass = pass && differing == 0 && compared > 0;
  const bool untouched =
      nk::read_file_bytes(dir / "data.tsv") + nk::read_file_bytes(dir / "config.json") == inputs_before;
  if (!untouched) detail("an input file changed");
  pass = pass && untouched;

  // checkpoint round trips
  bool round_trip = false;
  try {
    const model::Encoder enc = model::load_encoder(dir / "a" / "finetune" / "encoder.ckpt");
    model::save_encoder(enc, dir / "again.ckpt");
    const clf::Classifier cl = clf::load_classifier(dir / "a" / "classifier" / "classifier.ckpt");
    clf::save_classifier(cl, dir / "again_clf.ckpt");
    round_trip =
        nk::read_file_bytes(dir / "again.ckpt") == nk::read_file_bytes(dir / "a" / "finetune" / "encoder.ckpt") &&
        nk::read_file_bytes(dir / "again.ckpt.json") ==
            nk::read_file_bytes(dir / "a" / "finetune" / "encoder.ckpt.json") &&
        nk::read_file_bytes(dir / "again_clf.ckpt") ==
            nk::read_file_bytes(dir / "a" / "classifier" / "classifier.ckpt");
  } catch (const std::exception& e) {
    detail(std::string("round trip raised: ") + e.what());
  }
  detail(std::string("encoder and classifier save/load round trip bitwise: ") + (round_trip ? "yes" : "no"));
  pass = pass && round_trip;

  // malformed inputs
  const fs::path bad = dir / "bad";
  fs::create_directories(bad);
  nk::write_file_bytes(bad / "label.tsv", "positive\tthe movie was good\n");
  nk::write_file_bytes(bad / "tabs.tsv", "1 the movie was good\n");
  nk::write_file_bytes(bad / "syn.txt", "good great\n");
  nk::write_file_bytes(bad / "vocab.txt", "hello\nworld\n");
  const std::string good_ckpt = nk::read_file_bytes(dir / "a" / "finetune" / "encoder.ckpt");
  nk::write_file_bytes(bad / "trunc.ckpt", good_ckpt.substr(0, good_ckpt.size() / 2));
  fs::copy_file(dir / "a" / "finetune" / "encoder.ckpt.json", bad / "trunc.ckpt.json");
  nk::write_file_bytes(bad / "noise.ckpt", "this is not a checkpoint");
  nk::write_file_bytes(bad / "noise.ckpt.json", "{\"format\": \"cbert-encoder/1\"}");
  nk::write_file_bytes(bad / "config.json", "{\"train\": {\"lr\": }");
  const model::Encoder live = model::load_encoder(dir / "a" / "finetune" / "encoder.ckpt");
  const std::string d = (dir / "data.tsv").string(), vocab = (dir / "a" / "vocab" / "vocab.txt").string();

  const auto cli_case = [&](std::vector<std::string> args) {
    return [args, bad] {
      std::vector<std::string> full{"cbert"};
      full.insert(full.end(), args.begin(), args.end());
      full.push_back("--out");
      full.push_back((bad / "run").string());
      std::ostringstream out, err;
      const int code = cli::run(full, out, err);
      for (auto cat : {ErrorCategory::dimension, ErrorCategory::index, ErrorCategory::parameter, ErrorCategory::parse,
                       ErrorCategory::checkpoint, ErrorCategory::training, ErrorCategory::io, ErrorCategory::config}) {
        if (code == exit_code_for(cat)) throw Error(cat, "cli exit " + std::to_string(code));
      }
      if (code != 0) throw std::runtime_error("uncategorized exit " + std::to_string(code));
    };
  };
  const std::vector<MalformedCase> cases{
      {"non-numeric label", ErrorCategory::parse, [&] { text::load_tsv(bad / "label.tsv"); }},
      {"missing tab", ErrorCategory::parse, [&] { text::load_tsv(bad / "tabs.tsv"); }},
      {"missing dataset", ErrorCategory::io, [&] { text::load_tsv(bad / "absent.tsv"); }},
      {"synonym line without tab", ErrorCategory::parse, [&] { aug::SynonymTable::load(bad / "syn.txt"); }},
      {"vocab without specials", ErrorCategory::parse, [&] { text::Vocabulary::load(bad / "vocab.txt"); }},
      {"truncated checkpoint", ErrorCategory::checkpoint, [&] { model::load_encoder(bad / "trunc.ckpt"); }},
      {"garbage checkpoint", ErrorCategory::checkpoint, [&] { model::load_encoder(bad / "noise.ckpt"); }},
      {"checkpoint config mismatch", ErrorCategory::checkpoint,
       [&] {
         auto cfg = live.config;
         cfg.hidden = 32;
         model::load_encoder(dir / "a" / "finetune" / "encoder.ckpt", cfg);
       }},
      {"token id out of range", ErrorCategory::index,
       [&] { model::forward(live, model::InputBatch::single(std::vector<int>{3, 999}, 0), false, nullptr); }},
      {"sequence too long", ErrorCategory::dimension,
       [&] { model::forward(live, model::InputBatch::single(std::vector<int>(40, 4), 0), false, nullptr); }},
      {"bad mask ratio", ErrorCategory::parameter, [&] { train::MaskPolicy::ratio(1.5).validate(); }},
      {"cli malformed config", ErrorCategory::config,
       cli_case({"build-vocab", "--config", (bad / "config.json").string(), "--data", d})},
      {"cli missing file", ErrorCategory::io, cli_case({"build-vocab", "--data", (bad / "absent.tsv").string()})},
      {"cli incompatible checkpoint", ErrorCategory::checkpoint,
       cli_case({"finetune", "--data", d, "--vocab", vocab, "--encoder", (bad / "trunc.ckpt").string()})},
      {"cli unknown classifier", ErrorCategory::config,
       cli_case({"train-classifier", "--data", d, "--vocab", vocab, "--classifier", "svm"})},
  };
  std::size_t categorized = 0;
  for (const auto& cs : cases) {
    std::string got;
    try {
      cs.action();
      got = "no error";
    } catch (const Error& e) {
      got = category_name(e.category());
      if (e.category() == cs.expected) {
        ++categorized;
        continue;
      }
    } catch (const std::exception& e) {
      got = std::string("uncategorized: ") + e.what();
    } catch (...) {
      got = "unknown exception";
    }
    detail("malformed input '" + cs.name + "': expected " + category_name(cs.expected) + ", got " + got);
  }
  detail("malformed inputs: " + std::to_string(categorized) + "/" + std::to_string(cases.size()) +
         " raised the expected error category");
  pass = pass && categorized == cases.size();
  return {pass, "reproducibility & formats: " + std::to_string(differing) + " differing files, round trip " +
                    (round_trip ? "bitwise" : "broken") + ", " + std::to_string(categorized) + "/" +
                    std::to_string(cases.size()) + " errors categorized"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    double limit_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{{"AC-1", 60, ac1},  {"AC-2", 60, ac2},  {"AC-3", 300, ac3}, {"AC-4", 300, ac4},
                                        {"AC-5", 900, ac5}, {"AC-6", 120, ac6}, {"AC-7", 600, ac7}};
  std::size_t failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("raised ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool ok = v.pass && in_time;
    failed += ok ? 0 : 1;
    std::cout << c.id << " " << (ok ? "PASS" : "FAIL") << "  " << v.summary << " [" << fmt("%.1f", secs) << " s of "
              << fmt("%.0f", c.limit_s) << " s" << (in_time ? "" : ", over the limit") << "]\n"
              << std::flush;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
