#include "cbert/cli/cli.h"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "cbert/augment/augment.h"
#include "cbert/augment/synonyms.h"
#include "cbert/classify/classifier.h"
#include "cbert/classify/experiment.h"
#include "cbert/common/errors.h"
#include "cbert/common/rng.h"
#include "cbert/model/encoder.h"
#include "cbert/numkernel/checkpoint.h"
#include "cbert/styletransfer/style_transfer.h"
#include "cbert/textcodec/dataset.h"
#include "cbert/textcodec/vocabulary.h"
#include "cbert/training/trainer.h"

namespace cbert::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* type_of(const json& j) {
  if (j.is_number()) return "number";
  return j.type_name();
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Flag -> config bindings. A flag only overrides when it was given.
class Overrides {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, std::vector<std::string> targets,
                      const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    bindings_.push_back({opt, std::move(targets), [value] { return json(*value); }});
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, std::vector<std::string> targets, json value,
                    const std::string& help) {
    CLI::Option* opt = app->add_flag(name, help);
    bindings_.push_back({opt, std::move(targets), [value] { return value; }});
    return opt;
  }

  void apply(json& cfg) const {
    for (const auto& b : bindings_) {
      if (b.option->count() == 0) continue;
      for (const auto& target : b.targets) cfg[json::json_pointer(target)] = b.value();
    }
  }

 private:
  struct Binding {
    CLI::Option* option;
    std::vector<std::string> targets;
    std::function<json()> value;
  };
  std::vector<Binding> bindings_;
};

struct Context {
  std::string command;
  json cfg;
  fs::path out_dir;
  std::vector<fs::path> inputs;
  std::ostream& out;

  std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }

  fs::path path(const std::string& key, const std::string& flag) {
    const std::string p = cfg.at("paths").at(key).get<std::string>();
    if (p.empty()) {
      throw ConfigError(command + " needs " + flag + " (or paths." + key + " in the config file)");
    }
    inputs.emplace_back(p);
    return p;
  }

  // Output files live in the run directory and may never alias an input.
  fs::path output(const std::string& name) const {
    const fs::path p = out_dir / name;
    std::error_code ec;
    for (const auto& in : inputs) {
      for (const fs::path& candidate : {in, fs::path(in.string() + ".json")}) {
        if (fs::exists(candidate, ec) && fs::exists(p, ec) && fs::equivalent(candidate, p, ec)) {
          throw ConfigError("output '" + p.string() + "' would overwrite input '" + candidate.string() +
                            "'; choose another --out directory");
        }
      }
    }
    return p;
  }

  void write(const std::string& name, const std::string& content) const {
    nk::write_file_bytes(output(name), content);
  }
};

template <class T>
T section(const json& cfg, const std::string& key) {
  try {
    T value = T::from_json(cfg.at(key));
    value.validate();
    return value;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("config section '" + key + "': " + e.what());
  }
}

text::Vocabulary load_vocab(Context& ctx) { return text::Vocabulary::load(ctx.path("vocab", "--vocab")); }

struct Data {
  text::TsvCorpus corpus;
  text::Dataset dataset;
};

Data load_data(Context& ctx, const text::Vocabulary& vocab, std::size_t max_len) {
  Data d;
  d.corpus = text::load_tsv(ctx.path("data", "--data"));
  for (const auto& w : d.corpus.warnings) ctx.out << "warning: " << w << "\n";
  const double val_fraction = ctx.cfg.at("val_fraction").get<double>();
  d.dataset = text::make_dataset(d.corpus, vocab, max_len, {val_fraction, derive_seed(ctx.seed(), "split")});
  return d;
}

model::Encoder load_checked_encoder(Context& ctx, const std::string& key, const std::string& flag,
                                    const text::Vocabulary& vocab) {
  const fs::path p = ctx.path(key, flag);
  model::Encoder enc = model::load_encoder(p);
  if (enc.config.vocab_size != vocab.size()) {
    throw CheckpointError("checkpoint '" + p.string() + "' has vocab_size " + std::to_string(enc.config.vocab_size) +
                          " but the vocabulary has " + std::to_string(vocab.size()) + " tokens");
  }
  return enc;
}

clf::Classifier load_checked_classifier(Context& ctx, const text::Vocabulary& vocab) {
  const fs::path p = ctx.path("classifier", "--classifier");
  clf::Classifier c = clf::load_classifier(p);
  if (c.vocab_size != vocab.size()) {
    throw CheckpointError("classifier '" + p.string() + "' has vocab_size " + std::to_string(c.vocab_size) +
                          " but the vocabulary has " + std::to_string(vocab.size()) + " tokens");
  }
  return c;
}

std::size_t max_len_of(const Context& ctx) { return ctx.cfg.at("max_len").get<std::size_t>(); }

std::string json_lines(const std::string& format, const std::vector<json>& rows) {
  std::string out = json{{"format", format}}.dump() + "\n";
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

void report_training(Context& ctx, const train::TrainResult& r) {
  for (const auto& m : r.history) {
    ctx.out << "epoch " << m.epoch << ": train_loss " << m.train_loss << " val_loss " << m.val_loss
            << " val_acc " << m.val_accuracy << "\n";
  }
  ctx.out << "best epoch " << r.best_epoch << "\n";
}

void cmd_build_vocab(Context& ctx) {
  const text::TsvCorpus corpus = text::load_tsv(ctx.path("data", "--data"));
  std::vector<std::string> texts;
  for (const auto& r : corpus.records) texts.push_back(r.text);
  const text::Vocabulary vocab =
      text::build_vocab_from_texts(texts, ctx.cfg.at("vocab").at("min_freq").get<std::size_t>(),
                                   ctx.cfg.at("vocab").at("max_size").get<std::size_t>());
  vocab.save(ctx.output("vocab.txt"));
  ctx.out << "vocabulary: " << vocab.size() << " tokens -> " << (ctx.out_dir / "vocab.txt").string() << "\n";
}

void cmd_pretrain(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  json enc_json = ctx.cfg.at("encoder");
  const std::size_t given = enc_json.at("vocab_size").get<std::size_t>();
  if (given != 0 && given != vocab.size()) {
    throw ConfigError("encoder.vocab_size is " + std::to_string(given) + " but the vocabulary has " +
                      std::to_string(vocab.size()) + " tokens; leave it 0 to use the vocabulary");
  }
  enc_json["vocab_size"] = vocab.size();
  json patched = ctx.cfg;
  patched["encoder"] = enc_json;
  const auto config = section<model::EncoderConfig>(patched, "encoder");
  const auto policy = section<train::MaskPolicy>(ctx.cfg, "mask");
  const auto tc = section<train::TrainConfig>(ctx.cfg, "train");
  const Data data = load_data(ctx, vocab, config.max_len);
  train::MetricsLog log;
  const train::TrainResult r = train::pretrain_mlm(data.dataset, config, policy, tc, &log);
  report_training(ctx, r);
  model::save_encoder(r.encoder, ctx.output("encoder.ckpt"));
  log.save(ctx.output("metrics.jsonl"));
}

void cmd_finetune(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  const model::Encoder start = load_checked_encoder(ctx, "encoder", "--encoder", vocab);
  const auto policy = section<train::MaskPolicy>(ctx.cfg, "mask");
  const auto tc = section<train::TrainConfig>(ctx.cfg, "train");
  const Data data = load_data(ctx, vocab, start.config.max_len);
  train::MetricsLog log;
  const train::TrainResult r = train::finetune_cmlm(data.dataset, start, policy, tc, &log);
  report_training(ctx, r);
  model::save_encoder(r.encoder, ctx.output("encoder.ckpt"));
  log.save(ctx.output("metrics.jsonl"));
}

void cmd_augment(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  const std::string name = ctx.cfg.at("augmenter").get<std::string>();
  const auto policy = section<aug::AugmentationPolicy>(ctx.cfg, "augment");
  aug::AugmentResult result;
  std::size_t max_len = max_len_of(ctx);
  if (name == "cbert" || name == "bert") {
    const model::Encoder enc = load_checked_encoder(ctx, "encoder", "--encoder", vocab);
    max_len = enc.config.max_len;
    const Data data = load_data(ctx, vocab, max_len);
    if (name == "cbert") {
      if (static_cast<std::size_t>(data.dataset.num_labels) > enc.config.num_conditions) {
        throw CheckpointError("conditional encoder has " + std::to_string(enc.config.num_conditions) +
                              " condition rows but the dataset has " + std::to_string(data.dataset.num_labels) +
                              " labels; run finetune on this dataset first");
      }
      result = aug::augment_dataset(enc, data.dataset, policy);
    } else {
      result = aug::augment_with(
          data.dataset, [&](const text::LabeledExample& ex, Rng& rng) { return aug::bert_augment(enc, ex, policy, rng); },
          policy.multiplier, policy.seed);
    }
    ctx.write("augmented.tsv", aug::render_augmented_tsv(data.corpus, vocab, max_len, result, name));
  } else if (name == "synonym") {
    const aug::SynonymTable table = aug::SynonymTable::load(ctx.path("synonyms", "--synonyms"));
    const aug::BoundSynonyms bound = aug::bind_synonyms(table, vocab);
    if (bound.dropped > 0) ctx.out << "synonyms: " << bound.dropped << " entries outside the vocabulary dropped\n";
    const Data data = load_data(ctx, vocab, max_len);
    result = aug::augment_with(
        data.dataset,
        [&](const text::LabeledExample& ex, Rng& rng) { return aug::synonym_augment(ex, bound, policy.k, rng); },
        policy.multiplier, policy.seed);
    ctx.write("augmented.tsv", aug::render_augmented_tsv(data.corpus, vocab, max_len, result, name));
  } else {
    throw ConfigError("unknown augmenter '" + name + "' (expected cbert, bert or synonym)");
  }

  std::set<std::size_t> produced;
  for (const auto& g : result.generated) produced.insert(g.source);
  std::vector<std::size_t> never;
  for (std::size_t i : result.dataset.indices(text::Split::train)) {
    if (i < result.dataset.size() - result.generated.size() && produced.count(i) == 0) never.push_back(i);
  }
  const json report{{"format", "cbert-augment-report/1"},
                    {"augmenter", name},
                    {"attempted", result.attempted},
                    {"generated", result.generated.size()},
                    {"skipped", result.skipped},
                    {"fallbacks", result.fallbacks},
                    {"sources_without_output", never}};
  ctx.write("augment_report.json", report.dump(2) + "\n");
  ctx.out << "augment: " << result.generated.size() << " generated, " << result.skipped << " of "
          << result.attempted << " attempts skipped, " << result.fallbacks << " fallbacks\n";
  if (result.generated.empty()) {
    ctx.out << "no augmentations produced: every sentence was skipped (too few replaceable tokens for k="
            << policy.k << "); see augment_report.json\n";
  }
}

clf::TrainedClassifier fit_classifier(const Context& ctx, const text::Dataset& data) {
  const clf::ClassifierKind kind = clf::parse_kind(ctx.cfg.at("classifier").get<std::string>());
  clf::GridSpec grid;
  grid.lrs = ctx.cfg.at("grid").at("lrs").get<std::vector<double>>();
  grid.dropouts = ctx.cfg.at("grid").at("dropouts").get<std::vector<double>>();
  const bool use_grid = !grid.lrs.empty() || !grid.dropouts.empty();
  if (kind == clf::ClassifierKind::cnn) {
    const auto c = section<clf::CnnConfig>(ctx.cfg, "cnn");
    return use_grid ? clf::train_cnn_grid(data, c, grid) : clf::train_cnn(data, c);
  }
  const auto c = section<clf::RnnConfig>(ctx.cfg, "rnn");
  return use_grid ? clf::train_rnn_grid(data, c, grid) : clf::train_rnn(data, c);
}

void print_report(Context& ctx, const clf::EvalReport& report) {
  for (const auto& s : report.splits) {
    ctx.out << text::split_name(s.split) << ": " << s.correct << "/" << s.total << " = " << s.accuracy << "\n";
  }
}

void cmd_train_classifier(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  const Data data = load_data(ctx, vocab, max_len_of(ctx));
  const clf::TrainedClassifier t = fit_classifier(ctx, data.dataset);
  print_report(ctx, t.report);
  clf::save_classifier(t.classifier, ctx.output("classifier.ckpt"));
  const json report{{"format", "cbert-classifier-report/1"},
                    {"kind", clf::kind_name(t.classifier.kind)},
                    {"config", t.classifier.kind == clf::ClassifierKind::cnn ? t.classifier.cnn.to_json()
                                                                            : t.classifier.rnn.to_json()},
                    {"report", t.report.to_json()},
                    {"val_history", t.val_history}};
  ctx.write("report.json", report.dump(2) + "\n");
}

void cmd_eval(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  const clf::Classifier c = load_checked_classifier(ctx, vocab);
  const Data data = load_data(ctx, vocab, max_len_of(ctx));
  clf::EvalReport report;
  report.seed = ctx.seed();
  for (text::Split s : {text::Split::train, text::Split::val, text::Split::test}) {
    if (data.dataset.count(s) > 0) report.splits.push_back(clf::evaluate(c, data.dataset, s));
  }
  print_report(ctx, report);
  json j = report.to_json();
  ctx.write("eval.json", json{{"format", "cbert-eval/1"}, {"splits", j["splits"]}}.dump(2) + "\n");
}

void cmd_ab_experiment(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  const auto arms = ctx.cfg.at("arms").get<std::vector<std::string>>();
  const auto seeds = ctx.cfg.at("seeds").get<std::vector<std::uint64_t>>();
  const auto wants = [&](const char* arm) { return std::find(arms.begin(), arms.end(), arm) != arms.end(); };
  std::size_t max_len = max_len_of(ctx);
  std::optional<model::Encoder> cond, uncond;
  std::optional<aug::BoundSynonyms> synonyms;
  if (wants("cbert")) {
    cond = load_checked_encoder(ctx, "encoder", "--encoder", vocab);
    max_len = std::min(max_len, cond->config.max_len);
  }
  if (wants("bert")) {
    uncond = load_checked_encoder(ctx, "unconditional", "--unconditional", vocab);
    max_len = std::min(max_len, uncond->config.max_len);
  }
  if (wants("synonym")) synonyms = aug::bind_synonyms(aug::SynonymTable::load(ctx.path("synonyms", "--synonyms")), vocab);
  const Data data = load_data(ctx, vocab, max_len);

  clf::ExperimentInputs in;
  in.dataset = &data.dataset;
  in.conditional = cond ? &*cond : nullptr;
  in.unconditional = uncond ? &*uncond : nullptr;
  in.synonyms = synonyms ? &*synonyms : nullptr;
  in.policy = section<aug::AugmentationPolicy>(ctx.cfg, "augment");
  in.kind = clf::parse_kind(ctx.cfg.at("classifier").get<std::string>());
  in.cnn = section<clf::CnnConfig>(ctx.cfg, "cnn");
  in.rnn = section<clf::RnnConfig>(ctx.cfg, "rnn");
  in.cv_folds = ctx.cfg.at("cv_folds").get<std::size_t>();
  const clf::ComparisonTable table = clf::ab_experiment(in, arms, seeds);
  const std::string text = table.render_text();
  ctx.out << text;
  ctx.write("comparison.txt", text);
  ctx.write("comparison.jsonl", table.render_records());
}

void cmd_style_transfer(Context& ctx) {
  const text::Vocabulary vocab = load_vocab(ctx);
  const model::Encoder enc = load_checked_encoder(ctx, "encoder", "--encoder", vocab);
  const clf::Classifier c = load_checked_classifier(ctx, vocab);
  const Data data = load_data(ctx, vocab, enc.config.max_len);
  const int target = ctx.cfg.at("target_label").get<int>();
  const std::size_t top_m = ctx.cfg.at("top_m").get<std::size_t>();
  const std::string split_name = ctx.cfg.at("transfer_split").get<std::string>();
  std::optional<text::Split> only;
  if (split_name != "all") {
    only = text::parse_split(split_name);
    if (!only) throw ConfigError("transfer_split must be all, train, val or test, got '" + split_name + "'");
  }

  std::vector<style::StylePair> pairs;
  std::vector<json> rows;
  std::vector<std::vector<int>> generated;
  for (std::size_t i = 0; i < data.dataset.size(); ++i) {
    const auto& ex = data.dataset.examples[i];
    if (ex.label == target || (only && data.dataset.splits[i] != *only)) continue;
    const style::TransferResult r = style::transfer_style(enc, c, ex, target, top_m);
    for (const auto& w : r.warnings) ctx.out << "warning: example " << i << ": " << w << "\n";
    pairs.push_back({text::decode(ex.tokens, vocab), text::decode(r.example.tokens, vocab)});
    rows.push_back({{"source", i}, {"label", ex.label}, {"target", target}, {"positions", r.positions},
                    {"original", pairs.back().original}, {"generated", pairs.back().generated}});
    generated.push_back(r.example.tokens);
  }
  if (pairs.empty()) {
    throw ParameterError("style-transfer: no examples with a label other than " + std::to_string(target) +
                         " in split '" + split_name + "'");
  }
  const auto predicted = clf::predict(c, generated);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r]["predicted"] = predicted[r];
    hits += predicted[r] == target ? 1 : 0;
  }
  ctx.write("pairs.txt", style::render_pairs(pairs));
  ctx.write("transfer.jsonl", json_lines("cbert-transfer/1", rows));
  ctx.out << "style-transfer: classifier predicts label " << target << " on " << hits << " of " << rows.size()
          << " rewritten sentences\n";
}

json load_config_file(const fs::path& path) {
  const std::string bytes = nk::read_file_bytes(path);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file '" + path.string() + "' must hold a JSON object");
  return j;
}

}  // namespace

json default_run_config() {
  json j;
  j["seed"] = 0;
  j["max_len"] = 64;
  j["val_fraction"] = 0.1;
  j["vocab"] = {{"min_freq", 1}, {"max_size", 30000}};
  j["encoder"] = model::EncoderConfig{}.to_json();
  j["mask"] = train::MaskPolicy{}.to_json();
  j["train"] = train::TrainConfig{}.to_json();
  j["augment"] = aug::AugmentationPolicy{}.to_json();
  j["augmenter"] = "cbert";
  j["classifier"] = "cnn";
  j["cnn"] = clf::CnnConfig{}.to_json();
  j["rnn"] = clf::RnnConfig{}.to_json();
  j["grid"] = {{"lrs", json::array()}, {"dropouts", json::array()}};
  j["arms"] = clf::known_arms();
  j["seeds"] = {1, 2, 3, 4, 5};
  j["cv_folds"] = 0;
  j["target_label"] = 0;
  j["top_m"] = 1;
  j["transfer_split"] = "all";
  j["paths"] = {{"data", ""}, {"vocab", ""}, {"encoder", ""}, {"unconditional", ""}, {"classifier", ""},
                {"synonyms", ""}};
  return j;
}

json merge_config(const json& base, const json& overrides, const std::string& where) {
  if (!overrides.is_object()) throw ConfigError(where + ": expected an object");
  json out = base;
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    const json& def = base.at(it.key());
    if (def.is_object()) {
      out[it.key()] = merge_config(def, it.value(), key);
    } else if (!same_kind(def, it.value())) {
      throw ConfigError("config key '" + key + "' should be a " + type_of(def) + ", got " + type_of(it.value()));
    } else {
      out[it.key()] = it.value();
    }
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cbert: conditional masked language model augmentation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cbert 1.0");

  struct Sub {
    CLI::App* app;
    std::function<void(Context&)> body;
  };
  std::vector<Sub> subs;
  Overrides ov;
  std::string config_path;
  std::string out_dir;

  const auto add = [&](const std::string& name, const std::string& help, std::function<void(Context&)> body) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file; flags override it");
    sub->add_option("--out", out_dir, "run directory for outputs")->required();
    ov.option<std::uint64_t>(sub, "--seed", {"/seed"}, "root seed for every random stream");
    subs.push_back({sub, std::move(body)});
    return sub;
  };
  const auto data_flags = [&](CLI::App* s, bool with_vocab) {
    ov.option<std::string>(s, "--data", {"/paths/data"}, "dataset TSV");
    if (with_vocab) ov.option<std::string>(s, "--vocab", {"/paths/vocab"}, "vocabulary file");
    ov.option<double>(s, "--val-fraction", {"/val_fraction"}, "share of unsplit records held out for validation");
  };
  const auto max_len_flag = [&](CLI::App* s) {
    ov.option<std::size_t>(s, "--max-len", {"/max_len"}, "token limit per sentence, CLS included");
  };
  const auto mask_flags = [&](CLI::App* s) {
    ov.option<std::string>(s, "--mask-mode", {"/mask/mode"}, "ratio or fixed_k");
    ov.option<double>(s, "--mask-ratio", {"/mask/p_mask"}, "masking probability in ratio mode");
    ov.option<std::size_t>(s, "--mask-k", {"/mask/k"}, "masked tokens per sentence in fixed_k mode");
  };
  const auto train_flags = [&](CLI::App* s) {
    ov.option<std::size_t>(s, "--epochs", {"/train/epochs"}, "maximum epochs");
    ov.option<std::size_t>(s, "--batch-size", {"/train/batch_size"}, "sentences per step");
    ov.option<double>(s, "--lr", {"/train/lr"}, "Adam learning rate");
    ov.option<std::size_t>(s, "--patience", {"/train/patience"}, "early-stopping patience in epochs");
    ov.option<double>(s, "--clip-norm", {"/train/clip_norm"}, "gradient norm cap, 0 disables");
  };
  const auto aug_flags = [&](CLI::App* s) {
    ov.option<std::size_t>(s, "--k", {"/augment/k"}, "words replaced per generated sentence");
    ov.option<std::string>(s, "--sampler", {"/augment/sampler"}, "greedy or top_k");
    ov.option<std::size_t>(s, "--top-k", {"/augment/top_k"}, "candidates kept by the top_k sampler");
    ov.option<double>(s, "--temperature", {"/augment/temperature"}, "sampling temperature");
    ov.option<std::size_t>(s, "--multiplier", {"/augment/multiplier"}, "generation passes over the train split");
    ov.flag(s, "--keep-original", {"/augment/exclude_original"}, false, "allow the original word as a substitute");
  };
  const auto clf_flags = [&](CLI::App* s) {
    ov.option<std::string>(s, "--classifier", {"/classifier"}, "cnn or rnn");
    ov.option<std::size_t>(s, "--clf-epochs", {"/cnn/epochs", "/rnn/epochs"}, "classifier epochs");
    ov.option<double>(s, "--clf-lr", {"/cnn/lr", "/rnn/lr"}, "classifier learning rate");
    ov.option<double>(s, "--clf-dropout", {"/cnn/dropout", "/rnn/dropout"}, "classifier dropout");
    ov.option<std::size_t>(s, "--clf-batch-size", {"/cnn/batch_size", "/rnn/batch_size"}, "classifier batch");
    ov.option<std::size_t>(s, "--clf-patience", {"/cnn/patience", "/rnn/patience"}, "classifier patience");
  };

  CLI::App* s = add("build-vocab", "build a vocabulary from a TSV dataset", cmd_build_vocab);
  ov.option<std::string>(s, "--data", {"/paths/data"}, "dataset TSV");
  ov.option<std::size_t>(s, "--min-freq", {"/vocab/min_freq"}, "minimum token count");
  ov.option<std::size_t>(s, "--max-size", {"/vocab/max_size"}, "maximum vocabulary size, specials included");

  s = add("pretrain", "train an unconditional masked language model", cmd_pretrain);
  data_flags(s, true);
  ov.option<std::size_t>(s, "--layers", {"/encoder/layers"}, "transformer layers");
  ov.option<std::size_t>(s, "--hidden", {"/encoder/hidden"}, "hidden width");
  ov.option<std::size_t>(s, "--heads", {"/encoder/heads"}, "attention heads");
  ov.option<std::size_t>(s, "--ffn", {"/encoder/ffn"}, "feed-forward width");
  ov.option<std::size_t>(s, "--max-len", {"/encoder/max_len"}, "maximum sequence length");
  ov.option<double>(s, "--dropout", {"/encoder/dropout"}, "encoder dropout");
  mask_flags(s);
  train_flags(s);

  s = add("finetune", "fine-tune a checkpoint as a label-conditional model", cmd_finetune);
  data_flags(s, true);
  ov.option<std::string>(s, "--encoder", {"/paths/encoder"}, "pretrained checkpoint");
  mask_flags(s);
  train_flags(s);

  s = add("augment", "generate label-compatible variants of the train split", cmd_augment);
  data_flags(s, true);
  max_len_flag(s);
  ov.option<std::string>(s, "--augmenter", {"/augmenter"}, "cbert, bert or synonym");
  ov.option<std::string>(s, "--encoder", {"/paths/encoder"}, "model checkpoint for cbert or bert");
  ov.option<std::string>(s, "--synonyms", {"/paths/synonyms"}, "synonym table for the synonym augmenter");
  aug_flags(s);

  s = add("train-classifier", "train a CNN or LSTM sentence classifier", cmd_train_classifier);
  data_flags(s, true);
  max_len_flag(s);
  clf_flags(s);
  ov.option<std::vector<double>>(s, "--grid-lrs", {"/grid/lrs"}, "learning rates to search")->delimiter(',');
  ov.option<std::vector<double>>(s, "--grid-dropouts", {"/grid/dropouts"}, "dropouts to search")->delimiter(',');

  s = add("eval", "evaluate a classifier on every split present", cmd_eval);
  data_flags(s, true);
  max_len_flag(s);
  ov.option<std::string>(s, "--classifier", {"/paths/classifier"}, "classifier checkpoint");

  s = add("ab-experiment", "compare augmenters on downstream accuracy", cmd_ab_experiment);
  data_flags(s, true);
  max_len_flag(s);
  ov.option<std::string>(s, "--encoder", {"/paths/encoder"}, "conditional checkpoint (cbert arm)");
  ov.option<std::string>(s, "--unconditional", {"/paths/unconditional"}, "unconditional checkpoint (bert arm)");
  ov.option<std::string>(s, "--synonyms", {"/paths/synonyms"}, "synonym table (synonym arm)");
  ov.option<std::vector<std::string>>(s, "--arms", {"/arms"}, "augmenters to compare")->delimiter(',');
  ov.option<std::vector<std::uint64_t>>(s, "--seeds", {"/seeds"}, "run seeds")->delimiter(',');
  ov.option<std::size_t>(s, "--cv-folds", {"/cv_folds"}, "cross-validation folds, 0 uses the dataset splits");
  aug_flags(s);
  clf_flags(s);

  s = add("style-transfer", "rewrite sentences toward another label", cmd_style_transfer);
  data_flags(s, true);
  ov.option<std::string>(s, "--encoder", {"/paths/encoder"}, "conditional checkpoint");
  ov.option<std::string>(s, "--classifier", {"/paths/classifier"}, "classifier checkpoint used for attribution");
  ov.option<int>(s, "--target-label", {"/target_label"}, "label to transfer to");
  ov.option<std::size_t>(s, "--top-m", {"/top_m"}, "words rewritten per sentence");
  ov.option<std::string>(s, "--split", {"/transfer_split"}, "all, train, val or test");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_code_for(ErrorCategory::config);
  }

  const auto chosen = std::find_if(subs.begin(), subs.end(), [](const Sub& sub) { return sub.app->parsed(); });
  Context ctx{chosen->app->get_name(), default_run_config(), out_dir, {}, out};
  try {
    if (!config_path.empty()) {
      ctx.cfg = merge_config(ctx.cfg, load_config_file(config_path), "");
      ctx.inputs.emplace_back(config_path);
    }
    ov.apply(ctx.cfg);
    // After flags, so a mistyped flag value is reported like a config error.
    ctx.cfg = merge_config(default_run_config(), ctx.cfg, "");
    const std::uint64_t seed = ctx.seed();
    for (const char* key : {"train", "augment", "cnn", "rnn"}) ctx.cfg[key]["seed"] = seed;

    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create run directory '" + ctx.out_dir.string() + "': " + ec.message());
    ctx.write("run_config.json",
              json{{"format", kRunFormat}, {"subcommand", ctx.command}, {"seed", seed}, {"config", ctx.cfg}}.dump(2) +
                  "\n");
    chosen->body(ctx);
    out << "outputs in " << ctx.out_dir.string() << "\n";
    return 0;
  } catch (const Error& e) {
    err << "error [" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const json::exception& e) {
    err << "error [config]: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::config);
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cbert::cli
