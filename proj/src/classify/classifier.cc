#include "cbert/classify/classifier.h"

#include <algorithm>
#include <limits>
#include <cmath>

#include "cbert/common/errors.h"
#include "cbert/numkernel/adam.h"
#include "cbert/numkernel/checkpoint.h"
#include "cbert/numkernel/ops.h"
#include "cbert/textcodec/vocabulary.h"

namespace cbert::clf {
namespace {

constexpr const char* kSidecarFormat = "cbert-classifier/1";
constexpr std::size_t kEvalBatch = 64;

Tensor normal_param(nk::Shape shape, double scale, Rng& rng) {
  std::vector<double> values(nk::shape_numel(shape));
  for (double& v : values) v = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor dense_param(std::size_t in, std::size_t out, Rng& rng) {
  return normal_param({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

void check_positive(std::size_t v, const char* what) {
  if (v == 0) throw ParameterError(std::string("classifier config: ") + what + " must be positive");
}

void check_common(double dropout, double lr, std::size_t epochs, std::size_t batch, std::size_t patience) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("classifier config: dropout must lie in [0, 1)");
  if (!(lr > 0.0)) throw ParameterError("classifier config: lr must be positive");
  check_positive(epochs, "epochs");
  check_positive(batch, "batch_size");
  check_positive(patience, "patience");
}

// Right-pads rows to at least `min_len`; lengths include CLS.
struct Packed {
  std::size_t batch = 0, length = 0;
  std::vector<int> ids;
  std::vector<std::size_t> lengths;
};

Packed pack_rows(const std::vector<std::vector<int>>& rows, std::size_t min_len) {
  Packed p;
  p.batch = rows.size();
  p.length = min_len;
  for (const auto& r : rows) {
    if (r.empty()) throw DimensionError("classifier: empty token sequence");
    p.length = std::max(p.length, r.size());
  }
  p.ids.assign(p.batch * p.length, text::kPadId);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    std::copy(rows[b].begin(), rows[b].end(), p.ids.begin() + static_cast<std::ptrdiff_t>(b * p.length));
    p.lengths.push_back(rows[b].size());
  }
  return p;
}

Tensor cnn_logits(const Classifier& c, const std::vector<std::vector<int>>& rows, bool train, Rng& rng) {
  const CnnConfig& cfg = c.cnn;
  const std::size_t max_width = *std::max_element(cfg.widths.begin(), cfg.widths.end());
  const Packed p = pack_rows(rows, max_width);
  Tensor x = nk::reshape(nk::embedding_lookup(c.param("emb"), p.ids), {p.batch, p.length, cfg.embed});
  std::vector<Tensor> pooled;
  for (std::size_t w : cfg.widths) {
    const std::string name = "conv" + std::to_string(w);
    Tensor windows = nk::unfold_windows(x, w);
    Tensor features = nk::relu(nk::add_bias(nk::matmul(windows, c.param(name + ".w")), c.param(name + ".b")));
    // A window is real when it lies inside the sentence; sentences shorter
    // than the width keep their single padded window.
    const std::size_t positions = p.length - w + 1;
    std::vector<std::uint8_t> valid(p.batch * positions, 0);
    for (std::size_t b = 0; b < p.batch; ++b) {
      const std::size_t span = std::max(p.lengths[b], w);
      for (std::size_t j = 0; j + w <= span; ++j) valid[b * positions + j] = 1;
    }
    pooled.push_back(nk::max_over_time(features, valid));
  }
  Tensor features = pooled.size() == 1 ? pooled[0] : nk::concat_last(pooled);
  Tensor hidden = nk::relu(nk::add_bias(nk::matmul(features, c.param("fc1.w")), c.param("fc1.b")));
  hidden = nk::dropout(hidden, cfg.dropout, rng, train);
  return nk::add_bias(nk::matmul(hidden, c.param("fc2.w")), c.param("fc2.b"));
}

Tensor rnn_logits(const Classifier& c, const std::vector<std::vector<int>>& rows, bool train, Rng& rng) {
  const RnnConfig& cfg = c.rnn;
  const Packed p = pack_rows(rows, 1);
  Tensor x = nk::reshape(nk::embedding_lookup(c.param("emb"), p.ids), {p.batch, p.length, cfg.embed});
  x = nk::dropout(x, cfg.dropout, rng, train);
  LstmState state{Tensor::zeros({p.batch, cfg.state}), Tensor::zeros({p.batch, cfg.state})};
  for (std::size_t t = 0; t < p.length; ++t) {
    LstmState next = lstm_step(c, nk::time_step(x, t), state);
    bool all_real = true;
    std::vector<double> keep(p.batch * cfg.state), hold(p.batch * cfg.state);
    for (std::size_t b = 0; b < p.batch; ++b) {
      const double m = t < p.lengths[b] ? 1.0 : 0.0;
      all_real = all_real && m == 1.0;
      std::fill_n(keep.begin() + static_cast<std::ptrdiff_t>(b * cfg.state), cfg.state, m);
      std::fill_n(hold.begin() + static_cast<std::ptrdiff_t>(b * cfg.state), cfg.state, 1.0 - m);
    }
    if (all_real) {
      state = next;
      continue;
    }
    // Finished rows carry their state forward unchanged.
    const Tensor k = Tensor::from({p.batch, cfg.state}, std::move(keep));
    const Tensor h = Tensor::from({p.batch, cfg.state}, std::move(hold));
    state.h = nk::add(nk::mul(k, next.h), nk::mul(h, state.h));
    state.c = nk::add(nk::mul(k, next.c), nk::mul(h, state.c));
  }
  Tensor last = nk::dropout(state.h, cfg.dropout, rng, train);
  return nk::add_bias(nk::matmul(last, c.param("out.w")), c.param("out.b"));
}

void validate_dataset(const Classifier& c, const Dataset& dataset) {
  if (dataset.vocab_size != 0 && dataset.vocab_size != c.vocab_size) {
    throw ParameterError("classifier: vocabulary mismatch (classifier has " + std::to_string(c.vocab_size) +
                         " tokens, dataset " + std::to_string(dataset.vocab_size) + ")");
  }
  if (dataset.num_labels > c.num_labels) {
    throw ParameterError("classifier: dataset has " + std::to_string(dataset.num_labels) +
                         " labels, classifier " + std::to_string(c.num_labels));
  }
}

struct LoopSettings {
  double lr;
  std::size_t epochs, batch_size, patience;
  std::uint64_t seed;
};

// Mean cross-entropy over the validation split, eval mode.
double validation_loss(const Classifier& model, const Dataset& dataset) {
  const auto idx = dataset.indices(Split::val);
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += 64) {
    std::vector<std::vector<int>> rows;
    std::vector<int> labels;
    for (std::size_t i = start; i < std::min(idx.size(), start + 64); ++i) {
      rows.push_back(dataset.examples[idx[i]].tokens);
      labels.push_back(dataset.examples[idx[i]].label);
    }
    const auto ce = nk::cross_entropy(classifier_logits(model, rows, false, nullptr), labels, -1);
    total += ce.loss.item() * static_cast<double>(ce.count);
  }
  return total / static_cast<double>(idx.size());
}

TrainedClassifier train_loop(Classifier model, const Dataset& dataset, const LoopSettings& s) {
  dataset.validate();
  const auto train_idx = dataset.indices(Split::train);
  if (train_idx.empty()) throw ParameterError("classifier: dataset has no training examples");
  if (dataset.count(Split::val) == 0) throw ParameterError("classifier: dataset has no validation examples");

  nk::Adam optimizer(model.tensors(), s.lr);
  TrainedClassifier out{model.clone(), {}, {}};
  double best = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t epochs_used = 0;
  for (std::size_t epoch = 1; epoch <= s.epochs; ++epoch) {
    epochs_used = epoch;
    std::vector<std::size_t> order = train_idx;
    Rng shuffle_rng = derive_rng(s.seed, "clf-shuffle", epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    Rng drop_rng = derive_rng(s.seed, "clf-dropout", epoch);
    for (std::size_t start = 0; start < order.size(); start += s.batch_size) {
      std::vector<std::vector<int>> rows;
      std::vector<int> labels;
      for (std::size_t i = start; i < std::min(order.size(), start + s.batch_size); ++i) {
        rows.push_back(dataset.examples[order[i]].tokens);
        labels.push_back(dataset.examples[order[i]].label);
      }
      auto ce = nk::cross_entropy(classifier_logits(model, rows, true, &drop_rng), labels, -1);
      if (!std::isfinite(ce.loss.item())) {
        throw TrainingError("classifier: non-finite loss in epoch " + std::to_string(epoch));
      }
      optimizer.zero_grad();
      ce.loss.backward();
      optimizer.step();
    }
    const double acc = evaluate(model, dataset, Split::val).accuracy;
    out.val_history.push_back(acc);
    // accuracy saturates quickly on easy data; equal accuracy at lower
    // validation loss still counts as progress
    const double loss = validation_loss(model, dataset);
    if (acc > best || (acc == best && loss < best_loss)) {
      best = acc;
      best_loss = loss;
      out.classifier = model.clone();
      out.report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= s.patience) {
      break;
    }
  }
  out.report.epochs_used = epochs_used;
  out.report.seed = s.seed;
  for (Split split : {Split::train, Split::val, Split::test}) {
    if (dataset.count(split) > 0) out.report.splits.push_back(evaluate(out.classifier, dataset, split));
  }
  return out;
}

template <typename Config, typename Train>
TrainedClassifier grid_search(const Dataset& dataset, const Config& base, const GridSpec& grid, Train train) {
  const std::vector<double> lrs = grid.lrs.empty() ? std::vector<double>{base.lr} : grid.lrs;
  const std::vector<double> drops = grid.dropouts.empty() ? std::vector<double>{base.dropout} : grid.dropouts;
  std::optional<TrainedClassifier> best;
  double best_acc = -1.0;
  for (double lr : lrs) {
    for (double dropout : drops) {
      Config cfg = base;
      cfg.lr = lr;
      cfg.dropout = dropout;
      TrainedClassifier t = train(dataset, cfg);
      const double acc = t.report.find(Split::val)->accuracy;
      if (acc > best_acc) {
        best_acc = acc;
        best = std::move(t);
      }
    }
  }
  return std::move(*best);
}

}  // namespace

const char* kind_name(ClassifierKind kind) { return kind == ClassifierKind::cnn ? "cnn" : "rnn"; }

ClassifierKind parse_kind(const std::string& name) {
  if (name == "cnn") return ClassifierKind::cnn;
  if (name == "rnn" || name == "lstm") return ClassifierKind::rnn;
  throw ConfigError("unknown classifier kind '" + name + "' (expected cnn or rnn)");
}

void CnnConfig::validate() const {
  if (widths.empty()) throw ParameterError("cnn config: at least one filter width");
  for (std::size_t w : widths) check_positive(w, "filter widths");
  check_positive(filters, "filters");
  check_positive(embed, "embed");
  check_positive(hidden, "hidden");
  check_common(dropout, lr, epochs, batch_size, patience);
}

nlohmann::json CnnConfig::to_json() const {
  return {{"widths", widths}, {"filters", filters}, {"embed", embed}, {"hidden", hidden},
          {"dropout", dropout}, {"lr", lr}, {"epochs", epochs}, {"batch_size", batch_size},
          {"patience", patience}, {"seed", seed}};
}

CnnConfig CnnConfig::from_json(const nlohmann::json& j) {
  CnnConfig c;
  try {
    c.widths = j.value("widths", c.widths);
    c.filters = j.value("filters", c.filters);
    c.embed = j.value("embed", c.embed);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cnn config: ") + e.what());
  }
  c.validate();
  return c;
}

void RnnConfig::validate() const {
  check_positive(embed, "embed");
  check_positive(state, "state");
  check_common(dropout, lr, epochs, batch_size, patience);
}

nlohmann::json RnnConfig::to_json() const {
  return {{"embed", embed}, {"state", state}, {"dropout", dropout}, {"lr", lr}, {"epochs", epochs},
          {"batch_size", batch_size}, {"patience", patience}, {"seed", seed}};
}

RnnConfig RnnConfig::from_json(const nlohmann::json& j) {
  RnnConfig c;
  try {
    c.embed = j.value("embed", c.embed);
    c.state = j.value("state", c.state);
    c.dropout = j.value("dropout", c.dropout);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("rnn config: ") + e.what());
  }
  c.validate();
  return c;
}

const Tensor& Classifier::param(const std::string& name) const {
  for (const auto& [n, t] : params) {
    if (n == name) return t;
  }
  throw ParameterError("classifier has no parameter '" + name + "'");
}

std::vector<Tensor> Classifier::tensors() const {
  std::vector<Tensor> out;
  for (const auto& [n, t] : params) out.push_back(t);
  return out;
}

Classifier Classifier::clone() const {
  Classifier c = *this;
  for (auto& [n, t] : c.params) t = t.detach(true);
  return c;
}

Classifier init_cnn(const CnnConfig& config, std::size_t vocab_size, int num_labels, Rng& rng) {
  config.validate();
  if (vocab_size == 0 || num_labels < 1) throw ParameterError("classifier: empty vocabulary or no labels");
  Classifier c;
  c.kind = ClassifierKind::cnn;
  c.cnn = config;
  c.vocab_size = vocab_size;
  c.num_labels = num_labels;
  c.params.push_back({"emb", normal_param({vocab_size, config.embed}, 0.1, rng)});
  for (std::size_t w : config.widths) {
    const std::string name = "conv" + std::to_string(w);
    c.params.push_back({name + ".w", dense_param(w * config.embed, config.filters, rng)});
    c.params.push_back({name + ".b", Tensor::zeros({config.filters}, true)});
  }
  c.params.push_back({"fc1.w", dense_param(config.filters * config.widths.size(), config.hidden, rng)});
  c.params.push_back({"fc1.b", Tensor::zeros({config.hidden}, true)});
  c.params.push_back({"fc2.w", dense_param(config.hidden, static_cast<std::size_t>(num_labels), rng)});
  c.params.push_back({"fc2.b", Tensor::zeros({static_cast<std::size_t>(num_labels)}, true)});
  return c;
}

Classifier init_rnn(const RnnConfig& config, std::size_t vocab_size, int num_labels, Rng& rng) {
  config.validate();
  if (vocab_size == 0 || num_labels < 1) throw ParameterError("classifier: empty vocabulary or no labels");
  Classifier c;
  c.kind = ClassifierKind::rnn;
  c.rnn = config;
  c.vocab_size = vocab_size;
  c.num_labels = num_labels;
  const std::size_t s = config.state;
  c.params.push_back({"emb", normal_param({vocab_size, config.embed}, 0.1, rng)});
  c.params.push_back({"lstm.wx", dense_param(config.embed, 4 * s, rng)});
  c.params.push_back({"lstm.wh", dense_param(s, 4 * s, rng)});
  // Gate order i, f, g, o; forget bias starts at 1.
  std::vector<double> bias(4 * s, 0.0);
  std::fill_n(bias.begin() + static_cast<std::ptrdiff_t>(s), s, 1.0);
  c.params.push_back({"lstm.b", Tensor::from({4 * s}, std::move(bias), true)});
  c.params.push_back({"out.w", dense_param(s, static_cast<std::size_t>(num_labels), rng)});
  c.params.push_back({"out.b", Tensor::zeros({static_cast<std::size_t>(num_labels)}, true)});
  return c;
}

LstmState lstm_step(const Classifier& c, const Tensor& x, const LstmState& prev) {
  const std::size_t s = c.rnn.state;
  Tensor gates = nk::add_bias(nk::add(nk::matmul(x, c.param("lstm.wx")), nk::matmul(prev.h, c.param("lstm.wh"))),
                              c.param("lstm.b"));
  Tensor i = nk::sigmoid(nk::slice_last(gates, 0, s));
  Tensor f = nk::sigmoid(nk::slice_last(gates, s, s));
  Tensor g = nk::tanh(nk::slice_last(gates, 2 * s, s));
  Tensor o = nk::sigmoid(nk::slice_last(gates, 3 * s, s));
  Tensor cell = nk::add(nk::mul(f, prev.c), nk::mul(i, g));
  return {nk::mul(o, nk::tanh(cell)), cell};
}

Tensor classifier_logits(const Classifier& classifier, const std::vector<std::vector<int>>& rows, bool train,
                         Rng* rng) {
  if (rows.empty()) throw DimensionError("classifier: no rows");
  if (train && classifier.dropout() > 0.0 && rng == nullptr) throw ParameterError("classifier: training needs an rng");
  Rng unused(0);
  Rng& r = rng != nullptr ? *rng : unused;
  return classifier.kind == ClassifierKind::cnn ? cnn_logits(classifier, rows, train, r)
                                                : rnn_logits(classifier, rows, train, r);
}

std::vector<std::vector<double>> predict_proba(const Classifier& classifier, const std::vector<std::vector<int>>& rows) {
  std::vector<std::vector<double>> out;
  const std::size_t c = static_cast<std::size_t>(classifier.num_labels);
  for (std::size_t start = 0; start < rows.size(); start += kEvalBatch) {
    std::vector<std::vector<int>> chunk(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                        rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), start + kEvalBatch)));
    Tensor probs = nk::softmax(classifier_logits(classifier, chunk, false, nullptr), 1);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      out.emplace_back(probs.data().begin() + static_cast<std::ptrdiff_t>(r * c),
                       probs.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
    }
  }
  return out;
}

std::vector<int> predict(const Classifier& classifier, const std::vector<std::vector<int>>& rows) {
  std::vector<int> out;
  for (const auto& p : predict_proba(classifier, rows)) {
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return out;
}

const SplitEval* EvalReport::find(Split split) const {
  for (const auto& s : splits) {
    if (s.split == split) return &s;
  }
  return nullptr;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"epochs_used", epochs_used}, {"best_epoch", best_epoch}, {"seed", seed}};
  for (const auto& s : splits) {
    j["splits"][text::split_name(s.split)] = {
        {"total", s.total}, {"correct", s.correct}, {"accuracy", s.accuracy}, {"confusion", s.confusion}};
  }
  return j;
}

SplitEval evaluate(const Classifier& classifier, const Dataset& dataset, Split split) {
  validate_dataset(classifier, dataset);
  const auto idx = dataset.indices(split);
  if (idx.empty()) throw ParameterError(std::string("evaluate: split '") + text::split_name(split) + "' is empty");
  std::vector<std::vector<int>> rows;
  for (std::size_t i : idx) rows.push_back(dataset.examples[i].tokens);
  const auto predicted = predict(classifier, rows);
  SplitEval out;
  out.split = split;
  out.total = idx.size();
  const std::size_t c = static_cast<std::size_t>(classifier.num_labels);
  out.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const int truth = dataset.examples[idx[r]].label;
    ++out.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted[r])];
    if (truth == predicted[r]) ++out.correct;
  }
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.total);
  return out;
}

TrainedClassifier train_cnn(const Dataset& dataset, const CnnConfig& config) {
  config.validate();
  Rng init = derive_rng(config.seed, "clf-init");
  Classifier model = init_cnn(config, dataset.vocab_size, dataset.num_labels, init);
  return train_loop(std::move(model), dataset,
                    {config.lr, config.epochs, config.batch_size, config.patience, config.seed});
}

TrainedClassifier train_rnn(const Dataset& dataset, const RnnConfig& config) {
  config.validate();
  Rng init = derive_rng(config.seed, "clf-init");
  Classifier model = init_rnn(config, dataset.vocab_size, dataset.num_labels, init);
  return train_loop(std::move(model), dataset,
                    {config.lr, config.epochs, config.batch_size, config.patience, config.seed});
}

TrainedClassifier train_cnn_grid(const Dataset& dataset, const CnnConfig& base, const GridSpec& grid) {
  return grid_search(dataset, base, grid, train_cnn);
}

TrainedClassifier train_rnn_grid(const Dataset& dataset, const RnnConfig& base, const GridSpec& grid) {
  return grid_search(dataset, base, grid, train_rnn);
}

void save_classifier(const Classifier& classifier, const std::filesystem::path& path) {
  std::vector<nk::NamedTensor> entries;
  for (const auto& [name, t] : classifier.params) {
    entries.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
  nk::save_checkpoint(path, entries);
  nlohmann::json sidecar{{"format", kSidecarFormat},
                         {"kind", kind_name(classifier.kind)},
                         {"vocab_size", classifier.vocab_size},
                         {"num_labels", classifier.num_labels},
                         {"config", classifier.kind == ClassifierKind::cnn ? classifier.cnn.to_json()
                                                                           : classifier.rnn.to_json()}};
  nk::write_file_bytes(path.string() + ".json", sidecar.dump(2) + "\n");
}

Classifier load_classifier(const std::filesystem::path& path) {
  const std::string sidecar_file = path.string() + ".json";
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(nk::read_file_bytes(sidecar_file));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("classifier sidecar '" + sidecar_file + "' is not valid JSON: " + e.what());
  }
  if (!sidecar.is_object() || sidecar.value("format", "") != kSidecarFormat) {
    throw CheckpointError("classifier sidecar '" + sidecar_file + "' lacks format tag " + kSidecarFormat);
  }
  Classifier model;
  Rng skeleton(0);
  try {
    const auto kind = parse_kind(sidecar.at("kind").get<std::string>());
    const auto vocab = sidecar.at("vocab_size").get<std::size_t>();
    const auto labels = sidecar.at("num_labels").get<int>();
    model = kind == ClassifierKind::cnn ? init_cnn(CnnConfig::from_json(sidecar.at("config")), vocab, labels, skeleton)
                                        : init_rnn(RnnConfig::from_json(sidecar.at("config")), vocab, labels, skeleton);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("classifier sidecar '" + sidecar_file + "': " + e.what());
  } catch (const Error& e) {
    throw CheckpointError("classifier sidecar '" + sidecar_file + "': " + e.what());
  }
  const auto entries = nk::load_checkpoint(path);
  if (entries.size() != model.params.size()) {
    throw CheckpointError("classifier checkpoint '" + path.string() + "' holds " + std::to_string(entries.size()) +
                          " tensors, config implies " + std::to_string(model.params.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& [name, tensor] = model.params[i];
    if (entries[i].name != name || entries[i].shape != tensor.shape()) {
      throw CheckpointError("classifier checkpoint entry '" + entries[i].name + "' " + nk::shape_str(entries[i].shape) +
                            " does not match '" + name + "' " + nk::shape_str(tensor.shape()));
    }
    std::copy(entries[i].values.begin(), entries[i].values.end(), tensor.mutable_data().begin());
  }
  return model;
}

}  // namespace cbert::clf
