#include "cbert/classify/experiment.h"

#include <algorithm>
#include <cstdio>

#include "cbert/common/errors.h"

namespace cbert::clf {
namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

aug::AugmentResult run_arm(const ExperimentInputs& in, const std::string& arm, const Dataset& data,
                           std::uint64_t aug_seed) {
  aug::AugmentationPolicy policy = in.policy;
  policy.seed = aug_seed;
  if (arm == "none") {
    aug::AugmentResult r;
    r.dataset = data;
    return r;
  }
  if (arm == "synonym") {
    const aug::BoundSynonyms& table = *in.synonyms;
    return aug::augment_with(
        data, [&](const text::LabeledExample& ex, Rng& rng) { return aug::synonym_augment(ex, table, policy.k, rng); },
        policy.multiplier, aug_seed);
  }
  if (arm == "bert") {
    const model::Encoder& enc = *in.unconditional;
    return aug::augment_with(
        data, [&](const text::LabeledExample& ex, Rng& rng) { return aug::bert_augment(enc, ex, policy, rng); },
        policy.multiplier, aug_seed);
  }
  return aug::augment_dataset(*in.conditional, data, policy);
}

}  // namespace

double ComparisonTable::mean(const std::string& arm) const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.arm != arm) continue;
    total += r.test_accuracy;
    ++n;
  }
  if (n == 0) throw ParameterError("comparison table has no rows for arm '" + arm + "'");
  return total / static_cast<double>(n);
}

std::string ComparisonTable::render_text() const {
  std::size_t arm_width = 4;
  for (const auto& a : arms) arm_width = std::max(arm_width, a.size());
  arm_width += 2;
  std::vector<std::string> headers;
  for (auto s : seeds) headers.push_back("seed=" + std::to_string(s));
  std::string out = pad_right("arm", arm_width);
  for (const auto& h : headers) out += pad_right(h, std::max<std::size_t>(h.size(), 6) + 2);
  out += "mean\n";
  for (const auto& arm : arms) {
    out += pad_right(arm, arm_width);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      double total = 0.0;
      std::size_t n = 0;
      for (const auto& r : rows) {
        if (r.arm == arm && r.seed == seeds[i]) {
          total += r.test_accuracy;
          ++n;
        }
      }
      out += pad_right(n ? fixed4(total / static_cast<double>(n)) : "-", std::max<std::size_t>(headers[i].size(), 6) + 2);
    }
    out += fixed4(mean(arm)) + "\n";
  }
  return out;
}

std::string ComparisonTable::render_records() const {
  std::string out = nlohmann::json{{"format", kFormat}}.dump() + "\n";
  for (const auto& r : rows) {
    out += nlohmann::json{{"arm", r.arm},
                          {"seed", r.seed},
                          {"fold", r.fold},
                          {"train_size", r.train_size},
                          {"skipped", r.skipped},
                          {"val_accuracy", r.val_accuracy},
                          {"test_accuracy", r.test_accuracy}}
               .dump() +
           "\n";
  }
  return out;
}

Dataset cross_validation_fold(const Dataset& dataset, std::size_t fold, std::size_t folds, std::uint64_t seed) {
  if (folds < 3) throw ParameterError("cross validation needs at least 3 folds");
  if (fold >= folds) throw IndexError("fold " + std::to_string(fold) + " outside [0, " + std::to_string(folds) + ")");
  if (dataset.size() < folds) throw ParameterError("cross validation: fewer examples than folds");
  std::vector<std::size_t> perm(dataset.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng = derive_rng(seed, "cv-folds");
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  std::vector<std::size_t> fold_of(dataset.size());
  for (std::size_t p = 0; p < perm.size(); ++p) fold_of[perm[p]] = p % folds;
  Dataset out = dataset;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (fold_of[i] == fold) {
      out.splits[i] = Split::test;
    } else if (fold_of[i] == (fold + 1) % folds) {
      out.splits[i] = Split::val;
    } else {
      out.splits[i] = Split::train;
    }
  }
  return out;
}

ComparisonTable ab_experiment(const ExperimentInputs& inputs, const std::vector<std::string>& arms,
                              const std::vector<std::uint64_t>& seeds) {
  if (inputs.dataset == nullptr) throw ParameterError("ab_experiment: no dataset");
  if (seeds.empty()) throw ParameterError("ab_experiment: at least one seed is required");
  if (arms.empty()) throw ParameterError("ab_experiment: at least one arm is required");
  for (const auto& arm : arms) {
    const auto& known = known_arms();
    if (std::find(known.begin(), known.end(), arm) == known.end()) {
      throw ConfigError("ab_experiment: unknown arm '" + arm + "' (expected none, synonym, bert or cbert)");
    }
    if (arm == "synonym" && inputs.synonyms == nullptr) throw ParameterError("ab_experiment: synonym arm needs a table");
    if (arm == "bert" && inputs.unconditional == nullptr) throw ParameterError("ab_experiment: bert arm needs a model");
    if (arm == "cbert" && inputs.conditional == nullptr) throw ParameterError("ab_experiment: cbert arm needs a model");
  }
  const bool cv = inputs.cv_folds > 1;
  if (!cv && inputs.dataset->count(Split::test) == 0) throw ParameterError("ab_experiment: dataset has no test split");
  inputs.policy.validate();

  ComparisonTable table;
  table.arms = arms;
  table.seeds = seeds;
  for (const auto& arm : arms) {
    for (std::uint64_t seed : seeds) {
      const std::size_t folds = cv ? inputs.cv_folds : 1;
      for (std::size_t fold = 0; fold < folds; ++fold) {
        const Dataset data = cv ? cross_validation_fold(*inputs.dataset, fold, folds, seed) : *inputs.dataset;
        aug::AugmentResult augmented = run_arm(inputs, arm, data, derive_seed(seed, "augment", fold));
        TrainedClassifier trained;
        if (inputs.kind == ClassifierKind::cnn) {
          CnnConfig cfg = inputs.cnn;
          cfg.seed = seed;
          trained = train_cnn(augmented.dataset, cfg);
        } else {
          RnnConfig cfg = inputs.rnn;
          cfg.seed = seed;
          trained = train_rnn(augmented.dataset, cfg);
        }
        ArmResult row;
        row.arm = arm;
        row.seed = seed;
        row.fold = fold;
        row.train_size = augmented.dataset.count(Split::train);
        row.skipped = augmented.skipped;
        row.val_accuracy = trained.report.find(Split::val)->accuracy;
        row.test_accuracy = trained.report.find(Split::test)->accuracy;
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

}  // namespace cbert::clf
