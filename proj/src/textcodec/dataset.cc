#include "cbert/textcodec/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>

#include "cbert/common/errors.h"
#include "cbert/common/rng.h"

namespace cbert::text {

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  return std::nullopt;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  out.num_labels = num_labels;
  out.vocab_size = vocab_size;
  for (std::size_t i : indices(split)) out.push_back(examples[i], split);
  return out;
}

void Dataset::push_back(LabeledExample example, Split split) {
  examples.push_back(std::move(example));
  splits.push_back(split);
}

void Dataset::validate() const {
  if (splits.size() != examples.size()) {
    throw ParameterError("dataset has " + std::to_string(examples.size()) + " examples but " +
                         std::to_string(splits.size()) + " split tags");
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const int label = examples[i].label;
    if (label < 0 || label >= num_labels) {
      throw ParameterError("example " + std::to_string(i) + " has label " + std::to_string(label) +
                           " outside [0, " + std::to_string(num_labels) + ")");
    }
  }
}

namespace {

void apply_provenance(TsvRecord& record, const std::string& where) {
  std::string_view rest = record.provenance;
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    std::string_view field = rest.substr(0, semi);
    rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError(where + ": provenance field '" + std::string(field) + "' lacks '='");
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "split") {
      record.split = parse_split(value);
      if (!record.split) throw ParseError(where + ": unknown split '" + std::string(value) + "'");
    } else if (key == "augmenter") {
      record.generated = value != "original";
    }
  }
}

}  // namespace

TsvCorpus parse_tsv(std::istream& in, const std::string& source_name) {
  TsvCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  int max_label = -1;
  std::set<int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(where + ": expected 'label<TAB>text'");
    const std::string_view label_str(line.data(), tab);
    int label = -1;
    const auto [ptr, ec] = std::from_chars(label_str.data(), label_str.data() + label_str.size(), label);
    if (ec != std::errc() || ptr != label_str.data() + label_str.size() || label < 0 || label_str.empty()) {
      throw ParseError(where + ": label '" + std::string(label_str) + "' is not a non-negative integer");
    }
    TsvRecord record;
    record.label = label;
    record.line = line_no;
    const std::string rest = line.substr(tab + 1);
    const auto tab2 = rest.find('\t');
    record.text = rest.substr(0, tab2);
    if (tab2 != std::string::npos) {
      record.provenance = rest.substr(tab2 + 1);
      apply_provenance(record, where);
    }
    max_label = std::max(max_label, label);
    seen.insert(label);
    corpus.records.push_back(std::move(record));
  }
  if (corpus.records.empty()) throw ParseError(source_name + ": no examples");
  corpus.num_labels = max_label + 1;
  for (int l = 0; l < corpus.num_labels; ++l) {
    if (seen.count(l) == 0) {
      corpus.warnings.push_back(source_name + ": label " + std::to_string(l) + " is never used (c = " +
                                std::to_string(corpus.num_labels) + ")");
    }
  }
  return corpus;
}

TsvCorpus load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return parse_tsv(in, path.string());
}

Dataset make_dataset(const TsvCorpus& corpus, const Vocabulary& vocab, std::size_t max_len,
                     const SplitOptions& options) {
  if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
    throw ParameterError("val_fraction must lie in [0, 1)");
  }
  Dataset ds;
  ds.num_labels = corpus.num_labels;
  ds.vocab_size = vocab.size();
  bool has_val = false;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const TsvRecord& r = corpus.records[i];
    const Split split = r.split.value_or(Split::train);
    has_val = has_val || split == Split::val;
    if (!r.split && !r.generated) candidates.push_back(i);
    ds.push_back({encode(r.text, vocab, max_len), r.label}, split);
  }
  if (!has_val && options.val_fraction > 0.0) {
    const auto n_val = static_cast<std::size_t>(std::llround(options.val_fraction * static_cast<double>(candidates.size())));
    Rng rng = derive_rng(options.seed, "val-split");
    // Partial Fisher-Yates: the first n_val slots become the validation set.
    for (std::size_t i = 0; i < n_val; ++i) {
      const std::size_t j = i + rng.uniform_index(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
      ds.splits[candidates[i]] = Split::val;
    }
  }
  return ds;
}

}  // namespace cbert::text
