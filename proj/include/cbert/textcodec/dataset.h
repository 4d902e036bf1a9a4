#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbert/textcodec/vocabulary.h"

namespace cbert::text {

enum class Split : std::uint8_t { train, val, test };

const char* split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

// A token-id sequence (CLS first) with its class label.
struct LabeledExample {
  std::vector<int> tokens;
  int label = 0;

  bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  std::vector<Split> splits;  // parallel to examples
  int num_labels = 0;
  std::size_t vocab_size = 0;

  std::size_t size() const { return examples.size(); }
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return indices(split).size(); }
  // Examples of one split, in order, as a dataset tagged entirely with `split`.
  Dataset subset(Split split) const;
  void push_back(LabeledExample example, Split split);

  // Throws ParameterError when a label falls outside [0, num_labels) or the
  // splits vector is out of step with the examples.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// One line of a dataset file: "label<TAB>text[<TAB>key=value;key=value...]".
// The optional third column carries provenance; a "split" key assigns the
// record to train/val/test explicitly.
struct TsvRecord {
  int label = 0;
  std::string text;
  std::string provenance;
  std::optional<Split> split;
  bool generated = false;  // provenance names an augmenter other than "original"
  std::size_t line = 0;
};

struct TsvCorpus {
  std::vector<TsvRecord> records;
  int num_labels = 0;  // 1 + max label
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kTsvFormatTag = "# format: cbert-tsv/1";

// Lines starting with '#' and blank lines are skipped.
TsvCorpus parse_tsv(std::istream& in, const std::string& source_name);
TsvCorpus load_tsv(const std::filesystem::path& path);

struct SplitOptions {
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Encodes every record. Records without an explicit split are train. When the
// corpus has no validation records, round(val_fraction * n) untagged,
// non-generated records are moved to val by a seeded draw; order is kept.
Dataset make_dataset(const TsvCorpus& corpus, const Vocabulary& vocab, std::size_t max_len,
                     const SplitOptions& options = {});

}  // namespace cbert::text
