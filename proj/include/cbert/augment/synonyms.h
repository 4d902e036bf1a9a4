#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cbert/textcodec/vocabulary.h"

namespace cbert::aug {

// Flat synonym file: an optional "# format: cbert-synonyms/1" header, then
// one group per line, "word<TAB>syn1,syn2,...". Words are lowercased; a word
// listed among its own synonyms is dropped from that list.
class SynonymTable {
 public:
  static constexpr std::string_view kFormatTag = "# format: cbert-synonyms/1";

  static SynonymTable parse(std::istream& in, const std::string& source_name);
  static SynonymTable load(const std::filesystem::path& path);
  static SynonymTable from_map(std::map<std::string, std::vector<std::string>> groups);
  std::string serialize() const;

  const std::vector<std::string>* find(std::string_view word) const;
  std::size_t size() const { return groups_.size(); }
  const std::map<std::string, std::vector<std::string>, std::less<>>& groups() const { return groups_; }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> groups_;
};

// The table restricted to a vocabulary, keyed by id. Synonyms outside the
// vocabulary are dropped and counted.
struct BoundSynonyms {
  std::map<int, std::vector<int>> by_id;
  std::size_t dropped = 0;
};

BoundSynonyms bind_synonyms(const SynonymTable& table, const text::Vocabulary& vocab);

}  // namespace cbert::aug
