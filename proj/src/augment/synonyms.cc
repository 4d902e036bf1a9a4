#include "cbert/augment/synonyms.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cbert/common/errors.h"

namespace cbert::aug {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

}  // namespace

SynonymTable SynonymTable::parse(std::istream& in, const std::string& source_name) {
  std::map<std::string, std::vector<std::string>> groups;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto where = source_name + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(where + ": expected word<TAB>synonyms");
    const std::string word = lower(trim(std::string_view(line).substr(0, tab)));
    if (word.empty()) throw ParseError(where + ": empty headword");
    std::vector<std::string> syns;
    std::stringstream list(line.substr(tab + 1));
    std::string item;
    bool self = false;
    while (std::getline(list, item, ',')) {
      item = lower(trim(item));
      if (item.empty()) continue;
      if (item == word) {
        self = true;
        continue;
      }
      if (std::find(syns.begin(), syns.end(), item) == syns.end()) syns.push_back(item);
    }
    if (syns.empty()) {
      throw ParseError(where + (self ? ": '" + word + "' is its own only synonym" : ": no synonyms for '" + word + "'"));
    }
    auto& slot = groups[word];
    for (auto& s : syns) {
      if (std::find(slot.begin(), slot.end(), s) == slot.end()) slot.push_back(s);
    }
  }
  return from_map(std::move(groups));
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synonym table '" + path.string() + "'");
  return parse(in, path.string());
}

SynonymTable SynonymTable::from_map(std::map<std::string, std::vector<std::string>> groups) {
  SynonymTable t;
  for (auto& [word, syns] : groups) {
    std::erase(syns, word);
    if (syns.empty()) throw ParseError("synonym table: '" + word + "' has no synonyms besides itself");
    t.groups_.emplace(word, std::move(syns));
  }
  return t;
}

std::string SynonymTable::serialize() const {
  std::string out = std::string(kFormatTag) + "\n";
  for (const auto& [word, syns] : groups_) {
    out += word + "\t";
    for (std::size_t i = 0; i < syns.size(); ++i) out += (i ? "," : "") + syns[i];
    out += "\n";
  }
  return out;
}

const std::vector<std::string>* SynonymTable::find(std::string_view word) const {
  auto it = groups_.find(word);
  return it == groups_.end() ? nullptr : &it->second;
}

BoundSynonyms bind_synonyms(const SynonymTable& table, const text::Vocabulary& vocab) {
  BoundSynonyms out;
  for (const auto& [word, syns] : table.groups()) {
    auto head = vocab.find(word);
    if (!head || text::is_special_id(*head)) continue;
    std::vector<int> ids;
    for (const auto& s : syns) {
      auto id = vocab.find(s);
      if (id && !text::is_special_id(*id)) {
        ids.push_back(*id);
      } else {
        ++out.dropped;
      }
    }
    if (!ids.empty()) out.by_id.emplace(*head, std::move(ids));
  }
  return out;
}

}  // namespace cbert::aug
