#include "cbert/textcodec/vocabulary.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "cbert/common/errors.h"
#include "cbert/textcodec/tokenizer.h"

namespace cbert::text {
namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials{std::string(kPadToken), std::string(kUnkToken),
                                                 std::string(kMaskToken), std::string(kClsToken)};
  return specials;
}

bool is_special_token(std::string_view token) {
  const auto& specials = special_tokens();
  return std::find(specials.begin(), specials.end(), token) != specials.end();
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& s : special_tokens()) add(s);
}

void Vocabulary::add(std::string token) {
  const int id = static_cast<int>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() || !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw ParseError("vocabulary must start with " + specials[0] + " " + specials[1] + " " + specials[2] + " " +
                     specials[3]);
  }
  Vocabulary vocab;
  for (std::size_t i = specials.size(); i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw ParseError("vocabulary entry " + std::to_string(i) + " is empty");
    if (vocab.index_.count(tokens[i]) != 0) {
      throw ParseError("vocabulary entry '" + tokens[i] + "' appears twice (id " + std::to_string(i) + ")");
    }
    vocab.add(std::move(tokens[i]));
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  try {
    return from_tokens(std::move(tokens));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out.push_back('\n');
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write vocabulary '" + path.string() + "'");
  out << serialize();
}

int Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnkId); }

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& tokenized_corpus, std::size_t min_freq,
                       std::size_t max_size) {
  if (max_size < static_cast<std::size_t>(kNumSpecials)) {
    throw ParameterError("max_size must be at least " + std::to_string(kNumSpecials) + " (the specials), got " +
                         std::to_string(max_size));
  }
  if (tokenized_corpus.empty()) throw ParameterError("build_vocab: corpus is empty");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : tokenized_corpus) {
    for (const auto& token : sentence) {
      if (!is_special_token(token)) ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count >= std::max<std::size_t>(min_freq, 1)) ranked.emplace_back(token, count);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t capacity = max_size - kNumSpecials;
  if (ranked.size() > capacity) ranked.resize(capacity);
  std::vector<std::string> tokens = special_tokens();
  for (auto& [token, count] : ranked) tokens.push_back(token);
  return Vocabulary::from_tokens(std::move(tokens));
}

Vocabulary build_vocab_from_texts(std::span<const std::string> texts, std::size_t min_freq, std::size_t max_size) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(texts.size());
  for (const auto& t : texts) corpus.push_back(tokenize(t));
  return build_vocab(corpus, min_freq, max_size);
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  std::vector<int> ids;
  if (max_len == 0) return ids;
  ids.push_back(kClsId);
  for (const auto& t : tokens) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.id(t));
  }
  return ids;
}

std::vector<int> encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  return encode_tokens(tokenize(text), vocab, max_len);
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == kPadId || id == kClsId) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace cbert::text
