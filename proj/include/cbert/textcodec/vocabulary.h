#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cbert::text {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kMaskId = 2;
inline constexpr int kClsId = 3;
inline constexpr int kNumSpecials = 4;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kClsToken = "[CLS]";

inline bool is_special_id(int id) { return id >= 0 && id < kNumSpecials; }

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  // `tokens` lists every entry in id order; the first four must be the
  // specials and the rest must be distinct.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  // File format: one token per line, line number (0-based) = id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;  // kUnkId when absent
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Keeps tokens seen at least min_freq times, ordered by frequency descending
// then token ascending, truncated so the vocabulary (specials included) has
// at most max_size entries.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& tokenized_corpus, std::size_t min_freq,
                       std::size_t max_size);
Vocabulary build_vocab_from_texts(std::span<const std::string> texts, std::size_t min_freq, std::size_t max_size);

// CLS followed by token ids, truncated to max_len ids in total.
std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len);
std::vector<int> encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

// Space-joined surface form; PAD and CLS are skipped.
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace cbert::text
