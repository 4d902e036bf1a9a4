#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cbert::text {

// Lowercases ASCII letters, splits on whitespace and emits every ASCII
// punctuation character as its own token. Apostrophes are word characters,
// so "'s" and "don't" stay whole. Bytes >= 0x80 pass through untouched.
// The literal markers [PAD] [UNK] [MASK] [CLS] are kept as single tokens so
// decoded text re-encodes to the same ids.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace cbert::text
