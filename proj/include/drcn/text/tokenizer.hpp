#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace drcn::text {

// Lowercases ASCII letters and splits on whitespace; every ASCII punctuation
// character becomes its own token. Bytes >= 0x80 are kept inside words.
std::vector<std::string> tokenize(std::string_view sentence);

std::string lowercase(std::string_view s);

// Splits a UTF-8 string into code points (malformed bytes pass through one
// byte at a time).
std::vector<std::string> utf8_chars(std::string_view s);

}  // namespace drcn::text
