#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace disinfo::text {

// Splits UTF-8 text into lowercase alphanumeric runs. Any code point that is
// not a letter or digit (including '#', '@' and apostrophes) separates
// tokens, so "#Ukraine" yields "ukraine". Invalid UTF-8 bytes are separators.
std::vector<std::string> tokenize(std::string_view utf8);

// Lowercases ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic letters;
// other code points pass through unchanged.
std::string to_lower(std::string_view utf8);

// True for code points treated as part of a word.
bool is_word_char(char32_t cp);

char32_t lower(char32_t cp);

std::string trim(std::string_view s);

}  // namespace disinfo::text

namespace disinfo::text {

// True iff every term occurs as a whole word in text (case-insensitive). A
// term that itself tokenizes to several words requires all of them.
bool contains_all_words(std::string_view text, const std::vector<std::string>& terms);

}  // namespace disinfo::text
