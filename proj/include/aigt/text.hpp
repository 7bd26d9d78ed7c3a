#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace aigt {

// Splits UTF-8 text into lowercase tokens. A token is a maximal run of
// alphabetic characters (ASCII letters and Latin-1/Latin Extended-A/B
// letters); digits, punctuation, whitespace and any other code point act as
// separators. Tokens shorter than `min_token_length` code points are dropped.
std::vector<std::string> tokenize(std::string_view raw_text, int min_token_length);

// Drops every token found in `stopwords`, preserving the order of the rest.
std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const std::set<std::string>& stopwords);

// Porter suffix stripping (the original 1980 rule set), iterated to a fixed
// point so that stem(stem(t)) == stem(t). Tokens containing non-ASCII bytes
// are returned unchanged.
std::string stem(std::string_view token);

// One pass of the Porter algorithm without the fixed-point iteration.
std::string porter_stem_once(std::string_view token);

// Strips a small set of English prefixes (un, dis, counter, ...) when the
// remainder keeps at least four letters. Off by default in PreprocessConfig.
std::string strip_prefix(std::string_view token);

// The bundled English stopword list (the Glasgow IR group list, 318 words, as
// distributed with scikit-learn). Also shipped as data/stopwords_en.txt.
const std::set<std::string>& default_stopwords();

// Reads one lowercase stopword per line; blank lines and lines starting with
// '#' are ignored.
std::set<std::string> load_stopwords(const std::string& path);

}  // namespace aigt
