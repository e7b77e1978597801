#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rblt/types.hpp"
#include "rblt/vocabulary.hpp"

namespace rblt {

/// Matches trailing "_N" / "__N" sense markers, repeated ("bank_1_2").
const std::regex& default_sense_pattern();

/// Removes the match of `pattern` at the end of `token`, repeating until the
/// token stops changing, so the result is a fixed point.
std::string strip_sense_ids(std::string_view token, const std::regex& pattern = default_sense_pattern());

/// Whitespace split, ASCII lowercase, punctuation trimmed from both ends.
/// Tokens that are pure punctuation vanish.
std::vector<std::string> tokenize_sentence(std::string_view line);

/// Greedy left-to-right merge of adjacent tokens into "first_second" when the
/// joined form is known.
std::vector<std::string> merge_bigrams(std::span<const std::string> tokens,
                                       const std::function<bool(std::string_view)>& known);

/// For every pair of in-vocabulary positions i < j <= i + window emits
/// (w_i, rel, w_j) and (w_j, rel, w_i). Out-of-vocabulary tokens still occupy
/// positions.
std::vector<Triple> extract_cooccurrences(std::span<const std::string> sentence, std::size_t window,
                                          const Vocabulary& vocab, RelId relation);

/// Streams a corpus file, one sentence per line, through tokenize_sentence,
/// merge_bigrams against `vocab` and extract_cooccurrences. Returns the number
/// of triples passed to `emit`.
std::size_t for_each_cooccurrence(const std::filesystem::path& corpus, std::size_t window, const Vocabulary& vocab,
                                  RelId relation, const std::function<void(const Triple&)>& emit);

}  // namespace rblt
