#include "rblt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace rblt {

const std::regex& default_sense_pattern() {
  static const std::regex pattern("(?:_+[0-9]+)+$");
  return pattern;
}

std::string strip_sense_ids(std::string_view token, const std::regex& pattern) {
  std::string current(token);
  for (;;) {
    std::smatch m;
    if (!std::regex_search(current, m, pattern) || m.length(0) == 0) return current;
    std::string next = current.substr(0, static_cast<std::size_t>(m.position(0)));
    // A token that is nothing but a marker is left alone.
    if (next.empty() || next == current) return current;
    current = std::move(next);
  }
}

std::vector<std::string> tokenize_sentence(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  const auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && is_punct(line[b])) ++b;
    while (e > b && is_punct(line[e - 1])) --e;
    if (b < e) {
      std::string tok(line.substr(b, e - b));
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

std::vector<std::string> merge_bigrams(std::span<const std::string> tokens,
                                       const std::function<bool(std::string_view)>& known) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i + 1 < tokens.size()) {
      std::string joined = tokens[i] + "_" + tokens[i + 1];
      if (known(joined)) {
        out.push_back(std::move(joined));
        ++i;
        continue;
      }
    }
    out.push_back(tokens[i]);
  }
  return out;
}

std::vector<Triple> extract_cooccurrences(std::span<const std::string> sentence, std::size_t window,
                                          const Vocabulary& vocab, RelId relation) {
  if (window == 0) throw ConfigError("co-occurrence window must be at least 1");
  std::vector<std::optional<WordId>> ids;
  ids.reserve(sentence.size());
  for (const auto& tok : sentence) ids.push_back(vocab.find_word(tok));

  std::vector<Triple> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!ids[i]) continue;
    const std::size_t last = std::min(ids.size() - 1, i + window);
    for (std::size_t j = i + 1; j <= last; ++j) {
      if (!ids[j]) continue;
      out.push_back(Triple{ids[i], relation, ids[j], 1.0});
      out.push_back(Triple{ids[j], relation, ids[i], 1.0});
    }
  }
  return out;
}

std::size_t for_each_cooccurrence(const std::filesystem::path& corpus, std::size_t window, const Vocabulary& vocab,
                                  RelId relation, const std::function<void(const Triple&)>& emit) {
  std::ifstream in(corpus);
  if (!in) throw std::runtime_error("cannot read corpus " + corpus.string());
  const auto known = [&](std::string_view w) { return vocab.find_word(w).has_value(); };
  std::size_t count = 0;
  for (std::string line; std::getline(in, line);) {
    const auto tokens = merge_bigrams(tokenize_sentence(line), known);
    for (const auto& t : extract_cooccurrences(tokens, window, vocab, relation)) {
      emit(t);
      ++count;
    }
  }
  return count;
}

}  // namespace rblt
