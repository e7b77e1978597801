#include "rblt/vocabulary.hpp"

#include <fstream>

#include "rblt/corpus.hpp"
#include "rblt/triple_io.hpp"

namespace rblt {

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::string> relations) {
  for (auto& w : words) {
    if (find_word(w)) throw ConfigError("duplicate word '" + w + "' in vocabulary");
    add_word(std::move(w));
  }
  for (auto& r : relations) {
    if (find_relation(r)) throw ConfigError("duplicate relation '" + r + "' in vocabulary");
    add_relation(std::move(r));
  }
}

std::optional<WordId> Vocabulary::find_word(std::string_view token) const {
  auto it = word_index_.find(std::string(token));
  if (it == word_index_.end()) return std::nullopt;
  return WordId{it->second};
}

std::optional<RelId> Vocabulary::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return RelId{it->second};
}

WordId Vocabulary::word_id(std::string_view token) const {
  if (auto id = find_word(token)) return *id;
  throw ConfigError("unknown word '" + std::string(token) + "'");
}

RelId Vocabulary::relation_id(std::string_view name) const {
  if (auto id = find_relation(name)) return *id;
  throw ConfigError("unknown relation '" + std::string(name) + "'");
}

WordId Vocabulary::add_word(std::string token) {
  if (token.empty()) throw ConfigError("empty word token");
  auto [it, inserted] = word_index_.try_emplace(token, words_.size());
  if (inserted) words_.push_back(std::move(token));
  return WordId{it->second};
}

RelId Vocabulary::add_relation(std::string name) {
  if (name.empty()) throw ConfigError("empty relation name");
  auto [it, inserted] = relation_index_.try_emplace(name, relations_.size());
  if (inserted) relations_.push_back(std::move(name));
  return RelId{it->second};
}

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(path.string() + ":" + std::to_string(lines.size() + 1) + ": empty entry");
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

void Vocabulary::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_lines(dir / "words.txt", words_);
  write_lines(dir / "relations.txt", relations_);
}

Vocabulary Vocabulary::load(const std::filesystem::path& dir) {
  return Vocabulary(read_lines(dir / "words.txt"), read_lines(dir / "relations.txt"));
}

// ---------------------------------------------------------------------------

void VocabularyBuilder::add_triple(std::string_view source, std::string_view relation, std::string_view target) {
  if (source != kUnobserved) ++triple_words_[std::string(source)];
  if (target != kUnobserved) ++triple_words_[std::string(target)];
  if (relation != kUnobserved) add_relation(relation);
}

void VocabularyBuilder::add_relation(std::string_view name) { ++relations_[std::string(name)]; }

void VocabularyBuilder::add_corpus_token(std::string_view token) { ++corpus_counts_[std::string(token)]; }

bool VocabularyBuilder::has_triple_word(std::string_view token) const { return triple_words_.contains(token); }

Vocabulary VocabularyBuilder::build(std::size_t min_count) const {
  if (triple_words_.empty() && corpus_counts_.empty()) throw ConfigError("cannot build a vocabulary from empty input");
  std::map<std::string, bool, std::less<>> merged;
  for (const auto& [w, n] : triple_words_) merged.emplace(w, true);
  for (const auto& [w, n] : corpus_counts_)
    if (n >= min_count) merged.emplace(w, true);
  std::vector<std::string> words;
  words.reserve(merged.size());
  for (const auto& [w, keep] : merged) words.push_back(w);
  std::vector<std::string> relations;
  for (const auto& [r, n] : relations_) relations.push_back(r);
  return Vocabulary(std::move(words), std::move(relations));
}

Vocabulary build_vocabulary(const VocabularySources& sources, const VocabularyOptions& options) {
  if (sources.triple_files.empty() && sources.corpus_files.empty())
    throw ConfigError("vocabulary needs at least one triple file or corpus");
  VocabularyBuilder builder;
  for (const auto& path : sources.triple_files) {
    for (const auto& rec : read_triple_records(path)) {
      if (options.strip_senses) {
        builder.add_triple(rec.source == kUnobserved ? rec.source : strip_sense_ids(rec.source), rec.relation,
                           rec.target == kUnobserved ? rec.target : strip_sense_ids(rec.target));
      } else {
        builder.add_triple(rec.source, rec.relation, rec.target);
      }
    }
  }
  if (!sources.corpus_files.empty()) {
    builder.add_relation(options.cooccurrence_relation);
    const auto known = [&](std::string_view w) { return builder.has_triple_word(w); };
    for (const auto& path : sources.corpus_files) {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot read corpus " + path.string());
      std::string line;
      while (std::getline(in, line)) {
        const auto tokens = tokenize_sentence(line);
        for (const auto& tok : merge_bigrams(tokens, known)) builder.add_corpus_token(tok);
      }
    }
  }
  return builder.build(options.min_count);
}

}  // namespace rblt
