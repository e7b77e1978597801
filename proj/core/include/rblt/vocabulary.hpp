#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rblt/types.hpp"

namespace rblt {

/// Bijective token <-> WordId and relation-name <-> RelId maps with dense ids.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> words, std::vector<std::string> relations);

  std::size_t word_count() const { return words_.size(); }
  std::size_t relation_count() const { return relations_.size(); }

  std::optional<WordId> find_word(std::string_view token) const;
  std::optional<RelId> find_relation(std::string_view name) const;
  WordId word_id(std::string_view token) const;
  RelId relation_id(std::string_view name) const;
  const std::string& word(WordId id) const { return words_.at(id.index); }
  const std::string& relation(RelId id) const { return relations_.at(id.index); }

  /// Appends if absent; returns the (possibly existing) id.
  WordId add_word(std::string token);
  RelId add_relation(std::string name);

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& relations() const { return relations_; }

  /// words.txt and relations.txt, one entry per line in id order.
  void save(const std::filesystem::path& dir) const;
  static Vocabulary load(const std::filesystem::path& dir);

  bool operator==(const Vocabulary& o) const { return words_ == o.words_ && relations_ == o.relations_; }

 private:
  std::vector<std::string> words_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::size_t> word_index_;
  std::unordered_map<std::string, std::size_t> relation_index_;
};

/// Collects tokens from triple files and corpora, then assigns ids in
/// lexicographic order so identical input always yields identical ids.
class VocabularyBuilder {
 public:
  /// "?" entries are unobserved slots and are not recorded.
  void add_triple(std::string_view source, std::string_view relation, std::string_view target);
  void add_relation(std::string_view name);
  void add_corpus_token(std::string_view token);

  /// Words seen only in corpora are kept when their count reaches min_count.
  /// Words from triple files are always kept. Throws ConfigError if nothing was added.
  Vocabulary build(std::size_t min_count = 1) const;

  bool has_triple_word(std::string_view token) const;

 private:
  std::map<std::string, std::size_t, std::less<>> triple_words_;
  std::map<std::string, std::size_t, std::less<>> corpus_counts_;
  std::map<std::string, std::size_t, std::less<>> relations_;
};

struct VocabularySources {
  std::vector<std::filesystem::path> triple_files;
  std::vector<std::filesystem::path> corpus_files;
};

struct VocabularyOptions {
  std::size_t min_count = 1;
  bool strip_senses = false;
  /// Registered as a relation when corpora are present.
  std::string cooccurrence_relation = "appears_in_sentence_with";
};

/// Reads every source once. Corpus lines are tokenized with greedy 2-gram
/// merging against the words already found in the triple files.
Vocabulary build_vocabulary(const VocabularySources& sources, const VocabularyOptions& options = {});

}  // namespace rblt
