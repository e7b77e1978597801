#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rblt/model.hpp"
#include "rblt/types.hpp"
#include "rblt/vocabulary.hpp"

namespace rblt {

/// Marks an unobserved slot in a triple file.
inline constexpr std::string_view kUnobserved = "?";

/// One record of `source<TAB>relation<TAB>target[<TAB>weight]`.
struct TripleRecord {
  std::string source;
  std::string relation;
  std::string target;
  double weight = 1.0;
};

/// Parses one data line. Throws ParseError naming `where` (e.g. "file.tsv:12").
TripleRecord parse_triple_line(std::string_view line, std::string_view where);

/// Reads every record of a triple file, skipping '#' comments and blank lines.
std::vector<TripleRecord> read_triple_records(const std::filesystem::path& path);

struct TripleFileOptions {
  bool strip_senses = false;
  /// Per-file source weight (kappa); multiplies every record's weight.
  double weight_scale = 1.0;
  /// Unknown tokens are appended to the vocabulary instead of rejected.
  bool extend_vocabulary = false;
};

std::vector<Triple> load_triples(const std::filesystem::path& path, Vocabulary& vocab,
                                 const TripleFileOptions& options = {});

/// Overload for a fixed vocabulary; unknown tokens are always errors.
std::vector<Triple> load_triples(const std::filesystem::path& path, const Vocabulary& vocab,
                                 const TripleFileOptions& options = {});

void write_triples(std::ostream& out, std::span<const Triple> triples, const Vocabulary& vocab,
                   bool include_weight = false);
void save_triples(const std::filesystem::path& path, std::span<const Triple> triples, const Vocabulary& vocab,
                  bool include_weight = false);

enum class EmbeddingTable { Source, Target };

/// First line "|V| d", then "token x_1 ... x_d" per word at 17 significant digits.
void export_embeddings(const ModelParams& params, const Vocabulary& vocab, EmbeddingTable which,
                       const std::filesystem::path& path);

}  // namespace rblt
