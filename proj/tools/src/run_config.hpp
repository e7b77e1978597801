#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rblt/trainer.hpp"

namespace rblt::cli {

/// A triple file and its per-source gradient weight (kappa).
struct TripleSource {
  std::filesystem::path path;
  double weight = 1.0;
  bool operator==(const TripleSource&) const = default;
};

/// Everything `train` and `eval` read. One flat key space shared by the config
/// file and the command-line flags.
struct RunConfig {
  TrainConfig train;

  std::vector<TripleSource> triples;
  std::vector<std::filesystem::path> corpus;
  std::size_t window = 5;
  double corpus_weight = 1.0;
  std::size_t min_count = 1;
  bool strip_senses = false;
  std::string cooccurrence_relation = "appears_in_sentence_with";

  std::filesystem::path output_dir = "run";
  bool resume = false;

  std::filesystem::path checkpoint;
  std::filesystem::path vocab;
  std::vector<std::filesystem::path> valid;
  std::vector<std::filesystem::path> test;
  std::vector<std::filesystem::path> known;
  std::uint64_t corruption_seed = 1;

  /// Checks that apply to every subcommand; throws ConfigError naming the key.
  void validate() const;
};

enum class ValueType { Integer, Real, Boolean, String, StringList, TripleList };

struct KeyInfo {
  std::string_view name;
  ValueType type;
  std::string_view help;
};

const std::vector<KeyInfo>& config_keys();

/// Defaults, with the thread count taken from RBLT_THREADS when set.
RunConfig default_run_config();

/// Applies every key of a TOML document. Unknown keys and type mismatches
/// throw ConfigError naming the key.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Applies one flag value given as text (list keys take one element per call).
void apply_flag(RunConfig& config, std::string_view key, std::string_view text);

/// Resets a list key so flags replace rather than extend file values.
void clear_list(RunConfig& config, std::string_view key);

/// Resolved values keyed like the config file.
nlohmann::json to_json(const RunConfig& config);

/// The same values as a TOML document that reproduces this configuration.
std::string to_toml(const RunConfig& config);

}  // namespace rblt::cli
