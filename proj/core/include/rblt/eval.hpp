#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "rblt/model.hpp"
#include "rblt/sampler.hpp"
#include "rblt/vocabulary.hpp"

namespace rblt {

/// Set of fully observed (s, r, t) triples.
class TripleSet {
 public:
  TripleSet() = default;
  explicit TripleSet(std::span<const Triple> triples) { insert(triples); }

  void insert(const Triple& t);
  void insert(std::span<const Triple> triples);
  bool contains(WordId s, RelId r, WordId t) const;
  bool contains(const Triple& t) const;
  std::size_t size() const { return keys_.size(); }

 private:
  struct Key {
    std::size_t s, r, t;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  std::unordered_set<Key, KeyHash> keys_;
};

/// (S, R, T~) with T~ uniform over words such that T~ != T and (S, R, T~) is not
/// known. Throws ConfigError when no such target exists.
Triple corrupt_target(const Triple& triple, std::size_t vocab_size, const TripleSet& known, Rng& rng);

struct ScoredTriple {
  Triple triple;
  double score = 0.0;  // energy; lower means more plausible
  bool is_true = true;
};

/// Scores each positive and one target corruption of it.
std::vector<ScoredTriple> score_with_corruptions(const ModelParams& params, EnergyKind kind,
                                                 std::span<const Triple> positives, const TripleSet& known,
                                                 Rng& rng);

struct RelationThreshold {
  double value = 0.0;  // predict true iff score < value
  double validation_accuracy = 0.0;
  bool one_class = false;  // validation had a single label; value is +inf
};

using Thresholds = std::map<RelId, RelationThreshold>;

/// Exact per-relation maximizer of validation accuracy over the midpoints of
/// adjacent distinct scores (plus "all false" and "all true"), lowest on ties.
Thresholds fit_thresholds(std::span<const ScoredTriple> validation, std::vector<std::string>* warnings = nullptr);

/// Mann-Whitney AUROC with ties counted as 1/2, lower score ranking as more true.
/// Empty when either class is absent.
std::optional<double> auroc(std::span<const ScoredTriple> scored);

struct RelationReport {
  RelId relation;
  double threshold = 0.0;
  bool one_class = false;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::optional<double> auroc;
};

struct EvalReport {
  std::vector<RelationReport> per_relation;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::optional<double> auroc;

  std::string to_table(const Vocabulary* vocab = nullptr) const;
  /// One JSON object per relation, then one "overall" record.
  std::string to_json_lines(const Vocabulary* vocab = nullptr) const;
};

EvalReport classify_and_report(std::span<const ScoredTriple> test, const Thresholds& thresholds);

/// Largest validation accuracy reachable by one threshold shared by all relations.
double best_global_threshold_accuracy(std::span<const ScoredTriple> validation);

// ---------------------------------------------------------------------------
// Planted instances

struct PlantedConfig {
  std::size_t vocab_size = 200;
  std::size_t relation_count = 4;
  std::size_t dim = 10;
  std::size_t train_triples = 20000;
  std::uint64_t seed = 1;
  /// Ground-truth energy is -beta * cos(v_t, A_r c_s) with orthogonal A_r.
  double inverse_temperature = 16.0;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
};

struct PlantedInstance {
  PlantedConfig config;
  ModelParams truth;
  EnergyKind truth_energy = EnergyKind::Dot;
  std::vector<Triple> train;  // raw draws, repeats kept
  std::vector<Triple> valid;  // distinct triples
  std::vector<Triple> test;   // distinct triples
  Vocabulary vocab;           // w000.., r0..

  /// Generation parameters and split sizes as one JSON object.
  std::string describe() const;
};

/// Draws a ground truth, samples triples from its exact joint distribution and
/// assigns each distinct triple to exactly one split.
PlantedInstance make_planted_instance(const PlantedConfig& config);

}  // namespace rblt
