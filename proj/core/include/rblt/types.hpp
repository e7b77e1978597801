#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rblt {

/// Index of a word in the source and target embedding tables.
struct WordId {
  std::size_t index = 0;
  auto operator<=>(const WordId&) const = default;
};

/// Index of a relation operator.
struct RelId {
  std::size_t index = 0;
  auto operator<=>(const RelId&) const = default;
};

enum class EnergyKind { Dot, Cosine, FrobeniusCosine };

std::string_view to_string(EnergyKind kind);
EnergyKind parse_energy_kind(std::string_view name);

/// Raised for inconsistent shapes, bad indices or invalid settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an energy denominator sits at the zero-norm floor and the
/// caller asked for strict evaluation.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the exhaustive oracles are asked to enumerate too many states.
class StateSpaceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the path and line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite parameters detected during training.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A (source, relation, target) observation. Any single axis may be missing;
/// the trainer then weights every completion by its conditional probability.
struct Triple {
  std::optional<WordId> source;
  std::optional<RelId> relation;
  std::optional<WordId> target;
  double weight = 1.0;

  bool fully_observed() const { return source && relation && target; }
  int missing_count() const { return !source + !relation + !target; }

  bool operator==(const Triple&) const = default;
};

inline Triple make_triple(std::size_t s, std::size_t r, std::size_t t, double weight = 1.0) {
  return Triple{WordId{s}, RelId{r}, WordId{t}, weight};
}

}  // namespace rblt

template <>
struct std::hash<rblt::WordId> {
  std::size_t operator()(const rblt::WordId& w) const noexcept { return std::hash<std::size_t>{}(w.index); }
};

template <>
struct std::hash<rblt::RelId> {
  std::size_t operator()(const rblt::RelId& r) const noexcept { return std::hash<std::size_t>{}(r.index); }
};
