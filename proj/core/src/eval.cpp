#include "rblt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace rblt {

std::size_t TripleSet::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t h = k.s * 0x9e3779b97f4a7c15ULL;
  h ^= k.r + 0x7f4a7c159e3779b9ULL + (h << 6) + (h >> 2);
  h ^= k.t + 0x94d049bb133111ebULL + (h << 6) + (h >> 2);
  return h;
}

void TripleSet::insert(const Triple& t) {
  if (!t.fully_observed()) throw ConfigError("known-triple sets hold fully observed triples only");
  keys_.insert(Key{t.source->index, t.relation->index, t.target->index});
}

void TripleSet::insert(std::span<const Triple> triples) {
  for (const auto& t : triples)
    if (t.fully_observed()) insert(t);
}

bool TripleSet::contains(WordId s, RelId r, WordId t) const { return keys_.contains(Key{s.index, r.index, t.index}); }

bool TripleSet::contains(const Triple& t) const {
  return t.fully_observed() && contains(*t.source, *t.relation, *t.target);
}

Triple corrupt_target(const Triple& triple, std::size_t vocab_size, const TripleSet& known, Rng& rng) {
  if (!triple.fully_observed()) throw ConfigError("only fully observed triples can be corrupted");
  if (vocab_size < 2) throw ConfigError("corruption needs at least two words");
  const auto admissible = [&](std::size_t t) {
    return t != triple.target->index && !known.contains(*triple.source, *triple.relation, WordId{t});
  };
  std::uniform_int_distribution<std::size_t> any(0, vocab_size - 1);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::size_t t = any(rng);
    if (admissible(t)) return Triple{triple.source, triple.relation, WordId{t}, triple.weight};
  }
  // Dense known set: draw directly from the admissible list.
  std::vector<std::size_t> candidates;
  for (std::size_t t = 0; t < vocab_size; ++t)
    if (admissible(t)) candidates.push_back(t);
  if (candidates.empty()) throw ConfigError("no admissible corruption exists for this triple");
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return Triple{triple.source, triple.relation, WordId{candidates[pick(rng)]}, triple.weight};
}

std::vector<ScoredTriple> score_with_corruptions(const ModelParams& params, EnergyKind kind,
                                                 std::span<const Triple> positives, const TripleSet& known,
                                                 Rng& rng) {
  std::vector<ScoredTriple> out;
  out.reserve(2 * positives.size());
  for (const auto& pos : positives) {
    if (!pos.fully_observed()) throw ConfigError("evaluation triples must be fully observed");
    const auto neg = corrupt_target(pos, params.vocab_size(), known, rng);
    out.push_back({pos, energy(params, kind, *pos.source, *pos.relation, *pos.target), true});
    out.push_back({neg, energy(params, kind, *neg.source, *neg.relation, *neg.target), false});
  }
  return out;
}

namespace {

struct Labeled {
  double score;
  bool is_true;
};

std::map<RelId, std::vector<Labeled>> group_by_relation(std::span<const ScoredTriple> scored) {
  std::map<RelId, std::vector<Labeled>> groups;
  for (const auto& s : scored) {
    if (!s.triple.relation) throw ConfigError("scored triples must carry a relation");
    if (!std::isfinite(s.score)) throw ConfigError("non-finite score in evaluation set");
    groups[*s.triple.relation].push_back({s.score, s.is_true});
  }
  return groups;
}

struct Fit {
  double threshold;
  std::size_t correct;
};

// Scans candidates in increasing order and keeps the first strict improvement.
Fit best_threshold(std::vector<Labeled> items) {
  std::ranges::sort(items, {}, &Labeled::score);
  std::size_t negatives = 0;
  for (const auto& x : items) negatives += !x.is_true;

  // Threshold at the lowest score: everything predicted false.
  Fit best{items.front().score, negatives};
  std::size_t pos_below = 0;
  std::size_t neg_below = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    const double score = items[i].score;
    while (i < items.size() && items[i].score == score) {
      pos_below += items[i].is_true;
      neg_below += !items[i].is_true;
      ++i;
    }
    const std::size_t correct = pos_below + (negatives - neg_below);
    const double threshold = i < items.size() ? 0.5 * (score + items[i].score) : std::numeric_limits<double>::infinity();
    if (correct > best.correct) best = Fit{threshold, correct};
  }
  return best;
}

std::optional<double> auroc_of(std::vector<Labeled> items) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (const auto& x : items) (x.is_true ? pos : neg)++;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::ranges::sort(items, {}, &Labeled::score);
  double wins = 0.0;
  std::size_t neg_below = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    const double score = items[i].score;
    std::size_t p = 0;
    std::size_t n = 0;
    while (i < items.size() && items[i].score == score) {
      (items[i].is_true ? p : n)++;
      ++i;
    }
    wins += static_cast<double>(p) * (static_cast<double>(neg - neg_below - n) + 0.5 * static_cast<double>(n));
    neg_below += n;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::string relation_label(RelId r, const Vocabulary* vocab) {
  if (vocab && r.index < vocab->relation_count()) return vocab->relation(r);
  return "r" + std::to_string(r.index);
}

}  // namespace

Thresholds fit_thresholds(std::span<const ScoredTriple> validation, std::vector<std::string>* warnings) {
  Thresholds out;
  for (auto& [rel, items] : group_by_relation(validation)) {
    const auto positives = static_cast<std::size_t>(std::ranges::count_if(items, &Labeled::is_true));
    if (positives == 0 || positives == items.size()) {
      out[rel] = RelationThreshold{std::numeric_limits<double>::infinity(),
                                   static_cast<double>(positives) / static_cast<double>(items.size()), true};
      if (warnings)
        warnings->push_back("relation " + std::to_string(rel.index) +
                            " has single-class validation data; predicting every triple true");
      continue;
    }
    const auto fit = best_threshold(items);
    out[rel] = RelationThreshold{fit.threshold, static_cast<double>(fit.correct) / static_cast<double>(items.size()),
                                 false};
  }
  return out;
}

std::optional<double> auroc(std::span<const ScoredTriple> scored) {
  std::vector<Labeled> items;
  items.reserve(scored.size());
  for (const auto& s : scored) items.push_back({s.score, s.is_true});
  return auroc_of(std::move(items));
}

double best_global_threshold_accuracy(std::span<const ScoredTriple> validation) {
  if (validation.empty()) throw ConfigError("empty validation set");
  std::vector<Labeled> items;
  for (const auto& s : validation) items.push_back({s.score, s.is_true});
  const auto n = static_cast<double>(items.size());
  return static_cast<double>(best_threshold(std::move(items)).correct) / n;
}

EvalReport classify_and_report(std::span<const ScoredTriple> test, const Thresholds& thresholds) {
  if (test.empty()) throw ConfigError("empty test set");
  EvalReport report;
  for (auto& [rel, items] : group_by_relation(test)) {
    auto it = thresholds.find(rel);
    if (it == thresholds.end())
      throw ConfigError("no threshold fitted for relation " + std::to_string(rel.index));
    RelationReport rr;
    rr.relation = rel;
    rr.threshold = it->second.value;
    rr.one_class = it->second.one_class;
    for (const auto& x : items) {
      (x.is_true ? rr.positives : rr.negatives)++;
      const bool predicted = x.score < rr.threshold;
      rr.correct += predicted == x.is_true;
    }
    rr.accuracy = static_cast<double>(rr.correct) / static_cast<double>(items.size());
    rr.auroc = auroc_of(items);
    report.total += items.size();
    report.correct += rr.correct;
    report.per_relation.push_back(rr);
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
  report.auroc = auroc(test);
  return report;
}

std::string EvalReport::to_table(const Vocabulary* vocab) const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %12s %6s %6s %9s %8s\n", "relation", "threshold", "pos", "neg", "accuracy",
                "auroc");
  out << line;
  for (const auto& rr : per_relation) {
    const std::string name = relation_label(rr.relation, vocab) + (rr.one_class ? " (!)" : "");
    const std::string auc = rr.auroc ? std::to_string(*rr.auroc).substr(0, 6) : "n/a";
    std::snprintf(line, sizeof line, "%-28s %12.6g %6zu %6zu %9.4f %8s\n", name.c_str(), rr.threshold, rr.positives,
                  rr.negatives, rr.accuracy, auc.c_str());
    out << line;
  }
  std::size_t positives = 0;
  std::size_t negatives = 0;
  for (const auto& rr : per_relation) {
    positives += rr.positives;
    negatives += rr.negatives;
  }
  const std::string auc = auroc ? std::to_string(*auroc).substr(0, 6) : "n/a";
  std::snprintf(line, sizeof line, "%-28s %12s %6zu %6zu %9.4f %8s\n", "overall", "", positives, negatives, accuracy,
                auc.c_str());
  out << line;
  return out.str();
}

std::string EvalReport::to_json_lines(const Vocabulary* vocab) const {
  std::ostringstream out;
  for (const auto& rr : per_relation) {
    nlohmann::json j{{"record", "relation"},
                     {"relation", relation_label(rr.relation, vocab)},
                     {"relation_id", rr.relation.index},
                     {"threshold", std::isfinite(rr.threshold) ? nlohmann::json(rr.threshold) : nlohmann::json("inf")},
                     {"one_class", rr.one_class},
                     {"positives", rr.positives},
                     {"negatives", rr.negatives},
                     {"correct", rr.correct},
                     {"accuracy", rr.accuracy},
                     {"auroc", rr.auroc ? nlohmann::json(*rr.auroc) : nlohmann::json(nullptr)}};
    out << j.dump() << '\n';
  }
  nlohmann::json overall{{"record", "overall"},
                         {"total", total},
                         {"correct", correct},
                         {"accuracy", accuracy},
                         {"auroc", auroc ? nlohmann::json(*auroc) : nlohmann::json(nullptr)}};
  out << overall.dump() << '\n';
  return out.str();
}

}  // namespace rblt
