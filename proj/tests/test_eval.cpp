#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "rblt/eval.hpp"
#include "test_support.hpp"

using namespace rblt;

namespace {

ScoredTriple scored(std::size_t r, double score, bool is_true) {
  return ScoredTriple{make_triple(0, r, 1), score, is_true};
}

// Fraction of (true, corrupt) pairs where the true triple scores lower; ties 1/2.
double pairwise_auroc(const std::vector<ScoredTriple>& xs) {
  double wins = 0.0;
  double pairs = 0.0;
  for (const auto& a : xs)
    for (const auto& b : xs)
      if (a.is_true && !b.is_true) {
        pairs += 1.0;
        wins += a.score < b.score ? 1.0 : (a.score == b.score ? 0.5 : 0.0);
      }
  return wins / pairs;
}

double accuracy_at(const std::vector<ScoredTriple>& xs, double threshold) {
  std::size_t ok = 0;
  for (const auto& x : xs) ok += (x.score < threshold) == x.is_true;
  return static_cast<double>(ok) / static_cast<double>(xs.size());
}

std::vector<ScoredTriple> random_scores(std::mt19937_64& rng, std::size_t n, std::size_t relations) {
  std::normal_distribution<double> gauss;
  std::vector<ScoredTriple> xs;
  for (std::size_t i = 0; i < n; ++i) {
    const bool label = rng() % 2 == 0;
    const std::size_t r = rng() % relations;
    // Quantized so ties are common.
    const double score = std::round(4.0 * (gauss(rng) + (label ? -0.7 * double(r) : 0.0))) / 4.0;
    xs.push_back(scored(r, score, label));
  }
  // Every relation needs both labels.
  for (std::size_t r = 0; r < relations; ++r) {
    xs.push_back(scored(r, -1.0, true));
    xs.push_back(scored(r, 1.0, false));
  }
  return xs;
}

}  // namespace

TEST_CASE("target corruption") {
  SUBCASE("two words: the only admissible corruption is forced") {
    TripleSet known;
    known.insert(make_triple(0, 0, 1));
    Rng rng(3);
    for (int k = 0; k < 20; ++k) CHECK(corrupt_target(make_triple(0, 0, 1), 2, known, rng) == make_triple(0, 0, 0));
  }
  SUBCASE("never returns a known triple or the original target") {
    TripleSet known;
    for (std::size_t t = 0; t < 6; ++t) known.insert(make_triple(2, 1, t));
    const auto original = make_triple(2, 1, 0);
    Rng rng(11);
    for (int k = 0; k < 10000; ++k) {
      const auto c = corrupt_target(original, 10, known, rng);
      CHECK_FALSE(known.contains(c));
      CHECK(c.source == original.source);
      CHECK(c.relation == original.relation);
    }
  }
  SUBCASE("uniform over admissible targets") {
    // Admissible targets: 3..11 (9 words).
    TripleSet known;
    for (std::size_t t = 0; t < 3; ++t) known.insert(make_triple(0, 0, t));
    Rng rng(5);
    std::vector<double> counts(12, 0.0);
    const int draws = 45000;
    for (int k = 0; k < draws; ++k) counts[corrupt_target(make_triple(0, 0, 0), 12, known, rng).target->index] += 1;
    double chi2 = 0.0;
    const double expected = draws / 9.0;
    for (std::size_t t = 0; t < 3; ++t) CHECK(counts[t] == 0.0);
    for (std::size_t t = 3; t < 12; ++t) chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
    // 8 degrees of freedom; the 0.999 quantile is 26.12.
    CHECK(chi2 < 26.12);
  }
  SUBCASE("no admissible target") {
    TripleSet known;
    known.insert(make_triple(0, 0, 0));
    known.insert(make_triple(0, 0, 1));
    Rng rng(1);
    CHECK_THROWS_AS(corrupt_target(make_triple(0, 0, 0), 2, known, rng), ConfigError);
    CHECK_THROWS_AS(corrupt_target(make_triple(0, 0, 0), 1, TripleSet{}, rng), ConfigError);
  }
}

TEST_CASE("scoring positives with corruptions") {
  const auto p = rblt::testing::random_params(9, 2, 3, 2);
  const std::vector<Triple> pos{make_triple(1, 0, 2), make_triple(3, 1, 4)};
  TripleSet known(pos);
  Rng a(8);
  Rng b(8);
  const auto xs = score_with_corruptions(p, EnergyKind::Cosine, pos, known, a);
  REQUIRE(xs.size() == 4);
  CHECK(std::count_if(xs.begin(), xs.end(), [](const auto& x) { return x.is_true; }) == 2);
  for (const auto& x : xs)
    CHECK(x.score == energy(p, EnergyKind::Cosine, *x.triple.source, *x.triple.relation, *x.triple.target));
  const auto ys = score_with_corruptions(p, EnergyKind::Cosine, pos, known, b);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(xs[i].triple == ys[i].triple);
}

TEST_CASE("threshold fitting") {
  SUBCASE("separated scores pick the midpoint of the gap") {
    const std::vector<ScoredTriple> v{scored(0, -0.9, true), scored(0, -0.8, true), scored(0, -0.1, false)};
    const auto th = fit_thresholds(v);
    CHECK(th.at(RelId{0}).value == doctest::Approx(-0.45).epsilon(1e-15));
    CHECK(th.at(RelId{0}).validation_accuracy == 1.0);
  }
  SUBCASE("identical scores give the majority-class accuracy") {
    const std::vector<ScoredTriple> v{scored(0, 0.3, true), scored(0, 0.3, false), scored(0, 0.3, false)};
    CHECK(fit_thresholds(v).at(RelId{0}).validation_accuracy == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("one-class relations are flagged and accept everything") {
    const std::vector<ScoredTriple> v{scored(0, -1.0, true), scored(0, 1.0, false), scored(1, 0.5, true)};
    std::vector<std::string> warnings;
    const auto th = fit_thresholds(v, &warnings);
    CHECK(th.at(RelId{1}).one_class);
    CHECK(std::isinf(th.at(RelId{1}).value));
    CHECK(warnings.size() == 1);
    CHECK_FALSE(th.at(RelId{0}).one_class);
  }
  SUBCASE("matches an exhaustive scan over every candidate threshold") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = random_scores(rng, 5 + rng() % 30, 1);
      std::set<double> candidates{-1e300, 1e300};
      for (const auto& x : v) {
        candidates.insert(x.score - 1e-9);
        candidates.insert(x.score + 1e-9);
      }
      double best = 0.0;
      for (double c : candidates) best = std::max(best, accuracy_at(v, c));
      const auto fitted = fit_thresholds(v).at(RelId{0});
      CHECK(fitted.validation_accuracy == doctest::Approx(best).epsilon(1e-15));
      CHECK(accuracy_at(v, fitted.value) == doctest::Approx(best).epsilon(1e-15));
    }
  }
  SUBCASE("per-relation fitting dominates any single global threshold") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = random_scores(rng, 20 + rng() % 40, 3);
      const auto report = classify_and_report(v, fit_thresholds(v));
      CHECK(report.accuracy >= best_global_threshold_accuracy(v) - 1e-15);
    }
  }
  SUBCASE("empty validation set") {
    CHECK(fit_thresholds({}).empty());
    CHECK_THROWS_AS(best_global_threshold_accuracy({}), ConfigError);
  }
}

TEST_CASE("AUROC") {
  SUBCASE("perfect ranking") {
    const std::vector<ScoredTriple> xs{scored(0, -2, true), scored(0, -1, true), scored(0, 0, false)};
    CHECK(*auroc(xs) == 1.0);
  }
  SUBCASE("all scores equal") {
    const std::vector<ScoredTriple> xs{scored(0, 1, true), scored(0, 1, false), scored(1, 1, false)};
    CHECK(*auroc(xs) == 0.5);
  }
  SUBCASE("single class has no AUROC") {
    const std::vector<ScoredTriple> xs{scored(0, 1, true)};
    CHECK_FALSE(auroc(xs).has_value());
  }
  SUBCASE("agrees with the pairwise definition and ignores monotone transforms") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      auto xs = random_scores(rng, 2 + rng() % 50, 2);
      const double a = *auroc(xs);
      CHECK(a == doctest::Approx(pairwise_auroc(xs)).epsilon(1e-14));
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      for (auto& x : xs) x.score = std::exp(0.5 * x.score) + 3.0;
      CHECK(*auroc(xs) == doctest::Approx(a).epsilon(1e-14));
    }
  }
}

TEST_CASE("classification report") {
  const std::vector<ScoredTriple> valid{scored(0, -1, true), scored(0, 1, false), scored(1, -3, true),
                                        scored(1, -2, false)};
  const auto th = fit_thresholds(valid);
  const std::vector<ScoredTriple> test{scored(0, -0.5, true), scored(0, 0.5, false), scored(1, -2.4, true),
                                       scored(1, -2.6, false)};
  const auto report = classify_and_report(test, th);
  CHECK(report.total == 4);
  CHECK(report.correct == 2);
  CHECK(report.accuracy == 0.5);
  REQUIRE(report.per_relation.size() == 2);
  CHECK(report.per_relation[0].accuracy == 1.0);
  CHECK(report.per_relation[1].accuracy == 0.0);
  CHECK(classify_and_report(test, th).to_json_lines() == report.to_json_lines());
  CHECK(report.to_table().find("overall") != std::string::npos);

  CHECK_THROWS_AS(classify_and_report({}, th), ConfigError);
  const std::vector<ScoredTriple> unseen{scored(5, 0.0, true)};
  CHECK_THROWS_AS(classify_and_report(unseen, th), ConfigError);
}

TEST_CASE("planted instances") {
  PlantedConfig small;
  small.vocab_size = 5;
  small.relation_count = 2;
  small.dim = 3;
  small.inverse_temperature = 2.0;
  small.train_triples = 100000;
  small.valid_fraction = 0.0;
  small.test_fraction = 0.0;
  small.seed = 4;

  SUBCASE("empirical frequencies match the exact joint") {
    const auto inst = make_planted_instance(small);
    REQUIRE(inst.train.size() == 100000);
    const auto exact = exact_joint_distribution(inst.truth, inst.truth_energy);
    std::vector<double> freq(exact.size(), 0.0);
    for (const auto& t : inst.train) freq[joint_index(t.source->index, t.relation->index, t.target->index, 5, 2)] += 1e-5;
    double tv = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) tv += std::abs(freq[i] - exact[i]);
    CHECK(0.5 * tv <= 0.02);
  }
  SUBCASE("splits are disjoint and the generator is deterministic") {
    PlantedConfig cfg;
    cfg.train_triples = 3000;
    cfg.vocab_size = 40;
    const auto a = make_planted_instance(cfg);
    const auto b = make_planted_instance(cfg);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    CHECK(a.truth == b.truth);
    CHECK(a.describe() == b.describe());
    CHECK(!a.valid.empty());
    CHECK(!a.test.empty());
    const TripleSet train(a.train);
    const TripleSet valid(a.valid);
    for (const auto& t : a.valid) CHECK_FALSE(train.contains(t));
    for (const auto& t : a.test) {
      CHECK_FALSE(train.contains(t));
      CHECK_FALSE(valid.contains(t));
    }
    CHECK(TripleSet(a.test).size() == a.test.size());
    cfg.seed = 2;
    CHECK_FALSE(make_planted_instance(cfg).train == a.train);
  }
  SUBCASE("ground truth shape") {
    PlantedConfig cfg;
    cfg.train_triples = 10;
    const auto inst = make_planted_instance(cfg);
    CHECK(inst.vocab.word_count() == 200);
    CHECK(inst.vocab.word(WordId{7}) == "w007");
    CHECK(inst.vocab.relation(RelId{3}) == "r3");
    const double radius = std::sqrt(cfg.inverse_temperature);
    CHECK(inst.truth.source.row(0).norm() == doctest::Approx(radius));
    for (const auto& op : inst.truth.relations) {
      CHECK((op.linear.transpose() * op.linear - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-12);
      CHECK(op.offset.norm() == 0.0);
    }
  }
  SUBCASE("refuses oversized instances") {
    PlantedConfig big;
    big.vocab_size = 1000;
    big.relation_count = 2;
    CHECK_THROWS_AS(make_planted_instance(big), StateSpaceTooLarge);
  }
}
