#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "rblt/sampler.hpp"
#include "test_support.hpp"

using namespace rblt;
using rblt::testing::random_params;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// One triple (0, 0, 1) with energy -25 under Dot; every other triple has energy 0.
ModelParams spiked_model() {
  ModelParams p(3, 2, 2);
  p.relations[0] = RelationOperator::identity(2);
  p.relations[1] = RelationOperator::zeros(2);
  p.source.row(0) << 5.0, 0.0;
  p.target.row(1) << 5.0, 0.0;
  return p;
}

}  // namespace

TEST_CASE("Boltzmann weights") {
  SUBCASE("equal energies give a uniform vector") {
    const auto p = boltzmann_weights(std::vector<double>(5, 3.7));
    for (double x : p) CHECK(x == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("energies (-ln 2, 0, 0)") {
    const auto p = boltzmann_weights(std::vector<double>{-std::log(2.0), 0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p[2] == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("huge energies do not overflow") {
    const auto p = boltzmann_weights(std::vector<double>{-1e6, -1e6 + std::log(3.0)});
    CHECK(p[0] == doctest::Approx(0.75));
    CHECK(log_sum_exp_neg(std::vector<double>{-1e6, -1e6}) == doctest::Approx(1e6 + std::log(2.0)));
  }
}

TEST_CASE("conditional distributions match a direct normalization of energy()") {
  const auto p = random_params(6, 3, 3, 8, 2.0);
  const Triple fixed = make_triple(4, 2, 1);
  for (EnergyKind kind : {EnergyKind::Dot, EnergyKind::Cosine, EnergyKind::FrobeniusCosine}) {
    for (Axis axis : {Axis::Source, Axis::Relation, Axis::Target}) {
      const auto got = conditional_distribution(p, kind, axis, fixed);
      std::vector<double> w(got.size());
      for (std::size_t k = 0; k < w.size(); ++k) {
        const auto full = with_axis(fixed, axis, k);
        w[k] = std::exp(-energy(p, kind, *full.source, *full.relation, *full.target));
      }
      const double z = sum(w);
      for (std::size_t k = 0; k < w.size(); ++k) CHECK(got[k] == doctest::Approx(w[k] / z).epsilon(1e-12));
    }
  }
}

TEST_CASE("every conditional sums to one") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = random_params(2 + trial % 9, 1 + trial % 4, 1 + trial % 5, rng(), 4.0);
    const auto kind = static_cast<EnergyKind>(trial % 3);
    const Triple fixed = make_triple(rng() % p.vocab_size(), rng() % p.relation_count(), rng() % p.vocab_size());
    for (Axis axis : {Axis::Source, Axis::Relation, Axis::Target}) {
      const auto probs = conditional_distribution(p, kind, axis, fixed);
      CHECK(std::abs(sum(probs) - 1.0) <= 1e-12);
      for (double x : probs) CHECK(x >= 0.0);
    }
  }
}

TEST_CASE("a single relation gives a one-point relation conditional") {
  const auto p = random_params(4, 1, 3, 2);
  const auto probs = conditional_distribution(p, EnergyKind::Cosine, Axis::Relation, make_triple(0, 0, 3));
  REQUIRE(probs.size() == 1);
  CHECK(probs[0] == 1.0);
}

TEST_CASE("Gibbs sweeps") {
  SUBCASE("singleton support leaves the state unchanged") {
    const auto p = random_params(1, 1, 2, 4);
    Rng rng(1);
    const ChainState s{WordId{0}, RelId{0}, WordId{0}};
    CHECK(gibbs_sweep(p, EnergyKind::Cosine, s, rng) == s);
  }
  SUBCASE("fixed seed gives a fixed trajectory") {
    const auto p = random_params(9, 3, 4, 12);
    Rng a(42);
    Rng b(42);
    ChainState x{WordId{1}, RelId{2}, WordId{3}};
    ChainState y = x;
    for (int k = 0; k < 50; ++k) {
      x = gibbs_sweep(p, EnergyKind::Cosine, x, a);
      y = gibbs_sweep(p, EnergyKind::Cosine, y, b);
      REQUIRE(x == y);
    }
  }
  SUBCASE("a dominant triple captures the chain") {
    const auto p = spiked_model();
    const auto joint = exact_joint_distribution(p, EnergyKind::Dot);
    const double p_spike = joint[joint_index(0, 0, 1, 3, 2)];
    CHECK(p_spike > 0.999999);
    Rng rng(5);
    ChainState s{WordId{2}, RelId{1}, WordId{0}};
    int hits = 0;
    const int sweeps = 2000;
    for (int k = 0; k < sweeps; ++k) {
      s = gibbs_sweep(p, EnergyKind::Dot, s, rng);
      hits += s == ChainState{WordId{0}, RelId{0}, WordId{1}};
    }
    CHECK(static_cast<double>(hits) / sweeps >= 0.99);
  }
}

TEST_CASE("Gibbs stationary distribution matches the exact joint") {
  // 5 x 2 x 5 = 50 states.
  for (EnergyKind kind : {EnergyKind::Cosine, EnergyKind::Dot}) {
    CAPTURE(to_string(kind));
    // Dot energies grow with the parameter scale; keep the landscape mixable.
    const auto p = random_params(5, 2, 3, 21, kind == EnergyKind::Dot ? 0.7 : 1.5);
    const auto exact = exact_joint_distribution(p, kind);
    std::vector<double> counts(exact.size(), 0.0);
    Rng rng(7);
    ChainState s{WordId{0}, RelId{0}, WordId{0}};
    for (int k = 0; k < 1000; ++k) s = gibbs_sweep(p, kind, s, rng);
    const int sweeps = 100000;
    for (int k = 0; k < sweeps; ++k) {
      s = gibbs_sweep(p, kind, s, rng);
      counts[joint_index(s.source.index, s.relation.index, s.target.index, 5, 2)] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) tv += std::abs(counts[i] / sweeps - exact[i]);
    CHECK(0.5 * tv <= 0.02);
  }
}

TEST_CASE("exact log partition") {
  SUBCASE("all energies zero") {
    ModelParams p(4, 3, 2);
    CHECK(exact_log_partition(p, EnergyKind::Dot) == doctest::Approx(std::log(4.0 * 4.0 * 3.0)).epsilon(1e-15));
  }
  SUBCASE("four-term hand sum: energies (0, 0, 0, -ln 3)") {
    ModelParams p(2, 1, 1);
    p.relations[0] = RelationOperator::identity(1);
    p.source(1, 0) = 1.0;
    p.target(1, 0) = std::log(3.0);
    const auto e = enumerate_energies(p, EnergyKind::Dot);
    CHECK(e[joint_index(1, 0, 1, 2, 1)] == doctest::Approx(-std::log(3.0)));
    CHECK(exact_log_partition(p, EnergyKind::Dot) == doctest::Approx(std::log(6.0)).epsilon(1e-15));
  }
  SUBCASE("adding a constant to every energy shifts log Z by its negative") {
    // An extra coordinate with v = 1 and a -k offset adds k to every Dot energy.
    const auto base = random_params(5, 2, 3, 3);
    ModelParams shifted(5, 2, 4);
    const double k = 2.75;
    shifted.source.leftCols(3) = base.source;
    shifted.target.leftCols(3) = base.target;
    shifted.target.col(3).setOnes();
    for (std::size_t r = 0; r < 2; ++r) {
      shifted.relations[r].linear.topLeftCorner(3, 3) = base.relations[r].linear;
      shifted.relations[r].offset.head(3) = base.relations[r].offset;
      shifted.relations[r].offset[3] = -k;
    }
    CHECK(exact_log_partition(shifted, EnergyKind::Dot) ==
          doctest::Approx(exact_log_partition(base, EnergyKind::Dot) - k).epsilon(1e-13));
  }
  SUBCASE("refuses oversized state spaces") {
    ModelParams p(1001, 1, 1);
    CHECK_THROWS_AS(exact_log_partition(p, EnergyKind::Dot), StateSpaceTooLarge);
    CHECK_THROWS_AS(exact_model_expectation_grad(p, EnergyKind::Dot), StateSpaceTooLarge);
  }
}

TEST_CASE("exact model expectation") {
  SUBCASE("uniform energies give the plain mean of per-triple gradients") {
    // Zero target vectors make every Dot energy 0 while dE/dv stays non-zero.
    auto p = random_params(3, 2, 2, 14);
    p.target.setZero();
    auto mean = GradientAccumulator::zeros_like(p);
    const double n = 3.0 * 3.0 * 2.0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t t = 0; t < 3; ++t) mean.axpy(1.0 / n, energy_grad(p, EnergyKind::Dot, WordId{s}, RelId{r}, WordId{t}));
    const auto got = exact_model_expectation_grad(p, EnergyKind::Dot);
    CHECK(mean.norm() > 0.1);
    CHECK(rblt::testing::relative_error(got, mean) <= 1e-13);
  }
  SUBCASE("a degenerate distribution gives that triple's gradient") {
    const auto p = spiked_model();
    const auto got = exact_model_expectation_grad(p, EnergyKind::Dot);
    const auto want = energy_grad(p, EnergyKind::Dot, WordId{0}, RelId{0}, WordId{1});
    CHECK(rblt::testing::relative_error(got, want) <= 1e-8);
  }
}

TEST_CASE("chain pools") {
  const auto p = random_params(12, 3, 4, 6);
  std::vector<ChainState> starts(5, ChainState{WordId{0}, RelId{0}, WordId{0}});
  SUBCASE("chains with distinct streams diverge") {
    ChainPool pool(starts, 3);
    pool.advance(p, EnergyKind::Cosine, 3);
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, int> seen;
    for (const auto& c : pool.chains()) seen[{c.state.source.index, c.state.relation.index, c.state.target.index}]++;
    CHECK(seen.size() > 1);
  }
  SUBCASE("thread count does not change the result") {
    ChainPool a(starts, 3);
    ChainPool b(starts, 3);
    a.advance(p, EnergyKind::Cosine, 4, 1);
    b.advance(p, EnergyKind::Cosine, 4, 3);
    CHECK(a == b);
  }
  SUBCASE("seeding from data fills unobserved slots") {
    std::vector<Triple> data{Triple{WordId{1}, std::nullopt, WordId{2}, 1.0}};
    const auto pool = ChainPool::seed_from_data(p, EnergyKind::Cosine, data, 4, 11);
    REQUIRE(pool.size() == 4);
    for (const auto& c : pool.chains()) {
      CHECK(c.state.source == WordId{1});
      CHECK(c.state.target == WordId{2});
      CHECK(c.state.relation.index < 3);
    }
    CHECK_THROWS_AS(ChainPool::seed_from_data(p, EnergyKind::Cosine, data, 0, 1), ConfigError);
  }
}

TEST_CASE("sampled model expectation approaches the exact one") {
  const auto p = random_params(15, 3, 4, 40);
  const auto exact = exact_model_expectation_grad(p, EnergyKind::Cosine);
  const auto sampled = sampled_model_expectation_grad(p, EnergyKind::Cosine, 10, 10000, 50, 3);
  CHECK(rblt::testing::cosine_similarity(sampled, exact) >= 0.95);
  CHECK(sampled == sampled_model_expectation_grad(p, EnergyKind::Cosine, 10, 10000, 50, 3));
}
