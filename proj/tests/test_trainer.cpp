#include <doctest.h>

#include <cmath>

#include "rblt/checkpoint.hpp"
#include "rblt/trainer.hpp"
#include "test_support.hpp"

using namespace rblt;
using rblt::testing::random_params;
using rblt::testing::relative_error;

namespace {

Triple masked_relation(std::size_t s, std::size_t t, double weight = 1.0) {
  return Triple{WordId{s}, std::nullopt, WordId{t}, weight};
}

std::vector<Triple> small_dataset() {
  std::vector<Triple> data;
  for (std::size_t i = 0; i < 40; ++i) data.push_back(make_triple(i % 6, i % 2, (i * 5 + 1) % 6));
  return data;
}

}  // namespace

TEST_CASE("data term of fully observed triples") {
  const auto p = random_params(5, 2, 3, 1);
  SUBCASE("a single observed triple is its energy gradient") {
    const std::vector<Triple> batch{make_triple(1, 0, 3)};
    const auto got = data_term_grad(p, EnergyKind::Cosine, batch);
    CHECK(relative_error(got, energy_grad(p, EnergyKind::Cosine, WordId{1}, RelId{0}, WordId{3})) <= 1e-15);
  }
  SUBCASE("batch mean") {
    const std::vector<Triple> batch{make_triple(1, 0, 3), make_triple(2, 1, 4)};
    auto want = energy_grad(p, EnergyKind::Cosine, WordId{1}, RelId{0}, WordId{3});
    want.axpy(1.0, energy_grad(p, EnergyKind::Cosine, WordId{2}, RelId{1}, WordId{4}));
    want.scale(0.5);
    CHECK(relative_error(data_term_grad(p, EnergyKind::Cosine, batch), want) <= 1e-15);
  }
  SUBCASE("doubling a weight doubles its contribution") {
    const std::vector<Triple> one{make_triple(1, 0, 3, 1.0)};
    const std::vector<Triple> two{make_triple(1, 0, 3, 2.0)};
    auto g1 = data_term_grad(p, EnergyKind::Dot, one);
    g1.scale(2.0);
    CHECK(relative_error(data_term_grad(p, EnergyKind::Dot, two), g1) <= 1e-15);
  }
  SUBCASE("empty batch is rejected") {
    CHECK_THROWS_AS(data_term_grad(p, EnergyKind::Dot, {}), ConfigError);
  }
}

TEST_CASE("data term of partially observed triples") {
  SUBCASE("one relation: masking changes nothing") {
    const auto p = random_params(4, 1, 3, 2);
    const std::vector<Triple> masked{masked_relation(0, 2)};
    const std::vector<Triple> observed{make_triple(0, 0, 2)};
    CHECK(relative_error(data_term_grad(p, EnergyKind::Cosine, masked), data_term_grad(p, EnergyKind::Cosine, observed)) <=
          1e-15);
  }
  SUBCASE("two relations with equal energies split the weight evenly") {
    auto p = random_params(4, 2, 3, 3);
    p.relations[1] = p.relations[0];
    const std::vector<Triple> masked{masked_relation(1, 2)};
    auto want = energy_grad(p, EnergyKind::Cosine, WordId{1}, RelId{0}, WordId{2});
    want.axpy(1.0, energy_grad(p, EnergyKind::Cosine, WordId{1}, RelId{1}, WordId{2}));
    want.scale(0.5);
    CHECK(relative_error(data_term_grad(p, EnergyKind::Cosine, masked), want) <= 1e-15);
  }
  SUBCASE("posterior-weighted sum over completions, every axis") {
    const auto p = random_params(6, 3, 4, 4, 1.5);
    const Triple full = make_triple(2, 1, 5, 0.7);
    for (Axis axis : {Axis::Source, Axis::Relation, Axis::Target}) {
      Triple masked = full;
      if (axis == Axis::Source) masked.source.reset();
      if (axis == Axis::Relation) masked.relation.reset();
      if (axis == Axis::Target) masked.target.reset();
      for (EnergyKind kind : {EnergyKind::Dot, EnergyKind::Cosine, EnergyKind::FrobeniusCosine}) {
        const auto posterior = conditional_distribution(p, kind, axis, full);
        auto want = GradientAccumulator::zeros_like(p);
        for (std::size_t k = 0; k < posterior.size(); ++k) {
          const std::vector<Triple> completion{with_axis(masked, axis, k)};
          want.axpy(posterior[k], data_term_grad(p, kind, completion));
        }
        const std::vector<Triple> batch{masked};
        auto diff = data_term_grad(p, kind, batch);
        diff.axpy(-1.0, want);
        CHECK(diff.norm() <= 1e-12);
      }
    }
  }
  SUBCASE("two missing slots are rejected") {
    const auto p = random_params(3, 2, 2, 5);
    const std::vector<Triple> batch{Triple{WordId{0}, std::nullopt, std::nullopt, 1.0}};
    CHECK_THROWS_AS(data_term_grad(p, EnergyKind::Cosine, batch), ConfigError);
  }
}

TEST_CASE("PCD gradient") {
  const auto p = random_params(8, 3, 3, 6);
  SUBCASE("chains equal to the batch cancel the data term") {
    const std::vector<Triple> batch{make_triple(1, 0, 2), make_triple(3, 2, 7), make_triple(5, 1, 5)};
    std::vector<ChainState> states;
    for (const auto& t : batch) states.push_back({*t.source, *t.relation, *t.target});
    ChainPool pool(states, 1);
    const auto g = pcd_gradient(p, EnergyKind::Cosine, batch, pool, 0);
    CHECK(g.norm() <= 1e-15);
  }
  SUBCASE("chains persist and advance independently") {
    const std::vector<Triple> batch{make_triple(1, 0, 2)};
    ChainPool pool(std::vector<ChainState>(5, ChainState{WordId{1}, RelId{0}, WordId{2}}), 9);
    const auto before = pool;
    pcd_gradient(p, EnergyKind::Cosine, batch, pool, 3);
    CHECK_FALSE(pool == before);
    int distinct = 0;
    for (std::size_t m = 1; m < pool.size(); ++m) distinct += !(pool.chains()[m].state == pool.chains()[0].state);
    CHECK(distinct > 0);
  }
  SUBCASE("model term is the mean chain gradient") {
    const std::vector<Triple> batch{make_triple(1, 0, 2)};
    ChainPool pool(std::vector<ChainState>{{WordId{0}, RelId{1}, WordId{4}}, {WordId{6}, RelId{2}, WordId{3}}}, 2);
    auto want = energy_grad(p, EnergyKind::Dot, WordId{0}, RelId{1}, WordId{4});
    want.axpy(1.0, energy_grad(p, EnergyKind::Dot, WordId{6}, RelId{2}, WordId{3}));
    want.scale(0.5);
    want.axpy(-1.0, data_term_grad(p, EnergyKind::Dot, batch));
    CHECK(relative_error(pcd_gradient(p, EnergyKind::Dot, batch, pool, 0), want) <= 1e-15);
  }
}

TEST_CASE("L2 gradient") {
  auto p = random_params(3, 2, 2, 7);
  SUBCASE("disabled") { CHECK(l2_grad(p, 0.0, 0.0).norm() == 0.0); }
  SUBCASE("linear decay on operator entries") {
    p.relations[1].linear(0, 1) = 2.0;
    const auto g = l2_grad(p, 0.01, 0.0);
    CHECK(g.relations[1].linear(0, 1) == doctest::Approx(-0.02).epsilon(1e-15));
    CHECK(g.source.norm() == 0.0);
    CHECK(g.relations[0].offset.norm() > 0.0);
  }
  SUBCASE("matches finite differences of -(l2_g/2)|G|^2 - (l2_all/2)|Theta|^2") {
    const double l2_g = 0.01;
    const double l2_all = 0.003;
    auto objective = [&](const ModelParams& q) {
      double ops = 0.0;
      for (const auto& op : q.relations) ops += op.linear.squaredNorm() + op.offset.squaredNorm();
      return -0.5 * l2_g * ops - 0.5 * l2_all * q.dot(q);
    };
    auto fd = GradientAccumulator::zeros_like(p);
    const double h = 1e-5;
    for (std::size_t b = 0; b < p.block_count(); ++b) {
      for (std::size_t i = 0; i < p.block(b).size(); ++i) {
        const double saved = p.block(b)[i];
        p.block(b)[i] = saved + h;
        const double up = objective(p);
        p.block(b)[i] = saved - h;
        const double down = objective(p);
        p.block(b)[i] = saved;
        fd.block(b)[i] = (up - down) / (2 * h);
      }
    }
    CHECK(relative_error(l2_grad(p, l2_g, l2_all), fd) <= 1e-8);
  }
}

TEST_CASE("Adam") {
  const ModelParams shape(2, 1, 1);
  SUBCASE("zero gradient from a fresh state gives a zero step") {
    auto state = AdamState::zeros_like(shape);
    const auto delta = adam_update(state, GradientAccumulator::zeros_like(shape), AdamConstants{});
    CHECK(delta.norm() == 0.0);
    CHECK(state.step == 1);
  }
  SUBCASE("first step with unit gradient moves by alpha") {
    auto state = AdamState::zeros_like(shape);
    auto g = GradientAccumulator::zeros_like(shape);
    g.source(0, 0) = 1.0;
    g.target(1, 0) = -1.0;
    AdamConstants k;
    k.learning_rate = 0.001;
    const auto delta = adam_update(state, g, k);
    CHECK(delta.source(0, 0) == doctest::Approx(0.001 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(delta.target(1, 0) == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(delta.source(1, 0) == 0.0);
  }
  SUBCASE("two steps against a hand computation with the beta1 decay") {
    AdamConstants k;
    k.learning_rate = 0.1;
    k.beta1_decay = 0.5;
    auto state = AdamState::zeros_like(shape);
    auto g = GradientAccumulator::zeros_like(shape);
    g.source(0, 0) = 2.0;
    adam_update(state, g, k);
    g.source(0, 0) = -1.0;
    const auto delta = adam_update(state, g, k);
    // beta1_1 = 0.9, beta1_2 = 0.45
    const double m1 = 0.1 * 2.0;
    const double v1 = 0.001 * 4.0;
    const double m2 = 0.45 * m1 + 0.55 * -1.0;
    const double v2 = 0.999 * v1 + 0.001 * 1.0;
    const double want = 0.1 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
    CHECK(delta.source(0, 0) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("defaults") {
    const AdamConstants k;
    CHECK(k.beta1 == 0.9);
    CHECK(k.beta2 == 0.999);
    CHECK(k.epsilon == 1e-8);
    CHECK(k.learning_rate == 0.001);
  }
}

TEST_CASE("training configuration defaults") {
  const TrainConfig c;
  CHECK(c.dim == 100);
  CHECK(c.batch_size == 100);
  CHECK(c.gibbs_rounds == 3);
  CHECK(c.adam.learning_rate == 0.001);
  CHECK(c.energy == EnergyKind::Cosine);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("initialization") {
  const auto p = initialize_params(50, 3, 16, 4);
  const double bound = 0.25;
  CHECK(p.source.cwiseAbs().maxCoeff() <= bound);
  CHECK(p.target.cwiseAbs().maxCoeff() <= bound);
  for (const auto& op : p.relations) {
    CHECK((op.linear - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 0.06);
    CHECK(op.offset.norm() == 0.0);
  }
  CHECK(initialize_params(50, 3, 16, 4) == p);
}

TEST_CASE("training loop") {
  const auto data = small_dataset();
  TrainConfig config;
  config.dim = 3;
  config.batch_size = 8;
  config.chains = 3;
  config.adam.learning_rate = 0.01;
  config.seed = 5;
  const auto init = initialize_params(6, 2, 3, 1);

  SUBCASE("zero epochs return the initial parameters") {
    config.epochs = 0;
    const auto result = train(init, data, config);
    CHECK(result.params == init);
    CHECK(result.log.empty());
  }
  SUBCASE("fixed seed gives identical runs") {
    config.epochs = 3;
    const auto a = train(init, data, config);
    const auto b = train(init, data, config);
    CHECK(a.params == b.params);
    REQUIRE(a.log.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
      CHECK(a.log[e].mean_energy == b.log[e].mean_energy);
      CHECK(a.log[e].data_grad_norm == b.log[e].data_grad_norm);
      CHECK(a.log[e].model_grad_norm == b.log[e].model_grad_norm);
      CHECK(a.log[e].steps == 5);
    }
    CHECK_FALSE(a.params == init);
  }
  SUBCASE("resuming from saved state continues the same trajectory") {
    config.epochs = 2;
    const auto straight = train(init, data, config);

    config.epochs = 1;
    const auto first = train(init, data, config);
    const auto dir = rblt::testing::scratch_dir("resume");
    save_checkpoint(Checkpoint{first.params, first.adam, first.pool, config.energy, 1}, dir / "ck.bin");
    auto ck = load_checkpoint(dir / "ck.bin");
    Trainer resumed(ck.params, ck.adam, ck.pool, ck.epochs_done, data, config);
    const auto rec = resumed.run_epoch();
    CHECK(rec.epoch == 2);
    CHECK(resumed.params() == straight.params);
    CHECK(resumed.pool() == straight.pool);
    CHECK(rec.mean_energy == straight.log[1].mean_energy);
  }
  SUBCASE("non-finite parameters abort with the group name") {
    auto poisoned = init;
    poisoned.relations[1].offset[0] = std::numeric_limits<double>::infinity();
    config.epochs = 1;
    try {
      train(poisoned, data, config);
      FAIL("expected an abort");
    } catch (const TrainingAborted& e) {
      CHECK(std::string(e.what()).find("non-finite values in") != std::string::npos);
    }
  }
  SUBCASE("epoch log records serialize as JSON lines") {
    config.epochs = 1;
    const auto r = train(init, data, config);
    const auto line = r.log[0].to_json_line();
    CHECK(line.front() == '{');
    CHECK(line.find("\"model_grad_norm\"") != std::string::npos);
  }
  SUBCASE("bad data is rejected up front") {
    auto bad = data;
    bad.push_back(make_triple(6, 0, 0));
    CHECK_THROWS_AS(Trainer(init, bad, config), ConfigError);
    CHECK_THROWS_AS(Trainer(init, {}, config), ConfigError);
  }
}

TEST_CASE("an exact full-batch gradient step increases the log-likelihood") {
  const auto p = random_params(6, 2, 3, 10, 0.8);
  std::vector<Triple> data;
  for (std::size_t i = 0; i < 30; ++i) data.push_back(make_triple(i % 6, (i / 3) % 2, (i * 7 + 2) % 6));
  for (EnergyKind kind : {EnergyKind::Dot, EnergyKind::Cosine, EnergyKind::FrobeniusCosine}) {
    auto ascent = exact_model_expectation_grad(p, kind);
    ascent.axpy(-1.0, data_term_grad(p, kind, data));
    const double before = exact_mean_log_likelihood(p, kind, data);
    for (double alpha : {1e-3, 1e-4}) {
      ModelParams stepped = p;
      stepped.axpy(alpha, ascent);
      CHECK(exact_mean_log_likelihood(stepped, kind, data) > before);
    }
  }
}

TEST_CASE("observed warm-up skips partially observed triples") {
  std::vector<Triple> data;
  for (std::size_t i = 0; i < 10; ++i) data.push_back(make_triple(i % 4, 0, (i + 1) % 4));
  for (std::size_t i = 0; i < 30; ++i) data.push_back(masked_relation(i % 4, (i + 2) % 4));
  TrainConfig config;
  config.dim = 2;
  config.batch_size = 5;
  config.observed_warmup_epochs = 2;
  config.epochs = 3;
  const auto r = train(initialize_params(4, 2, 2, 1), data, config);
  CHECK(r.log[0].steps == 2);
  CHECK(r.log[1].steps == 2);
  CHECK(r.log[2].steps == 8);

  std::vector<Triple> masked_only(data.begin() + 10, data.end());
  CHECK_THROWS_AS(Trainer(initialize_params(4, 2, 2, 1), masked_only, config), ConfigError);
}
