#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "rblt/eval.hpp"

namespace rblt {

namespace {

Vector random_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

Eigen::MatrixXd random_orthogonal(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix column signs so the draw is Haar-distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < d; ++k)
    if (r(k, k) < 0) q.col(k) *= -1.0;
  return q;
}

}  // namespace

PlantedInstance make_planted_instance(const PlantedConfig& config) {
  if (config.vocab_size < 2 || config.relation_count == 0 || config.dim == 0)
    throw ConfigError("planted instance needs >= 2 words, >= 1 relation and a positive dimension");
  if (config.train_triples == 0) throw ConfigError("planted instance needs a positive training size");
  if (config.valid_fraction < 0.0 || config.test_fraction < 0.0 || config.valid_fraction + config.test_fraction >= 1.0)
    throw ConfigError("planted split fractions must be non-negative and sum below 1");
  if (!(config.inverse_temperature > 0.0)) throw ConfigError("planted inverse temperature must be positive");

  PlantedInstance inst;
  inst.config = config;
  inst.truth_energy = EnergyKind::Dot;
  inst.truth = ModelParams(config.vocab_size, config.relation_count, config.dim);

  Rng rng(config.seed);
  const double radius = std::sqrt(config.inverse_temperature);
  for (std::size_t i = 0; i < config.vocab_size; ++i)
    inst.truth.source.row(static_cast<Eigen::Index>(i)) = radius * random_direction(config.dim, rng).transpose();
  for (std::size_t i = 0; i < config.vocab_size; ++i)
    inst.truth.target.row(static_cast<Eigen::Index>(i)) = radius * random_direction(config.dim, rng).transpose();
  for (auto& op : inst.truth.relations) {
    op.linear = random_orthogonal(config.dim, rng);
    op.offset = Vector::Zero(static_cast<Eigen::Index>(config.dim));
  }

  // Exact joint, sampled through its cumulative distribution.
  const auto probs = exact_joint_distribution(inst.truth, inst.truth_energy);
  std::vector<double> cdf(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cdf.begin());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t nv = config.vocab_size;
  const std::size_t nr = config.relation_count;

  enum class Split : unsigned char { Train, Valid, Test };
  std::unordered_map<std::size_t, Split> assigned;
  std::vector<std::size_t> valid_states;
  std::vector<std::size_t> test_states;
  const std::size_t max_draws = 1000 * config.train_triples + 1000000;
  std::size_t draws = 0;
  while (inst.train.size() < config.train_triples) {
    if (++draws > max_draws) throw ConfigError("planted sampling failed to fill the training split");
    const double u = unit(rng) * cdf.back();
    const auto state = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const std::size_t idx = std::min(state, cdf.size() - 1);
    auto [it, fresh] = assigned.try_emplace(idx, Split::Train);
    if (fresh) {
      const double v = unit(rng);
      if (v < config.valid_fraction) {
        it->second = Split::Valid;
        valid_states.push_back(idx);
      } else if (v < config.valid_fraction + config.test_fraction) {
        it->second = Split::Test;
        test_states.push_back(idx);
      }
    }
    if (it->second == Split::Train) {
      const std::size_t t = idx % nv;
      const std::size_t r = (idx / nv) % nr;
      const std::size_t s = idx / (nv * nr);
      inst.train.push_back(make_triple(s, r, t));
    }
  }
  auto decode = [&](std::size_t idx) { return make_triple(idx / (nv * nr), (idx / nv) % nr, idx % nv); };
  for (auto idx : valid_states) inst.valid.push_back(decode(idx));
  for (auto idx : test_states) inst.test.push_back(decode(idx));

  std::vector<std::string> words;
  char buf[32];
  const int width = static_cast<int>(std::to_string(nv - 1).size());
  for (std::size_t i = 0; i < nv; ++i) {
    std::snprintf(buf, sizeof buf, "w%0*zu", width, i);
    words.emplace_back(buf);
  }
  std::vector<std::string> rels;
  for (std::size_t r = 0; r < nr; ++r) rels.push_back("r" + std::to_string(r));
  inst.vocab = Vocabulary(std::move(words), std::move(rels));
  return inst;
}

std::string PlantedInstance::describe() const {
  nlohmann::json j{{"generator", "planted"},
                   {"vocab_size", config.vocab_size},
                   {"relation_count", config.relation_count},
                   {"dim", config.dim},
                   {"train_triples", config.train_triples},
                   {"seed", config.seed},
                   {"inverse_temperature", config.inverse_temperature},
                   {"valid_fraction", config.valid_fraction},
                   {"test_fraction", config.test_fraction},
                   {"truth_energy", std::string(to_string(truth_energy))},
                   {"truth_operators", "orthogonal, zero offset"},
                   {"train_size", train.size()},
                   {"valid_size", valid.size()},
                   {"test_size", test.size()}};
  return j.dump();
}

}  // namespace rblt
