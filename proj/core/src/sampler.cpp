#include "rblt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace rblt {

double log_sum_exp_neg(std::span<const double> energies) {
  if (energies.empty()) return -std::numeric_limits<double>::infinity();
  const double lowest = *std::ranges::min_element(energies);
  double acc = 0.0;
  for (double e : energies) acc += std::exp(lowest - e);
  return -lowest + std::log(acc);
}

std::vector<double> boltzmann_weights(std::span<const double> energies) {
  std::vector<double> p(energies.size());
  if (energies.empty()) return p;
  const double lowest = *std::ranges::min_element(energies);
  double total = 0.0;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    p[k] = std::exp(lowest - energies[k]);
    total += p[k];
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    u -= probs[k];
    if (u < 0.0) return k;
  }
  // Rounding left a sliver of mass past the end; take the last supported index.
  for (std::size_t k = probs.size(); k-- > 0;)
    if (probs[k] > 0.0) return k;
  return 0;
}

std::vector<double> conditional_distribution(const ModelParams& params, EnergyKind kind, Axis axis,
                                             const Triple& fixed) {
  std::vector<double> energies(axis_length(params, axis));
  completion_energies(params, kind, axis, fixed, energies);
  return boltzmann_weights(energies);
}

ChainState gibbs_sweep(const ModelParams& params, EnergyKind kind, ChainState state, Rng& rng) {
  std::vector<double> energies(params.vocab_size());

  completion_energies(params, kind, Axis::Source, state.as_triple(), energies);
  state.source = WordId{sample_index(boltzmann_weights(energies), rng)};

  std::vector<double> rel_energies(params.relation_count());
  completion_energies(params, kind, Axis::Relation, state.as_triple(), rel_energies);
  state.relation = RelId{sample_index(boltzmann_weights(rel_energies), rng)};

  completion_energies(params, kind, Axis::Target, state.as_triple(), energies);
  state.target = WordId{sample_index(boltzmann_weights(energies), rng)};
  return state;
}

ChainPool::ChainPool(std::vector<ChainState> starts, std::uint64_t seed) {
  chains_.reserve(starts.size());
  for (std::size_t m = 0; m < starts.size(); ++m) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(m), std::uint64_t{0x5eedc4a1}};
    chains_.push_back(Chain{starts[m], Rng(seq)});
  }
}

ChainPool ChainPool::seed_from_data(const ModelParams& params, EnergyKind kind, std::span<const Triple> data,
                                    std::size_t chain_count, std::uint64_t seed) {
  if (chain_count == 0) throw ConfigError("chain count must be at least 1");
  if (data.empty()) throw ConfigError("cannot seed chains from an empty dataset");
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<ChainState> starts;
  starts.reserve(chain_count);
  for (std::size_t m = 0; m < chain_count; ++m) {
    Triple t = data[pick(rng)];
    for (Axis axis : {Axis::Source, Axis::Relation, Axis::Target}) {
      const bool missing = (axis == Axis::Source && !t.source) || (axis == Axis::Relation && !t.relation) ||
                           (axis == Axis::Target && !t.target);
      if (missing) t = with_axis(t, axis, sample_index(conditional_distribution(params, kind, axis, t), rng));
    }
    starts.push_back(ChainState{*t.source, *t.relation, *t.target});
  }
  return ChainPool(std::move(starts), seed);
}

void ChainPool::advance(const ModelParams& params, EnergyKind kind, std::size_t rounds, std::size_t threads) {
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m)
      for (std::size_t k = 0; k < rounds; ++k) chains_[m].state = gibbs_sweep(params, kind, chains_[m].state, chains_[m].rng);
  };
  threads = std::clamp<std::size_t>(threads, 1, chains_.size() > 0 ? chains_.size() : 1);
  if (threads == 1) {
    run(0, chains_.size());
    return;
  }
  std::vector<std::jthread> workers;
  const std::size_t per = (chains_.size() + threads - 1) / threads;
  for (std::size_t begin = 0; begin < chains_.size(); begin += per)
    workers.emplace_back(run, begin, std::min(begin + per, chains_.size()));
}

// ---------------------------------------------------------------------------
// Exhaustive oracles

namespace {

void guard_state_space(const ModelParams& params) {
  const double states = static_cast<double>(params.vocab_size()) * static_cast<double>(params.vocab_size()) *
                        static_cast<double>(params.relation_count());
  if (states > static_cast<double>(kMaxEnumeratedStates)) {
    throw StateSpaceTooLarge("exact enumeration over " + std::to_string(static_cast<long long>(states)) +
                             " states exceeds the limit of " + std::to_string(kMaxEnumeratedStates));
  }
}

}  // namespace

std::vector<double> enumerate_energies(const ModelParams& params, EnergyKind kind) {
  guard_state_space(params);
  const std::size_t nv = params.vocab_size();
  const std::size_t nr = params.relation_count();
  std::vector<double> energies(nv * nv * nr);
  for (std::size_t s = 0; s < nv; ++s) {
    for (std::size_t r = 0; r < nr; ++r) {
      Triple fixed{WordId{s}, RelId{r}, std::nullopt, 1.0};
      completion_energies(params, kind, Axis::Target, fixed,
                          std::span<double>(energies).subspan(joint_index(s, r, 0, nv, nr), nv));
    }
  }
  return energies;
}

std::vector<double> exact_joint_distribution(const ModelParams& params, EnergyKind kind) {
  return boltzmann_weights(enumerate_energies(params, kind));
}

double exact_log_partition(const ModelParams& params, EnergyKind kind) {
  return log_sum_exp_neg(enumerate_energies(params, kind));
}

GradientAccumulator exact_model_expectation_grad(const ModelParams& params, EnergyKind kind) {
  const auto probs = exact_joint_distribution(params, kind);
  const std::size_t nv = params.vocab_size();
  const std::size_t nr = params.relation_count();
  auto out = GradientAccumulator::zeros_like(params);
  for (std::size_t s = 0; s < nv; ++s)
    for (std::size_t r = 0; r < nr; ++r)
      for (std::size_t t = 0; t < nv; ++t) {
        const double p = probs[joint_index(s, r, t, nv, nr)];
        if (p > 0.0) accumulate_energy_grad(params, kind, WordId{s}, RelId{r}, WordId{t}, p, out);
      }
  return out;
}

GradientAccumulator sampled_model_expectation_grad(const ModelParams& params, EnergyKind kind, std::size_t chains,
                                                   std::size_t sweeps, std::size_t burn_in, std::uint64_t seed) {
  if (chains == 0 || sweeps < chains) throw ConfigError("need at least one chain and one sweep per chain");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, params.vocab_size() - 1);
  std::uniform_int_distribution<std::size_t> rel(0, params.relation_count() - 1);
  std::vector<ChainState> starts(chains);
  for (auto& c : starts) c = ChainState{WordId{word(rng)}, RelId{rel(rng)}, WordId{word(rng)}};
  ChainPool pool(std::move(starts), seed);
  pool.advance(params, kind, burn_in);

  const std::size_t rounds = sweeps / chains;
  const double scale = 1.0 / static_cast<double>(rounds * chains);
  auto out = GradientAccumulator::zeros_like(params);
  for (std::size_t k = 0; k < rounds; ++k) {
    pool.advance(params, kind, 1);
    for (const auto& c : pool.chains())
      accumulate_energy_grad(params, kind, c.state.source, c.state.relation, c.state.target, scale, out);
  }
  return out;
}

double exact_mean_log_likelihood(const ModelParams& params, EnergyKind kind, std::span<const Triple> data) {
  if (data.empty()) throw ConfigError("log-likelihood of an empty dataset");
  const double log_z = exact_log_partition(params, kind);
  double total = 0.0;
  for (const auto& t : data) {
    if (!t.fully_observed()) throw ConfigError("exact log-likelihood needs fully observed triples");
    total += -energy(params, kind, *t.source, *t.relation, *t.target) - log_z;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace rblt
