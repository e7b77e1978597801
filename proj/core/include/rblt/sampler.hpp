#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rblt/model.hpp"

namespace rblt {

using Rng = std::mt19937_64;

/// Upper bound on |V|^2 |R| for the exhaustive oracles.
inline constexpr std::size_t kMaxEnumeratedStates = 1'000'000;

/// log sum_k exp(-energies[k]), evaluated with max subtraction.
double log_sum_exp_neg(std::span<const double> energies);

/// p_k = exp(-E_k) / sum exp(-E), evaluated with max subtraction.
std::vector<double> boltzmann_weights(std::span<const double> energies);

/// Draws an index from a normalized probability vector.
std::size_t sample_index(std::span<const double> probs, Rng& rng);

/// P(axis | the other two slots of `fixed`). The slot named by `axis` is ignored.
std::vector<double> conditional_distribution(const ModelParams& params, EnergyKind kind, Axis axis,
                                             const Triple& fixed);

/// A fully observed triple carried by a persistent chain.
struct ChainState {
  WordId source;
  RelId relation;
  WordId target;

  bool operator==(const ChainState&) const = default;
  Triple as_triple() const { return Triple{source, relation, target, 1.0}; }
};

/// Systematic-scan Gibbs sweep: S | (r,t), then R | (s,t), then T | (s,r).
ChainState gibbs_sweep(const ModelParams& params, EnergyKind kind, ChainState state, Rng& rng);

/// M independent persistent chains, each with its own generator.
class ChainPool {
 public:
  struct Chain {
    ChainState state;
    Rng rng;
    bool operator==(const Chain&) const = default;
  };

  ChainPool() = default;
  ChainPool(std::vector<ChainState> starts, std::uint64_t seed);

  /// Starts each chain at a uniformly chosen training triple. Missing slots are
  /// filled by a draw from the model conditional.
  static ChainPool seed_from_data(const ModelParams& params, EnergyKind kind, std::span<const Triple> data,
                                  std::size_t chain_count, std::uint64_t seed);

  std::size_t size() const { return chains_.size(); }
  const std::vector<Chain>& chains() const { return chains_; }
  std::vector<Chain>& chains() { return chains_; }

  /// Advances every chain by `rounds` sweeps against a fixed snapshot of `params`.
  /// Chains own their generators, so results do not depend on `threads`.
  void advance(const ModelParams& params, EnergyKind kind, std::size_t rounds, std::size_t threads = 1);

  bool operator==(const ChainPool&) const = default;

 private:
  std::vector<Chain> chains_;
};

/// Flat index of (s, r, t) in the enumeration order used by the exact oracles.
inline std::size_t joint_index(std::size_t s, std::size_t r, std::size_t t, std::size_t vocab, std::size_t relations) {
  return (s * relations + r) * vocab + t;
}

/// Energies of all |V|^2 |R| triples, indexed by joint_index. Refuses above kMaxEnumeratedStates.
std::vector<double> enumerate_energies(const ModelParams& params, EnergyKind kind);

/// Exact P(s, r, t | Theta) for every triple, indexed by joint_index.
std::vector<double> exact_joint_distribution(const ModelParams& params, EnergyKind kind);

double exact_log_partition(const ModelParams& params, EnergyKind kind);

/// sum_{s,r,t} P(s,r,t) dE(s,r,t)/dTheta by full enumeration.
GradientAccumulator exact_model_expectation_grad(const ModelParams& params, EnergyKind kind);

/// Monte Carlo counterpart of exact_model_expectation_grad: `chains` persistent
/// chains started at uniform triples, `burn_in` discarded sweeps each, then the
/// mean energy gradient over `sweeps` further states in total.
GradientAccumulator sampled_model_expectation_grad(const ModelParams& params, EnergyKind kind, std::size_t chains,
                                                   std::size_t sweeps, std::size_t burn_in, std::uint64_t seed);

/// Mean log-likelihood of fully observed triples under the exact joint.
double exact_mean_log_likelihood(const ModelParams& params, EnergyKind kind, std::span<const Triple> data);

}  // namespace rblt
