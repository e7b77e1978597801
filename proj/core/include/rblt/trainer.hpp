#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rblt/model.hpp"
#include "rblt/sampler.hpp"

namespace rblt {

struct AdamConstants {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// lambda: the first-moment decay is beta1 * lambda^(t-1) at step t.
  double beta1_decay = 1.0 - 1e-8;
};

struct TrainConfig {
  std::size_t dim = 100;
  std::size_t batch_size = 100;
  std::size_t chains = 1;
  std::size_t gibbs_rounds = 3;
  AdamConstants adam{};
  double l2_relations = 0.0;  // on A_r and b_r
  double l2_all = 0.0;        // on every parameter
  std::size_t epochs = 1;
  /// The first this-many epochs train on the fully observed triples only;
  /// partially observed ones join afterwards.
  std::size_t observed_warmup_epochs = 0;
  std::uint64_t seed = 1;
  EnergyKind energy = EnergyKind::Cosine;
  std::size_t threads = 1;

  void validate() const;
};

struct AdamState {
  GradientAccumulator first_moment;
  GradientAccumulator second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParameterBlocks& shape);
  bool operator==(const AdamState&) const = default;
};

/// Advances the Adam moments with `grad` (an ascent direction) and returns the
/// bias-corrected step alpha * m_hat / (sqrt(v_hat) + eps), to be added to Theta.
GradientAccumulator adam_update(AdamState& state, const GradientAccumulator& grad, const AdamConstants& constants);

/// (1/B) sum_b w_b dE_b/dTheta. A triple with a missing slot contributes the
/// completions of that slot weighted by their conditional probability.
GradientAccumulator data_term_grad(const ModelParams& params, EnergyKind kind, std::span<const Triple> batch);

/// out += scale * (1/B) sum_b w_b dE_b/dTheta; returns the mean (expected) energy of the batch.
double accumulate_data_term(const ModelParams& params, EnergyKind kind, std::span<const Triple> batch, double scale,
                            GradientAccumulator& out);

/// Advances every chain by `gibbs_rounds` sweeps, then returns
/// (1/M) sum_m dE(chain_m)/dTheta - data_term_grad(batch): the log-likelihood ascent direction.
GradientAccumulator pcd_gradient(const ModelParams& params, EnergyKind kind, std::span<const Triple> batch,
                                 ChainPool& pool, std::size_t gibbs_rounds, std::size_t threads = 1);

/// Gradient of -(l2_relations/2)|G|^2 - (l2_all/2)|Theta|^2.
GradientAccumulator l2_grad(const ModelParams& params, double l2_relations, double l2_all);

/// c_i, v_j ~ U(-1/sqrt(d), 1/sqrt(d)); A_r = I + N(0, 0.01^2); b_r = 0.
ModelParams initialize_params(std::size_t vocab_size, std::size_t relation_count, std::size_t dim,
                              std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double mean_energy = 0.0;
  double data_grad_norm = 0.0;
  double model_grad_norm = 0.0;
  double wall_seconds = 0.0;

  /// One JSON object, no trailing newline.
  std::string to_json_line() const;
};

/// Stateful PCD training loop. Chains, Adam moments and the epoch counter are
/// all exposed so a run can be checkpointed and resumed exactly.
class Trainer {
 public:
  Trainer(ModelParams init, std::vector<Triple> data, TrainConfig config);
  Trainer(ModelParams params, AdamState adam, ChainPool pool, std::size_t epochs_done, std::vector<Triple> data,
          TrainConfig config);

  /// One pass over shuffled minibatches. Throws TrainingAborted on non-finite parameters.
  EpochRecord run_epoch();

  const ModelParams& params() const { return params_; }
  const AdamState& adam() const { return adam_; }
  const ChainPool& pool() const { return pool_; }
  std::size_t epochs_done() const { return epochs_done_; }
  const TrainConfig& config() const { return config_; }

 private:
  void check_data();

  ModelParams params_;
  AdamState adam_;
  ChainPool pool_;
  std::size_t epochs_done_ = 0;
  std::vector<Triple> data_;
  std::vector<std::size_t> observed_;  // indices of fully observed triples
  TrainConfig config_;
};

struct TrainResult {
  ModelParams params;
  AdamState adam;
  ChainPool pool;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&, const Trainer&)>;

TrainResult train(ModelParams init, std::vector<Triple> data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace rblt
