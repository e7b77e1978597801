#include "rblt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace rblt {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
  };
  require(dim > 0, "dim", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(chains > 0, "chains", "must be positive");
  require(gibbs_rounds > 0, "gibbs_rounds", "must be positive");
  require(adam.learning_rate > 0.0, "learning_rate", "must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "beta2", "must lie in [0, 1)");
  require(adam.epsilon > 0.0, "epsilon", "must be positive");
  require(adam.beta1_decay > 0.0 && adam.beta1_decay <= 1.0, "beta1_decay", "must lie in (0, 1]");
  require(l2_relations >= 0.0, "l2_relations", "must be non-negative");
  require(l2_all >= 0.0, "l2_all", "must be non-negative");
  require(threads > 0, "threads", "must be positive");
}

AdamState AdamState::zeros_like(const ParameterBlocks& shape) {
  return AdamState{GradientAccumulator::zeros_like(shape), GradientAccumulator::zeros_like(shape), 0};
}

GradientAccumulator adam_update(AdamState& state, const GradientAccumulator& grad, const AdamConstants& k) {
  if (!state.first_moment.same_shape(grad) || !state.second_moment.same_shape(grad))
    throw ConfigError("Adam state and gradient differ in shape");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double beta1_t = k.beta1 * std::pow(k.beta1_decay, t - 1.0);
  const double m_correction = 1.0 - std::pow(k.beta1, t);
  const double v_correction = 1.0 - std::pow(k.beta2, t);

  auto delta = GradientAccumulator::zeros_like(grad);
  for (std::size_t b = 0; b < grad.block_count(); ++b) {
    auto g = grad.block(b);
    auto m = state.first_moment.block(b);
    auto v = state.second_moment.block(b);
    auto out = delta.block(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1_t * m[i] + (1.0 - beta1_t) * g[i];
      v[i] = k.beta2 * v[i] + (1.0 - k.beta2) * g[i] * g[i];
      const double m_hat = m[i] / m_correction;
      const double v_hat = v[i] / v_correction;
      out[i] = k.learning_rate * m_hat / (std::sqrt(v_hat) + k.epsilon);
    }
  }
  return delta;
}

namespace {

std::optional<Axis> missing_axis(const Triple& t) {
  if (!t.source) return Axis::Source;
  if (!t.relation) return Axis::Relation;
  if (!t.target) return Axis::Target;
  return std::nullopt;
}

}  // namespace

double accumulate_data_term(const ModelParams& params, EnergyKind kind, std::span<const Triple> batch, double scale,
                            GradientAccumulator& out) {
  if (batch.empty()) throw ConfigError("data term of an empty batch");
  const double per_example = scale / static_cast<double>(batch.size());
  double energy_sum = 0.0;
  std::vector<double> energies;
  for (const auto& triple : batch) {
    if (triple.missing_count() > 1) throw ConfigError("a training triple may leave at most one slot unobserved");
    const auto axis = missing_axis(triple);
    if (!axis) {
      accumulate_energy_grad(params, kind, *triple.source, *triple.relation, *triple.target,
                             per_example * triple.weight, out);
      energy_sum += energy(params, kind, *triple.source, *triple.relation, *triple.target);
      continue;
    }
    energies.assign(axis_length(params, *axis), 0.0);
    completion_energies(params, kind, *axis, triple, energies);
    const auto posterior = boltzmann_weights(energies);
    for (std::size_t k = 0; k < posterior.size(); ++k) {
      if (posterior[k] == 0.0) continue;
      const Triple full = with_axis(triple, *axis, k);
      accumulate_energy_grad(params, kind, *full.source, *full.relation, *full.target,
                             per_example * triple.weight * posterior[k], out);
      energy_sum += posterior[k] * energies[k];
    }
  }
  return energy_sum / static_cast<double>(batch.size());
}

GradientAccumulator data_term_grad(const ModelParams& params, EnergyKind kind, std::span<const Triple> batch) {
  auto out = GradientAccumulator::zeros_like(params);
  accumulate_data_term(params, kind, batch, 1.0, out);
  return out;
}

namespace {

void accumulate_model_term(const ModelParams& params, EnergyKind kind, const ChainPool& pool, double scale,
                           GradientAccumulator& out) {
  const double per_chain = scale / static_cast<double>(pool.size());
  for (const auto& chain : pool.chains())
    accumulate_energy_grad(params, kind, chain.state.source, chain.state.relation, chain.state.target, per_chain, out);
}

}  // namespace

GradientAccumulator pcd_gradient(const ModelParams& params, EnergyKind kind, std::span<const Triple> batch,
                                 ChainPool& pool, std::size_t gibbs_rounds, std::size_t threads) {
  if (pool.size() == 0) throw ConfigError("PCD needs at least one chain");
  pool.advance(params, kind, gibbs_rounds, threads);
  auto out = GradientAccumulator::zeros_like(params);
  accumulate_model_term(params, kind, pool, 1.0, out);
  accumulate_data_term(params, kind, batch, -1.0, out);
  return out;
}

GradientAccumulator l2_grad(const ModelParams& params, double l2_relations, double l2_all) {
  auto out = GradientAccumulator::zeros_like(params);
  if (l2_all != 0.0) {
    out.source = -l2_all * params.source;
    out.target = -l2_all * params.target;
  }
  const double on_ops = l2_relations + l2_all;
  if (on_ops != 0.0) {
    for (std::size_t r = 0; r < params.relation_count(); ++r) {
      out.relations[r].linear = -on_ops * params.relations[r].linear;
      out.relations[r].offset = -on_ops * params.relations[r].offset;
    }
  }
  return out;
}

ModelParams initialize_params(std::size_t vocab_size, std::size_t relation_count, std::size_t dim,
                              std::uint64_t seed) {
  if (vocab_size == 0 || relation_count == 0 || dim == 0)
    throw ConfigError("vocabulary, relation count and dimension must all be positive");
  ModelParams p(vocab_size, relation_count, dim);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (double& x : p.block(0)) x = uniform(rng);
  for (double& x : p.block(1)) x = uniform(rng);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (auto& op : p.relations) {
    op = RelationOperator::identity(dim);
    for (Eigen::Index i = 0; i < op.linear.size(); ++i) op.linear.data()[i] += jitter(rng);
  }
  return p;
}

std::string EpochRecord::to_json_line() const {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "{\"epoch\":%zu,\"steps\":%zu,\"mean_energy\":%.17g,\"data_grad_norm\":%.17g,"
                "\"model_grad_norm\":%.17g,\"wall_seconds\":%.6f}",
                epoch, steps, mean_energy, data_grad_norm, model_grad_norm, wall_seconds);
  return buf;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(ModelParams init, std::vector<Triple> data, TrainConfig config)
    : params_(std::move(init)), data_(std::move(data)), config_(config) {
  config_.validate();
  params_.validate();
  check_data();
  adam_ = AdamState::zeros_like(params_);
  pool_ = ChainPool::seed_from_data(params_, config_.energy, data_, config_.chains, config_.seed);
}

Trainer::Trainer(ModelParams params, AdamState adam, ChainPool pool, std::size_t epochs_done, std::vector<Triple> data,
                 TrainConfig config)
    : params_(std::move(params)),
      adam_(std::move(adam)),
      pool_(std::move(pool)),
      epochs_done_(epochs_done),
      data_(std::move(data)),
      config_(config) {
  config_.validate();
  params_.validate();
  check_data();
  if (!adam_.first_moment.same_shape(params_)) throw ConfigError("resumed Adam state does not match the model");
  if (pool_.size() == 0) throw ConfigError("resumed chain pool is empty");
}

void Trainer::check_data() {
  if (data_.empty()) throw ConfigError("training set is empty");
  observed_.clear();
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (data_[i].fully_observed()) observed_.push_back(i);
  for (const auto& t : data_) {
    if (t.missing_count() > 1) throw ConfigError("a training triple may leave at most one slot unobserved");
    if ((t.source && t.source->index >= params_.vocab_size()) || (t.target && t.target->index >= params_.vocab_size()))
      throw ConfigError("training triple references a word outside the model vocabulary");
    if (t.relation && t.relation->index >= params_.relation_count())
      throw ConfigError("training triple references a relation outside the model");
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) throw ConfigError("triple weights must be finite and >= 0");
  }
  if (config_.observed_warmup_epochs > 0 && observed_.empty())
    throw ConfigError("observed_warmup_epochs: no fully observed training triples");
}

EpochRecord Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t epoch = epochs_done_ + 1;

  std::vector<std::size_t> order;
  if (epoch <= config_.observed_warmup_epochs) {
    order = observed_;
  } else {
    order.resize(data_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::seed_seq seq{config_.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0xba7c4}};
  Rng shuffle_rng(seq);
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  EpochRecord record;
  record.epoch = epoch;
  auto model_term = GradientAccumulator::zeros_like(params_);
  auto data_term = GradientAccumulator::zeros_like(params_);
  std::vector<Triple> batch;
  batch.reserve(config_.batch_size);

  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    const std::size_t end = std::min(begin + config_.batch_size, order.size());
    batch.clear();
    for (std::size_t i = begin; i < end; ++i) batch.push_back(data_[order[i]]);

    pool_.advance(params_, config_.energy, config_.gibbs_rounds, config_.threads);
    model_term.set_zero();
    data_term.set_zero();
    accumulate_model_term(params_, config_.energy, pool_, 1.0, model_term);
    record.mean_energy += accumulate_data_term(params_, config_.energy, batch, 1.0, data_term);
    record.model_grad_norm += model_term.norm();
    record.data_grad_norm += data_term.norm();

    auto ascent = l2_grad(params_, config_.l2_relations, config_.l2_all);
    ascent.axpy(1.0, model_term);
    ascent.axpy(-1.0, data_term);
    const auto delta = adam_update(adam_, ascent, config_.adam);
    params_.axpy(1.0, delta);
    ++record.steps;

    if (auto bad = params_.first_non_finite_block()) {
      throw TrainingAborted("non-finite values in " + *bad + " at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(record.steps));
    }
  }

  const auto steps = static_cast<double>(record.steps);
  record.mean_energy /= steps;
  record.model_grad_norm /= steps;
  record.data_grad_norm /= steps;
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  epochs_done_ = epoch;
  return record;
}

TrainResult train(ModelParams init, std::vector<Triple> data, const TrainConfig& config, const EpochCallback& on_epoch) {
  Trainer trainer(std::move(init), std::move(data), config);
  TrainResult result;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    result.log.push_back(trainer.run_epoch());
    if (on_epoch) on_epoch(result.log.back(), trainer);
  }
  result.params = trainer.params();
  result.adam = trainer.adam();
  result.pool = trainer.pool();
  return result;
}

}  // namespace rblt
