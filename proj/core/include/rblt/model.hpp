#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rblt/types.hpp"

namespace rblt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Denominators of the normalized energies are clamped to this value.
inline constexpr double kNormFloor = 1e-12;

/// Affine map c -> A c + b acting on source embeddings.
struct RelationOperator {
  Eigen::MatrixXd linear;
  Vector offset;

  static RelationOperator identity(std::size_t dim);
  static RelationOperator zeros(std::size_t dim);
  std::size_t dim() const { return static_cast<std::size_t>(offset.size()); }

  /// sqrt(|A|_F^2 + |b|^2), the norm used by the Frobenius-cosine energy.
  double frobenius_norm() const;

  bool operator==(const RelationOperator& o) const {
    return linear.rows() == o.linear.rows() && linear.cols() == o.linear.cols() &&
           offset.size() == o.offset.size() && linear == o.linear && offset == o.offset;
  }
};

Vector apply_relation(const RelationOperator& op, const Eigen::Ref<const Vector>& c);

/// Flat view over every parameter group: source rows, target rows, then
/// (A_r, b_r) for each relation. Shared storage layout for parameters,
/// gradients and optimizer moments.
class ParameterBlocks {
 public:
  ParameterBlocks() = default;
  ParameterBlocks(std::size_t vocab_size, std::size_t relation_count, std::size_t dim);

  RowMatrix source;
  RowMatrix target;
  std::vector<RelationOperator> relations;

  std::size_t vocab_size() const { return static_cast<std::size_t>(source.rows()); }
  std::size_t relation_count() const { return relations.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(source.cols()); }
  std::size_t parameter_count() const;

  void set_zero();
  void axpy(double alpha, const ParameterBlocks& x);
  void scale(double alpha);
  double dot(const ParameterBlocks& other) const;
  double norm() const { return std::sqrt(dot(*this)); }
  bool same_shape(const ParameterBlocks& other) const;

  std::size_t block_count() const { return 2 + 2 * relations.size(); }
  std::span<double> block(std::size_t i);
  std::span<const double> block(std::size_t i) const;
  std::string block_name(std::size_t i) const;

  /// Name of the first group holding a NaN or infinity, if any.
  std::optional<std::string> first_non_finite_block() const;

  bool operator==(const ParameterBlocks& other) const;
};

/// Theta: source embeddings c_i, target embeddings v_j and relation operators.
class ModelParams : public ParameterBlocks {
 public:
  using ParameterBlocks::ParameterBlocks;

  /// Throws ConfigError if shapes are inconsistent or there are no relations.
  void validate() const;
};

/// Theta-shaped container for gradients and parameter deltas.
class GradientAccumulator : public ParameterBlocks {
 public:
  using ParameterBlocks::ParameterBlocks;
  static GradientAccumulator zeros_like(const ParameterBlocks& shape);
};

/// What to do when an energy denominator hits kNormFloor.
enum class NormFloorPolicy {
  Clamp,   // return the floored value
  Strict,  // throw DegenerateInputError
};

double energy(const ModelParams& params, EnergyKind kind, WordId s, RelId r, WordId t,
              NormFloorPolicy policy = NormFloorPolicy::Clamp);

/// Exact analytic gradient of the energy with respect to c_s, v_t, A_r, b_r.
GradientAccumulator energy_grad(const ModelParams& params, EnergyKind kind, WordId s, RelId r, WordId t);

/// out += scale * dE(s, r, t)/dTheta. Touches only the four groups involved.
void accumulate_energy_grad(const ModelParams& params, EnergyKind kind, WordId s, RelId r, WordId t, double scale,
                            GradientAccumulator& out);

enum class Axis { Source, Relation, Target };

/// Energies of every completion along `axis`, the other two slots held at
/// the given values. `out` must have size |V| (Source, Target) or |R|.
void completion_energies(const ModelParams& params, EnergyKind kind, Axis axis, const Triple& fixed,
                         std::span<double> out);

std::size_t axis_length(const ModelParams& params, Axis axis);

/// Copies `value` into slot `axis` of `triple`.
Triple with_axis(Triple triple, Axis axis, std::size_t value);

}  // namespace rblt
