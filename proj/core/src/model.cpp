#include "rblt/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rblt {

std::string_view to_string(EnergyKind kind) {
  switch (kind) {
    case EnergyKind::Dot:
      return "dot";
    case EnergyKind::Cosine:
      return "cosine";
    case EnergyKind::FrobeniusCosine:
      return "frobenius";
  }
  return "unknown";
}

EnergyKind parse_energy_kind(std::string_view name) {
  if (name == "dot") return EnergyKind::Dot;
  if (name == "cosine") return EnergyKind::Cosine;
  if (name == "frobenius" || name == "frobenius-cosine") return EnergyKind::FrobeniusCosine;
  throw ConfigError("unknown energy kind '" + std::string(name) + "' (expected dot, cosine or frobenius)");
}

RelationOperator RelationOperator::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::MatrixXd::Identity(d, d), Vector::Zero(d)};
}

RelationOperator RelationOperator::zeros(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::MatrixXd::Zero(d, d), Vector::Zero(d)};
}

double RelationOperator::frobenius_norm() const {
  return std::sqrt(linear.squaredNorm() + offset.squaredNorm());
}

Vector apply_relation(const RelationOperator& op, const Eigen::Ref<const Vector>& c) {
  if (op.linear.rows() != op.offset.size() || op.linear.cols() != c.size()) {
    throw ConfigError("relation operator of dimension " + std::to_string(op.linear.rows()) + "x" +
                      std::to_string(op.linear.cols()) + " applied to vector of dimension " +
                      std::to_string(c.size()));
  }
  return op.linear * c + op.offset;
}

// ---------------------------------------------------------------------------
// ParameterBlocks

ParameterBlocks::ParameterBlocks(std::size_t vocab_size, std::size_t relation_count, std::size_t dim)
    : source(RowMatrix::Zero(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(dim))),
      target(RowMatrix::Zero(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(dim))),
      relations(relation_count, RelationOperator::zeros(dim)) {}

std::size_t ParameterBlocks::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < block_count(); ++i) n += block(i).size();
  return n;
}

std::span<double> ParameterBlocks::block(std::size_t i) {
  if (i == 0) return {source.data(), static_cast<std::size_t>(source.size())};
  if (i == 1) return {target.data(), static_cast<std::size_t>(target.size())};
  auto& op = relations.at((i - 2) / 2);
  if ((i - 2) % 2 == 0) return {op.linear.data(), static_cast<std::size_t>(op.linear.size())};
  return {op.offset.data(), static_cast<std::size_t>(op.offset.size())};
}

std::span<const double> ParameterBlocks::block(std::size_t i) const {
  auto s = const_cast<ParameterBlocks*>(this)->block(i);
  return {s.data(), s.size()};
}

std::string ParameterBlocks::block_name(std::size_t i) const {
  if (i == 0) return "source embeddings";
  if (i == 1) return "target embeddings";
  const auto r = std::to_string((i - 2) / 2);
  return (i - 2) % 2 == 0 ? "relation " + r + " linear part" : "relation " + r + " offset";
}

void ParameterBlocks::set_zero() {
  for (std::size_t i = 0; i < block_count(); ++i) std::ranges::fill(block(i), 0.0);
}

void ParameterBlocks::axpy(double alpha, const ParameterBlocks& x) {
  if (!same_shape(x)) throw ConfigError("axpy between parameter sets of different shape");
  source.noalias() += alpha * x.source;
  target.noalias() += alpha * x.target;
  for (std::size_t r = 0; r < relations.size(); ++r) {
    relations[r].linear.noalias() += alpha * x.relations[r].linear;
    relations[r].offset.noalias() += alpha * x.relations[r].offset;
  }
}

void ParameterBlocks::scale(double alpha) {
  for (std::size_t i = 0; i < block_count(); ++i)
    for (double& v : block(i)) v *= alpha;
}

double ParameterBlocks::dot(const ParameterBlocks& other) const {
  if (!same_shape(other)) throw ConfigError("dot between parameter sets of different shape");
  double acc = 0.0;
  for (std::size_t i = 0; i < block_count(); ++i) {
    auto a = block(i);
    auto b = other.block(i);
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  }
  return acc;
}

bool ParameterBlocks::same_shape(const ParameterBlocks& other) const {
  if (source.rows() != other.source.rows() || source.cols() != other.source.cols()) return false;
  if (target.rows() != other.target.rows() || target.cols() != other.target.cols()) return false;
  if (relations.size() != other.relations.size()) return false;
  for (std::size_t r = 0; r < relations.size(); ++r) {
    if (relations[r].linear.rows() != other.relations[r].linear.rows() ||
        relations[r].linear.cols() != other.relations[r].linear.cols() ||
        relations[r].offset.size() != other.relations[r].offset.size())
      return false;
  }
  return true;
}

std::optional<std::string> ParameterBlocks::first_non_finite_block() const {
  for (std::size_t i = 0; i < block_count(); ++i) {
    for (double v : block(i))
      if (!std::isfinite(v)) return block_name(i);
  }
  return std::nullopt;
}

bool ParameterBlocks::operator==(const ParameterBlocks& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t i = 0; i < block_count(); ++i) {
    auto a = block(i);
    auto b = other.block(i);
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

void ModelParams::validate() const {
  if (relations.empty()) throw ConfigError("model needs at least one relation operator");
  if (dim() == 0) throw ConfigError("embedding dimension must be positive");
  if (source.rows() != target.rows() || source.cols() != target.cols())
    throw ConfigError("source and target embedding tables differ in shape");
  for (const auto& op : relations) {
    if (op.linear.rows() != source.cols() || op.linear.cols() != source.cols() || op.offset.size() != source.cols())
      throw ConfigError("relation operator dimension does not match embedding dimension");
  }
}

GradientAccumulator GradientAccumulator::zeros_like(const ParameterBlocks& shape) {
  return GradientAccumulator(shape.vocab_size(), shape.relation_count(), shape.dim());
}

// ---------------------------------------------------------------------------
// Energies

namespace {

void check_indices(const ModelParams& p, WordId s, RelId r, WordId t) {
  if (s.index >= p.vocab_size() || t.index >= p.vocab_size() || r.index >= p.relation_count()) {
    throw ConfigError("triple index out of range (s=" + std::to_string(s.index) + ", r=" +
                      std::to_string(r.index) + ", t=" + std::to_string(t.index) + ")");
  }
}

struct Floored {
  double value;
  bool clamped;
};

Floored floored(double norm) {
  return norm < kNormFloor ? Floored{kNormFloor, true} : Floored{norm, false};
}

}  // namespace

double energy(const ModelParams& params, EnergyKind kind, WordId s, RelId r, WordId t, NormFloorPolicy policy) {
  check_indices(params, s, r, t);
  const auto& op = params.relations[r.index];
  const auto c = params.source.row(static_cast<Eigen::Index>(s.index)).transpose();
  const auto v = params.target.row(static_cast<Eigen::Index>(t.index)).transpose();
  const Vector g = op.linear * c + op.offset;
  const double dot = v.dot(g);

  auto strict = [&](const Floored& f, const char* what) {
    if (f.clamped && policy == NormFloorPolicy::Strict)
      throw DegenerateInputError(std::string("zero-norm ") + what + " in normalized energy");
    return f.value;
  };

  switch (kind) {
    case EnergyKind::Dot:
      return -dot;
    case EnergyKind::Cosine:
      return -dot / (strict(floored(v.norm()), "target vector") * strict(floored(g.norm()), "transformed source"));
    case EnergyKind::FrobeniusCosine:
      return -dot / (strict(floored(v.norm()), "target vector") *
                     strict(floored(op.frobenius_norm()), "relation operator") *
                     strict(floored(c.norm()), "source vector"));
  }
  return 0.0;
}

void accumulate_energy_grad(const ModelParams& params, EnergyKind kind, WordId s, RelId r, WordId t, double scale,
                            GradientAccumulator& out) {
  check_indices(params, s, r, t);
  const auto si = static_cast<Eigen::Index>(s.index);
  const auto ti = static_cast<Eigen::Index>(t.index);
  const auto& op = params.relations[r.index];
  auto& gop = out.relations[r.index];
  const Vector c = params.source.row(si).transpose();
  const Vector v = params.target.row(ti).transpose();
  const Vector g = op.linear * c + op.offset;
  const double dot = v.dot(g);

  Vector grad_v;
  Vector grad_g;  // dE/dg, pushed through g = A c + b
  switch (kind) {
    case EnergyKind::Dot: {
      grad_v = -g;
      grad_g = -v;
      break;
    }
    case EnergyKind::Cosine: {
      const auto nv = floored(v.norm());
      const auto ng = floored(g.norm());
      const double denom = nv.value * ng.value;
      const double e = -dot / denom;
      grad_v = -g / denom;
      if (!nv.clamped) grad_v -= (e / (nv.value * nv.value)) * v;
      grad_g = -v / denom;
      if (!ng.clamped) grad_g -= (e / (ng.value * ng.value)) * g;
      break;
    }
    case EnergyKind::FrobeniusCosine: {
      const auto nv = floored(v.norm());
      const auto nG = floored(op.frobenius_norm());
      const auto nc = floored(c.norm());
      const double denom = nv.value * nG.value * nc.value;
      const double e = -dot / denom;
      grad_v = -g / denom;
      if (!nv.clamped) grad_v -= (e / (nv.value * nv.value)) * v;
      grad_g = -v / denom;
      // The operator and source norms contribute their own radial terms.
      Vector grad_c = op.linear.transpose() * grad_g;
      if (!nc.clamped) grad_c -= (e / (nc.value * nc.value)) * c;
      out.source.row(si) += scale * grad_c.transpose();
      out.target.row(ti) += scale * grad_v.transpose();
      gop.linear.noalias() += scale * grad_g * c.transpose();
      gop.offset += scale * grad_g;
      if (!nG.clamped) {
        const double k = -scale * e / (nG.value * nG.value);
        gop.linear += k * op.linear;
        gop.offset += k * op.offset;
      }
      return;
    }
  }
  out.source.row(si) += scale * (op.linear.transpose() * grad_g).transpose();
  out.target.row(ti) += scale * grad_v.transpose();
  gop.linear.noalias() += scale * grad_g * c.transpose();
  gop.offset += scale * grad_g;
}

GradientAccumulator energy_grad(const ModelParams& params, EnergyKind kind, WordId s, RelId r, WordId t) {
  auto out = GradientAccumulator::zeros_like(params);
  accumulate_energy_grad(params, kind, s, r, t, 1.0, out);
  return out;
}

std::size_t axis_length(const ModelParams& params, Axis axis) {
  return axis == Axis::Relation ? params.relation_count() : params.vocab_size();
}

Triple with_axis(Triple triple, Axis axis, std::size_t value) {
  switch (axis) {
    case Axis::Source:
      triple.source = WordId{value};
      break;
    case Axis::Relation:
      triple.relation = RelId{value};
      break;
    case Axis::Target:
      triple.target = WordId{value};
      break;
  }
  return triple;
}

void completion_energies(const ModelParams& params, EnergyKind kind, Axis axis, const Triple& fixed,
                         std::span<double> out) {
  if (out.size() != axis_length(params, axis)) throw ConfigError("completion buffer has the wrong length");
  const auto need = [](bool present, const char* what) {
    if (!present) throw ConfigError(std::string("completion over one axis needs an observed ") + what);
  };

  switch (axis) {
    case Axis::Relation: {
      need(fixed.source.has_value(), "source");
      need(fixed.target.has_value(), "target");
      for (std::size_t r = 0; r < out.size(); ++r) out[r] = energy(params, kind, *fixed.source, RelId{r}, *fixed.target);
      return;
    }
    case Axis::Target: {
      need(fixed.source.has_value(), "source");
      need(fixed.relation.has_value(), "relation");
      check_indices(params, *fixed.source, *fixed.relation, WordId{0});
      const auto& op = params.relations[fixed.relation->index];
      const Vector c = params.source.row(static_cast<Eigen::Index>(fixed.source->index)).transpose();
      const Vector g = op.linear * c + op.offset;
      const Vector dots = params.target * g;
      if (kind == EnergyKind::Dot) {
        for (std::size_t t = 0; t < out.size(); ++t) out[t] = -dots[static_cast<Eigen::Index>(t)];
        return;
      }
      const double shared = kind == EnergyKind::Cosine
                                ? floored(g.norm()).value
                                : floored(op.frobenius_norm()).value * floored(c.norm()).value;
      const Vector norms = params.target.rowwise().norm();
      for (std::size_t t = 0; t < out.size(); ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        out[t] = -dots[ti] / (floored(norms[ti]).value * shared);
      }
      return;
    }
    case Axis::Source: {
      need(fixed.relation.has_value(), "relation");
      need(fixed.target.has_value(), "target");
      check_indices(params, WordId{0}, *fixed.relation, *fixed.target);
      const auto& op = params.relations[fixed.relation->index];
      const Vector v = params.target.row(static_cast<Eigen::Index>(fixed.target->index)).transpose();
      // E(s) = -v.(A c_s + b) = -(A^T v).c_s - v.b
      const Vector pulled = op.linear.transpose() * v;
      const double offset_dot = v.dot(op.offset);
      const Vector dots = (params.source * pulled).array() + offset_dot;
      if (kind == EnergyKind::Dot) {
        for (std::size_t s = 0; s < out.size(); ++s) out[s] = -dots[static_cast<Eigen::Index>(s)];
        return;
      }
      const double nv = floored(v.norm()).value;
      Vector norms;
      double shared = nv;
      if (kind == EnergyKind::Cosine) {
        // Row s of the product is (A c_s)^T.
        RowMatrix transformed = params.source * op.linear.transpose();
        transformed.rowwise() += op.offset.transpose();
        norms = transformed.rowwise().norm();
      } else {
        norms = params.source.rowwise().norm();
        shared *= floored(op.frobenius_norm()).value;
      }
      for (std::size_t s = 0; s < out.size(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        out[s] = -dots[si] / (shared * floored(norms[si]).value);
      }
      return;
    }
  }
}

}  // namespace rblt
