#pragma once

#include <cstdint>
#include <filesystem>

#include "rblt/model.hpp"
#include "rblt/sampler.hpp"
#include "rblt/trainer.hpp"

namespace rblt {

inline constexpr char kCheckpointMagic[4] = {'R', 'B', 'L', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume PCD training exactly.
struct Checkpoint {
  ModelParams params;
  AdamState adam;
  ChainPool pool;
  EnergyKind energy = EnergyKind::Cosine;
  std::uint64_t epochs_done = 0;

  bool operator==(const Checkpoint&) const = default;
};

// Layout (all integers and floats little-endian):
//   "RBLT" | u32 version | u32 energy kind | u64 epochs done
//   u64 |V| | u64 d | u64 |R|
//   params: source (|V| x d, row-major), target, then per relation A (d x d, column-major) and b
//   u64 adam step | first moment (same layout) | second moment
//   u64 M | per chain: u64 s, u64 r, u64 t, u64 n, n bytes of generator state text
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws ParseError on a bad magic, a version mismatch, or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rblt
