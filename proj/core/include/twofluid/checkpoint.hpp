#pragma once

#include <cstdint>
#include <string>

#include "twofluid/grid.hpp"
#include "twofluid/solver.hpp"

namespace twofluid {

// RNG/run provenance carried alongside the state so a resumed run can prove
// it came from the same experiment.
struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

// Versioned binary container for a full simulation state.  Layout: magic,
// format version, grid descriptor, scalar state (t, kappa, means), metadata,
// spectral field payloads, and a trailing FNV-1a checksum over everything
// before it.  load(save(s)) is bit-for-bit the identity.
void checkpoint_save(const std::string& path, const SimulationState& state,
                     const CheckpointMeta& meta = {});

// Throws CorruptCheckpoint on bad magic, truncation, or checksum mismatch;
// VersionMismatch on an unsupported format version; ConfigError when
// `expect_grid` is given and the stored grid differs.
SimulationState checkpoint_load(const std::string& path,
                                CheckpointMeta* meta = nullptr,
                                const Grid* expect_grid = nullptr);

}  // namespace twofluid
