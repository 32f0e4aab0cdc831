#pragma once

// Versioned binary container for grid fields.
//
//   offset  size  content
//   0       8     magic "TFFLD001"
//   8       4     container version (u32, little-endian; currently 1)
//   12      4     grid dimension (u32)
//   16      4     points per axis (u32)
//   20      8     box scale Λ (f64)
//   28      4     component count (u32)
//   32      4     flags (u32; bit 0 = real-valued)
//   36      ...   payload: row-major (last axis fastest) float64 samples,
//                 component-major; complex fields store interleaved re,im.
//
// All integers and floats are little-endian.

#include <string>

#include "twofluid/grid.hpp"

namespace twofluid {

void save_field(const std::string& path, const GridField& field);
GridField load_field(const std::string& path);

}  // namespace twofluid
