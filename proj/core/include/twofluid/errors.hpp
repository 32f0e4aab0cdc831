#pragma once

#include <stdexcept>
#include <string>

namespace twofluid {

// Base class for every recoverable failure raised by the library.  The CLI
// maps these to exit code 2; tests match on the concrete type.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- closure algebra ---
struct NoBracket : Error { using Error::Error; };        // root bracket exhausted
struct NonMonotone : Error { using Error::Error; };      // pressure law not increasing
struct OutOfRange : Error { using Error::Error; };       // outside working density range
struct DegenerateRoots : Error { using Error::Error; };  // coupling roots complex/coincident

// --- grids and dyadic analysis ---
struct NyquistViolation : Error { using Error::Error; }; // dyadic band exceeds the lattice
struct BandTooNarrow : Error { using Error::Error; };    // spectral mass outside covered annuli
struct ZeroBlock : Error { using Error::Error; };        // Bernstein probe on an empty block

// --- linear theory ---
struct NotStable : Error { using Error::Error; };        // functional requested for unstable closure

// --- time integration ---
struct PositivityBreach : Error { using Error::Error; }; // effective density left its admissible range
struct BlowUp : Error { using Error::Error; };           // solution norm above the abort threshold

// --- experiment harness ---
struct WindowTooShort : Error { using Error::Error; };   // too few samples inside a fit window
struct DegenerateFit : Error { using Error::Error; };    // abscissa spread below a factor of 2
struct VersionMismatch : Error { using Error::Error; };  // checkpoint/container version unknown
struct CorruptCheckpoint : Error { using Error::Error; };// checksum or structure failure

struct ConfigError : Error { using Error::Error; };      // malformed configuration file

}  // namespace twofluid
