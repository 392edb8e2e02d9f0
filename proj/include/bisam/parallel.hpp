#pragma once

namespace bisam {

/// Selects the OpenMP kernel or the serial reference implementation.
/// Both paths produce bitwise-identical results.
enum class Execution { serial, parallel };

}  // namespace bisam
