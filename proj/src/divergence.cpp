#include "spotter/divergence.hpp"

namespace spotter {

DivergenceDiagnostics& divergence_diagnostics() {
  static DivergenceDiagnostics diag;
  return diag;
}

}  // namespace spotter
