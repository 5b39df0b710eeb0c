#pragma once

namespace oodlab {

// Ground-truth origin of a traffic sample. Hidden from training code paths
// except oracle-mode regularization and evaluation.
enum class Provenance { in_dist, out_dist };

inline const char* provenance_name(Provenance p) {
  return p == Provenance::in_dist ? "in" : "out";
}

}  // namespace oodlab
