#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sphereflow/cell_complex.hpp"

namespace sphereflow {

// Where a prescribed total-curvature target sits relative to the solvable
// region.  A target L_hat >= 0 is achievable by a genuine (possibly partly
// degenerate) circle pattern iff, over the faces where it is positive, every
// nonempty face subset F' satisfies
//
//     sum_{f in F'} L_hat_f  <  2 * sum_{e in E_{F'}} weight(e),
//
// E_{F'} being the edges touching F'.  Interior: all faces positive and all
// inequalities strict.  Stratum: some faces are exactly 0 (their circles
// degenerate to great circles) and the rest pass the subset test.  Zero: the
// all-zeros target (every circle a great circle).  Infeasible: some subset
// violates its bound, reported via a witness.
struct TargetClass {
    enum class Kind { Interior, Stratum, Zero, Infeasible };

    Kind kind = Kind::Zero;
    std::vector<int> support; // faces with L_hat > 0, ascending (empty: Zero)

    // Infeasible only: the subset with the largest violation
    //   slack = sum L_hat - 2 * sum weights  (>= 0, or > -1e-12 for
    // boundary-proximal targets), ties broken toward the lexicographically
    // smallest face list so the witness is deterministic.
    std::vector<int> witness;
    double slack = 0.0;

    // The target misses every strict bound but comes within 1e-12 of one;
    // such targets have no solution at any finite K and are refused.
    bool boundary_proximal = false;
};

const char* kind_name(TargetClass::Kind kind);

// The subset scan is exhaustive (2^|support| - 1 subsets); beyond this
// support size we refuse (SupportTooLargeError) rather than stall.
inline constexpr int kMaxSupport = 24;

// Classify a target vector (size num_faces, finite, entrywise >= 0).
// Throws DomainError for invalid targets and SupportTooLargeError past the
// scan cap.  The scan is chunked over OpenMP threads; the winning subset is
// merged under a total order, so the result is thread-count independent.
TargetClass classify_target(const CellComplex& complex, const Eigen::VectorXd& L_hat);

namespace ref {
// Serial scan, bit-identical to the parallel one.
TargetClass classify_target(const CellComplex& complex, const Eigen::VectorXd& L_hat);
} // namespace ref

} // namespace sphereflow
