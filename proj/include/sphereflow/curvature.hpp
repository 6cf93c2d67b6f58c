#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sphereflow/cell_complex.hpp"

namespace sphereflow {

// Geodesic curvatures k_f >= 0 for every face of one complex, with k_f == 0
// meaning the face's circle has degenerated to a great circle (the face is
// "pinned"; it has no log-coordinate).  The active faces are the k > 0 ones;
// flows and Newton move in K = log k over exactly those.
class CurvatureState {
public:
    // Pinned-ness is inferred from k: exactly 0 is pinned, anything else must
    // be finite and positive.
    CurvatureState(const CellComplex& complex, Eigen::VectorXd k);

    // Build a state from log-curvatures over an explicit active set; every
    // other face is pinned at k = 0.
    static CurvatureState from_active_log(const CellComplex& complex,
                                          const std::vector<int>& active,
                                          const Eigen::VectorXd& K_active);

    const CellComplex& complex() const { return *complex_; }
    const Eigen::VectorXd& k() const { return k_; }
    double radius(int face) const; // atan2(1, k_f); exactly pi/2 when pinned
    bool pinned(int face) const { return pinned_[static_cast<std::size_t>(face)] != 0; }
    const std::vector<int>& active() const { return active_; }

    // K restricted to the active faces, in active() order.
    Eigen::VectorXd active_log() const;

    // Same complex object and same pinned set: the two states live on the
    // same stratum and can be joined by a segment in K.
    bool same_stratum(const CurvatureState& other) const;

private:
    const CellComplex* complex_;
    Eigen::VectorXd k_;
    std::vector<char> pinned_;
    std::vector<int> active_;
};

// Total geodesic curvature of every face boundary: for face f, the sum of
// L contributions over its incidence list (a self-glued edge contributes
// both of its sides).  Pinned faces report exactly 0.
Eigen::VectorXd total_curvature(const CurvatureState& state);

// Jacobian d(total_curvature restricted to active) / d(K over active),
// assembled from per-edge 2x2 central-difference blocks.  Row/column order
// is state.active().  The raw assembly is symmetric only up to the finite-
// difference error (~1e-6); jacobian() returns (M + M^T)/2, which is what
// the Newton solver factors (Cholesky needs exact symmetry).
Eigen::MatrixXd jacobian_raw(const CurvatureState& state);
Eigen::MatrixXd jacobian(const CurvatureState& state);

// Difference of the curvature potential between two states on the same
// stratum: the line integral of <L(K(t)), dK/dt> along the straight segment
// in K, by adaptive Simpson quadrature (absolute tolerance ~1e-11).  The
// potential itself is only defined up to a constant; only differences are
// exposed.  Its gradient is total_curvature, and because the edge blocks
// are symmetric the integral is path independent.
double potential_difference(const CurvatureState& from, const CurvatureState& to);

// Serial reference kernels: same contracts, same evaluation order, no
// OpenMP.  The parallel versions above must match these bit for bit.
namespace ref {
Eigen::VectorXd total_curvature(const CurvatureState& state);
Eigen::MatrixXd jacobian_raw(const CurvatureState& state);
} // namespace ref

} // namespace sphereflow
