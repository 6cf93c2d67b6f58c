#include "sphereflow/curvature.hpp"

#include <cmath>
#include <limits>

#include "sphereflow/bigon.hpp"
#include "sphereflow/errors.hpp"

namespace sphereflow {

CurvatureState::CurvatureState(const CellComplex& complex, Eigen::VectorXd k)
    : complex_(&complex), k_(std::move(k)) {
    if (k_.size() != complex.num_faces())
        throw DomainError("state: curvature vector size must equal num_faces");
    pinned_.resize(static_cast<std::size_t>(k_.size()));
    for (int f = 0; f < k_.size(); ++f) {
        const double v = k_[f];
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("state: curvatures must be finite and >= 0");
        pinned_[static_cast<std::size_t>(f)] = (v == 0.0);
        if (v != 0.0) active_.push_back(f);
    }
}

CurvatureState CurvatureState::from_active_log(const CellComplex& complex,
                                               const std::vector<int>& active,
                                               const Eigen::VectorXd& K_active) {
    if (K_active.size() != static_cast<Eigen::Index>(active.size()))
        throw DomainError("state: active set and K vector sizes differ");
    Eigen::VectorXd k = Eigen::VectorXd::Zero(complex.num_faces());
    for (std::size_t i = 0; i < active.size(); ++i) {
        const int f = active[i];
        if (f < 0 || f >= complex.num_faces())
            throw DomainError("state: active face id out of range");
        if (k[f] != 0.0)
            throw DomainError("state: duplicate face in active set");
        k[f] = std::exp(K_active[static_cast<Eigen::Index>(i)]);
    }
    return CurvatureState(complex, std::move(k));
}

double CurvatureState::radius(int face) const {
    return radius_from_curvature(k_[face]);
}

Eigen::VectorXd CurvatureState::active_log() const {
    Eigen::VectorXd K(static_cast<Eigen::Index>(active_.size()));
    for (std::size_t i = 0; i < active_.size(); ++i)
        K[static_cast<Eigen::Index>(i)] = std::log(k_[active_[i]]);
    return K;
}

bool CurvatureState::same_stratum(const CurvatureState& other) const {
    return complex_ == other.complex_ && pinned_ == other.pinned_;
}

namespace {

struct EdgeSides {
    double La, Lb; // L contribution to face_a's / face_b's boundary
};

// All per-edge bigon evaluations for one state.  This is the only data the
// face sums need, and each entry is independent, so this loop parallelizes
// without touching the (fixed, serial) summation order.
std::vector<EdgeSides> edge_side_curvatures(const CurvatureState& state) {
    const auto& edges = state.complex().edges();
    const int n = static_cast<int>(edges.size());
    std::vector<EdgeSides> buf(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) if (n > 128)
    for (int i = 0; i < n; ++i) {
        const WeightedEdge& e = edges[static_cast<std::size_t>(i)];
        const BigonGeometry g =
            bigon(state.radius(e.face_a), state.radius(e.face_b), e.weight);
        buf[static_cast<std::size_t>(i)] = {g.L1, g.L2};
    }
    return buf;
}

Eigen::VectorXd sum_faces(const CurvatureState& state, const std::vector<EdgeSides>& sides) {
    const CellComplex& cx = state.complex();
    const int nf = cx.num_faces();
    Eigen::VectorXd L(nf);
#pragma omp parallel for schedule(static) if (nf > 128)
    for (int f = 0; f < nf; ++f) {
        if (state.pinned(f)) {
            L[f] = 0.0; // a great circle is a geodesic: exactly no curvature
            continue;
        }
        double sum = 0.0;
        for (const auto& inc : cx.incident(f)) {
            const EdgeSides& s = sides[static_cast<std::size_t>(inc.edge_index)];
            sum += (inc.side == 0) ? s.La : s.Lb;
        }
        L[f] = sum;
    }
    return L;
}

} // namespace

Eigen::VectorXd total_curvature(const CurvatureState& state) {
    return sum_faces(state, edge_side_curvatures(state));
}

namespace {

Eigen::MatrixXd assemble_jacobian(const CurvatureState& state) {
    const CellComplex& cx = state.complex();
    const auto& edges = state.complex().edges();
    const int n = static_cast<int>(edges.size());
    const auto& active = state.active();
    const int m = static_cast<int>(active.size());
    if (m == 0)
        throw DomainError("jacobian: no active faces");

    std::vector<int> pos(static_cast<std::size_t>(cx.num_faces()), -1);
    for (int i = 0; i < m; ++i) pos[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = i;

    // Per-edge 2x2 blocks in parallel...
    std::vector<Eigen::Matrix2d> blocks(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) if (n > 32)
    for (int i = 0; i < n; ++i) {
        const WeightedEdge& e = edges[static_cast<std::size_t>(i)];
        if (state.pinned(e.face_a) && state.pinned(e.face_b)) {
            blocks[static_cast<std::size_t>(i)].setZero();
            continue;
        }
        blocks[static_cast<std::size_t>(i)] =
            bigon_derivatives(state.radius(e.face_a), state.radius(e.face_b), e.weight);
    }

    // ...then a serial scatter in edge order, so the accumulation order (and
    // hence every last bit of the result) is independent of thread count.
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < n; ++i) {
        const WeightedEdge& e = edges[static_cast<std::size_t>(i)];
        const Eigen::Matrix2d& D = blocks[static_cast<std::size_t>(i)];
        const int ia = pos[static_cast<std::size_t>(e.face_a)];
        const int ib = pos[static_cast<std::size_t>(e.face_b)];
        if (e.face_a == e.face_b) {
            // Self-glued edge: both sides share one log-coordinate, so the
            // whole block collapses onto the diagonal.
            if (ia >= 0) M(ia, ia) += D.sum();
            continue;
        }
        if (ia >= 0) M(ia, ia) += D(0, 0);
        if (ib >= 0) M(ib, ib) += D(1, 1);
        if (ia >= 0 && ib >= 0) {
            M(ia, ib) += D(0, 1);
            M(ib, ia) += D(1, 0);
        }
    }
    return M;
}

} // namespace

Eigen::MatrixXd jacobian_raw(const CurvatureState& state) {
    return assemble_jacobian(state);
}

Eigen::MatrixXd jacobian(const CurvatureState& state) {
    const Eigen::MatrixXd M = assemble_jacobian(state);
    return 0.5 * (M + M.transpose());
}

double potential_difference(const CurvatureState& from, const CurvatureState& to) {
    if (!from.same_stratum(to))
        throw DomainError("potential: states must share a complex and a pinned set");
    const auto& active = from.active();
    const Eigen::VectorXd K0 = from.active_log();
    const Eigen::VectorXd dK = to.active_log() - K0;
    if (dK.size() == 0 || dK.isZero(0.0)) return 0.0;

    const CellComplex& cx = from.complex();
    // g(t) = <L(K0 + t dK), dK>, the derivative of the potential along the
    // segment; integrate over t in [0, 1].
    const auto g = [&](double t) {
        const CurvatureState s =
            CurvatureState::from_active_log(cx, active, K0 + t * dK);
        const Eigen::VectorXd L = total_curvature(s);
        double acc = 0.0;
        for (std::size_t i = 0; i < active.size(); ++i)
            acc += L[active[i]] * dK[static_cast<Eigen::Index>(i)];
        return acc;
    };

    // Adaptive Simpson with Richardson acceptance.
    struct Simpson {
        const decltype(g)& f;
        int evals = 0;
        double recurse(double a, double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            evals += 2;
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
                return left + right + delta / 15.0;
            return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    } simpson{g};

    const double fa = g(0.0), fm = g(0.5), fb = g(1.0);
    const double whole = (fa + 4.0 * fm + fb) / 6.0;
    return simpson.recurse(0.0, 1.0, fa, fm, fb, whole, 1e-11, 30);
}

namespace ref {

Eigen::VectorXd total_curvature(const CurvatureState& state) {
    const CellComplex& cx = state.complex();
    const auto& edges = cx.edges();
    Eigen::VectorXd L(cx.num_faces());
    for (int f = 0; f < cx.num_faces(); ++f) {
        if (state.pinned(f)) {
            L[f] = 0.0;
            continue;
        }
        double sum = 0.0;
        for (const auto& inc : cx.incident(f)) {
            const WeightedEdge& e = edges[static_cast<std::size_t>(inc.edge_index)];
            const BigonGeometry g =
                bigon(state.radius(e.face_a), state.radius(e.face_b), e.weight);
            sum += (inc.side == 0) ? g.L1 : g.L2;
        }
        L[f] = sum;
    }
    return L;
}

Eigen::MatrixXd jacobian_raw(const CurvatureState& state) {
    const CellComplex& cx = state.complex();
    const auto& edges = cx.edges();
    const auto& active = state.active();
    const int m = static_cast<int>(active.size());
    if (m == 0)
        throw DomainError("jacobian: no active faces");

    std::vector<int> pos(static_cast<std::size_t>(cx.num_faces()), -1);
    for (int i = 0; i < m; ++i) pos[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = i;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (const WeightedEdge& e : edges) {
        if (state.pinned(e.face_a) && state.pinned(e.face_b)) continue;
        const Eigen::Matrix2d D =
            bigon_derivatives(state.radius(e.face_a), state.radius(e.face_b), e.weight);
        const int ia = pos[static_cast<std::size_t>(e.face_a)];
        const int ib = pos[static_cast<std::size_t>(e.face_b)];
        if (e.face_a == e.face_b) {
            if (ia >= 0) M(ia, ia) += D.sum();
            continue;
        }
        if (ia >= 0) M(ia, ia) += D(0, 0);
        if (ib >= 0) M(ib, ib) += D(1, 1);
        if (ia >= 0 && ib >= 0) {
            M(ia, ib) += D(0, 1);
            M(ib, ia) += D(1, 0);
        }
    }
    return M;
}

} // namespace ref

} // namespace sphereflow
