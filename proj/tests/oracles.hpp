#pragma once

// Independent cross-checks used only by tests.  These deliberately avoid the
// library's formula chain: the lens area is computed by direct numerical
// integration of slice lengths, so agreement with the closed-form geometry
// is a real two-route test and not an identity.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sphereflow/curvature.hpp"

namespace oracle {

namespace detail {

// Slice geometry for the lens D1 cap D2, in polar coordinates about the
// center of disk 1.  Along azimuth lambda, a point at polar angle theta has
// distance to center 2 given by
//   cos(dist2) = cos d cos theta + sin d sin theta cos lambda
//              = R cos(theta - psi),
//   R = sqrt(cos^2 d + sin^2 d cos^2 lambda),  psi = atan2(sin d cos lambda, cos d).
// It lies in D2 iff R cos(theta - psi) >= cos r2, i.e. theta in
// [psi - w, psi + w] with w = acos(cos r2 / R) (empty when cos r2 > R).
// Clipping to D1 ([0, r1]) and integrating sin theta gives the area density
//   s(lambda) = cos(theta_in) - cos(theta_out),  theta_in/out the clipped ends.
struct LensSlices {
    double r1, cd, sd, cr2;

    double operator()(double lambda) const {
        const double cl = std::cos(lambda);
        const double rr = std::sqrt(cd * cd + sd * sd * cl * cl);
        if (cr2 > rr) return 0.0;
        const double psi = std::atan2(sd * cl, cd);
        const double w = std::acos(std::clamp(cr2 / rr, -1.0, 1.0));
        const double lo = std::max(0.0, psi - w);
        const double hi = std::min(r1, psi + w);
        if (hi <= lo) return 0.0;
        return std::cos(lo) - std::cos(hi);
    }

    // The clip points where the integrand loses smoothness.
    double upper_clip(double lambda) const {
        const double cl = std::cos(lambda);
        const double rr = std::sqrt(cd * cd + sd * sd * cl * cl);
        if (cr2 > rr) return -1.0;
        const double psi = std::atan2(sd * cl, cd);
        const double w = std::acos(std::clamp(cr2 / rr, -1.0, 1.0));
        return (psi + w) - r1;
    }
    double lower_clip(double lambda) const {
        const double cl = std::cos(lambda);
        const double rr = std::sqrt(cd * cd + sd * sd * cl * cl);
        if (cr2 > rr) return -1.0;
        const double psi = std::atan2(sd * cl, cd);
        const double w = std::acos(std::clamp(cr2 / rr, -1.0, 1.0));
        return psi - w;
    }
};

template <typename F>
double bisect_sign_change(F&& f, double a, double b, int iters = 80) {
    double fa = f(a);
    for (int i = 0; i < iters; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fa <= 0.0) == (fm <= 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol, int depth,
                        double fa, double fm, double fb) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, 0.5 * tol, depth - 1, fa, flm, fm) +
           adaptive_simpson(f, m, b, 0.5 * tol, depth - 1, fm, frm, fb);
}

template <typename F>
double integrate(F&& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    return adaptive_simpson(f, a, b, tol, 40, f(a), f(0.5 * (a + b)), f(b));
}

} // namespace detail

// Area of the intersection of two spherical disks of radii r1, r2 in
// (0, pi/2] whose boundary circles meet at exterior angle phi in (0, pi/2),
// by quadrature over azimuth about the first center (symmetric in lambda,
// hence the factor 2).  Absolute accuracy ~tol.
inline double lens_area_quadrature(double r1, double r2, double phi, double tol = 1e-9) {
    const double pi = 3.14159265358979323846;
    const double s1 = std::sin(r1), c1 = std::cos(r1);
    const double s2 = std::sin(r2), c2 = std::cos(r2);
    const double cd = std::clamp(c1 * c2 - s1 * s2 * std::cos(phi), -1.0, 1.0);
    const double sd = std::sqrt(std::max(0.0, 1.0 - cd * cd));
    const detail::LensSlices slices{r1, cd, sd, c2};

    // Split [0, pi] wherever the integrand switches regime: support boundary
    // (slice becomes empty) or a clip switching between the two disks'
    // boundaries.  Scan a grid for sign changes, refine by bisection.
    std::vector<double> cuts{0.0, pi};
    const int grid = 64;
    const auto scan = [&](auto&& g) {
        double prev = g(0.0);
        for (int i = 1; i <= grid; ++i) {
            const double x = pi * i / grid;
            const double cur = g(x);
            if ((prev <= 0.0) != (cur <= 0.0))
                cuts.push_back(detail::bisect_sign_change(g, pi * (i - 1) / grid, x));
            prev = cur;
        }
    };
    scan([&](double x) { return slices(x); });
    scan([&](double x) { return slices.upper_clip(x); });
    scan([&](double x) { return slices.lower_clip(x); });
    std::sort(cuts.begin(), cuts.end());

    double area = 0.0;
    const double piece_tol = 0.5 * tol / static_cast<double>(cuts.size());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        area += detail::integrate(slices, cuts[i], cuts[i + 1], piece_tol);
    return 2.0 * area;
}

// Jacobian of total_curvature by global central differences in K (step h),
// independent of the per-edge block assembly under test.
inline Eigen::MatrixXd fd_jacobian(const sphereflow::CurvatureState& state,
                                   double h = 1e-5) {
    const auto& active = state.active();
    const Eigen::Index m = static_cast<Eigen::Index>(active.size());
    const Eigen::VectorXd K = state.active_log();
    Eigen::MatrixXd M(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::VectorXd Kp = K, Km = K;
        Kp[j] += h;
        Km[j] -= h;
        const Eigen::VectorXd Lp = sphereflow::total_curvature(
            sphereflow::CurvatureState::from_active_log(state.complex(), active, Kp));
        const Eigen::VectorXd Lm = sphereflow::total_curvature(
            sphereflow::CurvatureState::from_active_log(state.complex(), active, Km));
        for (Eigen::Index i = 0; i < m; ++i)
            M(i, j) = (Lp[active[static_cast<std::size_t>(i)]] -
                       Lm[active[static_cast<std::size_t>(i)]]) /
                      (2.0 * h);
    }
    return M;
}

} // namespace oracle
