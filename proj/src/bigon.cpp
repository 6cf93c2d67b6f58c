#include "sphereflow/bigon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sphereflow/errors.hpp"

namespace sphereflow {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

struct SinCos {
    double s, c;
};

// sin/cos of a disk radius.  The great-circle case is special-cased so the
// degeneracy is exact: cos(pi/2) in double is 6.1e-17, not 0, and that dust
// would otherwise leak into L as a fake curvature.
SinCos radius_sincos(double r) {
    if (r == kHalfPi) return {1.0, 0.0};
    return {std::sin(r), std::cos(r)};
}

double clamped_acos(double x) {
    return std::acos(std::clamp(x, -1.0, 1.0));
}

void check_domain(double r1, double r2, double phi) {
    if (!(r1 > 0.0) || !(r1 <= kHalfPi))
        throw DomainError("bigon: r1 out of range (0, pi/2]");
    if (!(r2 > 0.0) || !(r2 <= kHalfPi))
        throw DomainError("bigon: r2 out of range (0, pi/2]");
    if (!(phi > 0.0) || !(phi < kHalfPi))
        throw DomainError("bigon: phi out of range (0, pi/2)");
}

// Versine 1 - cos(d) of the center distance.  The textbook form
// cos d = cos r1 cos r2 - sin r1 sin r2 cos phi loses everything to
// cancellation once both radii shrink (cos d rounds to 1 near r ~ 1e-8,
// which matters when a divergent trajectory is being watched).  Rewriting
// with cos phi = 1 - 2 sin^2(phi/2) gives
//     1 - cos d = 2 (sin^2((r1+r2)/2) - sin r1 sin r2 sin^2(phi/2)),
// where AM-GM plus phi < pi/2 bound the subtracted term by half the first,
// so the difference keeps full relative accuracy down to subnormal radii.
double center_versine(double r1, double r2, double phi) {
    const double sh = std::sin(0.5 * (r1 + r2));
    const double sp = std::sin(0.5 * phi);
    return 2.0 * (sh * sh - (std::sin(r1) * std::sin(r2)) * (sp * sp));
}

double distance_from_versine(double ver) {
    return 2.0 * std::asin(std::min(1.0, std::sqrt(std::max(0.0, 0.5 * ver))));
}

} // namespace

double geodesic_curvature(double r) {
    if (r == kHalfPi) return 0.0;
    if (!(r > 0.0) || !(r < kHalfPi))
        throw DomainError("geodesic_curvature: r out of range (0, pi/2]");
    return std::cos(r) / std::sin(r);
}

double radius_from_curvature(double k) {
    if (!(k >= 0.0) || !std::isfinite(k))
        throw DomainError("radius_from_curvature: k must be finite and >= 0");
    return std::atan2(1.0, k); // k == 0 lands on pi/2 exactly
}

double center_distance(double r1, double r2, double phi) {
    check_domain(r1, r2, phi);
    return distance_from_versine(center_versine(r1, r2, phi));
}

BigonGeometry bigon(double r1, double r2, double phi) {
    check_domain(r1, r2, phi);
    const auto [s1, c1] = radius_sincos(r1);
    const auto [s2, c2] = radius_sincos(r2);
    const double cphi = std::cos(phi);

    const double ver = center_versine(r1, r2, phi);
    const double sd = std::sqrt(std::max(0.0, ver * (2.0 - ver)));
    if (sd == 0.0)
        throw DomainError("bigon: circles degenerate (centers coincident or antipodal)");

    BigonGeometry g;
    g.r1 = r1;
    g.r2 = r2;
    g.phi = phi;
    g.d = distance_from_versine(ver);

    // Law of cosines in the triangle (center 1, center 2, lens vertex),
    // solved for the angle at each center.  The textbook numerator
    // cos r2 - cos d cos r1 equals sin r1 (sin r1 cos r2 + cos r1 sin r2 cos phi)
    // identically, so sin r1 cancels against the denominator sin d sin r1 and
    // what remains is a sum of nonnegative terms: stable however small the
    // circles get.
    g.alpha1 = clamped_acos((s1 * c2 + c1 * s2 * cphi) / sd);
    g.alpha2 = clamped_acos((s2 * c1 + c2 * s1 * cphi) / sd);

    g.ell1 = 2.0 * g.alpha1 * s1;
    g.ell2 = 2.0 * g.alpha2 * s2;
    g.L1 = 2.0 * g.alpha1 * c1; // exactly 0 when c1 == 0
    g.L2 = 2.0 * g.alpha2 * c2;

    // Gauss-Bonnet: area = 2*pi - (exterior turning) - (boundary curvature).
    // The turning angle at each of the two vertices is pi - phi, and the
    // boundary contributes L1 + L2.  The grouping keeps the result bitwise
    // symmetric under exchanging the two sides:
    g.area = 2.0 * phi - (g.L1 + g.L2);
    return g;
}

Eigen::Matrix2d bigon_derivatives(double r1, double r2, double phi) {
    check_domain(r1, r2, phi);
    constexpr double h = 1e-6;
    const bool flat1 = (r1 == kHalfPi);
    const bool flat2 = (r2 == kHalfPi);
    Eigen::Matrix2d D = Eigen::Matrix2d::Zero();

    // Perturb K_i = log k_i by +-h, i.e. scale k_i by exp(+-h), and
    // difference the resulting L's.  A flat side (k == 0) stays put.
    if (!flat1) {
        const double k1 = geodesic_curvature(r1);
        const BigonGeometry p = bigon(radius_from_curvature(k1 * std::exp(h)), r2, phi);
        const BigonGeometry m = bigon(radius_from_curvature(k1 * std::exp(-h)), r2, phi);
        D(0, 0) = (p.L1 - m.L1) / (2.0 * h);
        if (!flat2) D(1, 0) = (p.L2 - m.L2) / (2.0 * h);
    }
    if (!flat2) {
        const double k2 = geodesic_curvature(r2);
        const BigonGeometry p = bigon(r1, radius_from_curvature(k2 * std::exp(h)), phi);
        const BigonGeometry m = bigon(r1, radius_from_curvature(k2 * std::exp(-h)), phi);
        D(1, 1) = (p.L2 - m.L2) / (2.0 * h);
        if (!flat1) D(0, 1) = (p.L1 - m.L1) / (2.0 * h);
    }
    return D;
}

} // namespace sphereflow
