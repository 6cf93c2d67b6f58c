#pragma once

#include <Eigen/Dense>

namespace sphereflow {

// A bigon (lens) is the intersection of two round disks on the unit sphere.
//
//                 , - ~ - ,
//             , '           ' ,
//           ,          , - ~ -.- ,
//          ,       , '        |    ' ,
//         ,       ,     d1    |d2     ,
//         ,      c1-----------+------c2
//         ,       ,           |\      ,
//          ,       , alpha1-> | \<- alpha2
//           ,          ' - , _|, '
//             ,              .'
//               ' - , _ ,  -
//
// Disk i has spherical radius r_i in (0, pi/2]; r_i = pi/2 is a hemisphere
// bounded by a great circle.  The boundary circles meet at exterior
// intersection angle phi in (0, pi/2).  Everything below follows from the
// spherical law of cosines applied to the center-center-vertex triangle.
struct BigonGeometry {
    double r1, r2, phi; // defining data, radians

    double d;      // center distance, in (|r1 - r2|, r1 + r2)
    double alpha1; // half the central angle the lens subtends at center 1
    double alpha2; // ditto at center 2
    double ell1;   // arc length of the lens boundary lying on circle 1
    double ell2;   // ditto on circle 2
    double L1;     // total geodesic curvature of that arc: ell * cot(r)
    double L2;     // ditto; exactly 0 when r2 == pi/2
    double area;   // lens area, = 2*phi - L1 - L2
};

// Geodesic curvature of a circle of spherical radius r: cot(r).
// Exactly 0 for r == pi/2 (no rounding residue from cos(pi/2)).
double geodesic_curvature(double r);

// Inverse of the above: r = atan2(1, k), mapping k = 0 to exactly pi/2.
double radius_from_curvature(double k);

// Spherical distance between the two disk centers:
//   cos d = cos r1 cos r2 - sin r1 sin r2 cos phi.
// Throws DomainError unless r1, r2 in (0, pi/2] and phi in (0, pi/2).
double center_distance(double r1, double r2, double phi);

// Full bigon geometry for one weighted edge.  Same domain as above.
BigonGeometry bigon(double r1, double r2, double phi);

// Jacobian of (L1, L2) with respect to the log-curvatures (K1, K2),
// K_i = log(cot r_i), by central differences with step 1e-6 in K.
// Rows index the L's, columns the K's.  A side at r == pi/2 has no
// log-coordinate; its row and column are identically zero.
Eigen::Matrix2d bigon_derivatives(double r1, double r2, double phi);

} // namespace sphereflow
