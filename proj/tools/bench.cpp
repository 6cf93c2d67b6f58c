// Timing harness: serial reference kernels vs the OpenMP ones, on synthetic
// complexes large enough for the parallel loops to matter.  Also verifies
// that both paths produce bit-identical results, which the deterministic
// reduction scheme guarantees regardless of thread count.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sphereflow/cell_complex.hpp"
#include "sphereflow/curvature.hpp"
#include "sphereflow/feasibility.hpp"

using namespace sphereflow;

namespace {

CellComplex ring_complex(int num_faces, int extra_chords, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> w(0.05, 1.5207963267948966);
    std::uniform_int_distribution<int> pick(0, num_faces - 1);
    std::vector<WeightedEdge> edges;
    int id = 0;
    for (int f = 0; f < num_faces; ++f)
        edges.push_back({id++, f, (f + 1) % num_faces, w(rng)});
    for (int c = 0; c < extra_chords; ++c)
        edges.push_back({id++, pick(rng), pick(rng), w(rng)});
    return CellComplex(num_faces, std::move(edges));
}

CurvatureState random_state(const CellComplex& cx, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> r(0.3, 1.2);
    Eigen::VectorXd k(cx.num_faces());
    for (int f = 0; f < cx.num_faces(); ++f) k[f] = 1.0 / std::tan(r(rng));
    return CurvatureState(cx, std::move(k));
}

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-16s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                identical ? "bit-identical" : "MISMATCH");
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP off)\n");
#endif
    std::mt19937_64 rng(20240817);

    {
        const CellComplex cx = ring_complex(20000, 40000, rng);
        const CurvatureState s = random_state(cx, rng);
        Eigen::VectorXd a, b;
        const double ts = time_best_of(5, [&] { a = ref::total_curvature(s); });
        const double tp = time_best_of(5, [&] { b = total_curvature(s); });
        report("total_curvature", ts, tp, a == b);
    }
    {
        const CellComplex cx = ring_complex(1200, 2400, rng);
        const CurvatureState s = random_state(cx, rng);
        Eigen::MatrixXd a, b;
        const double ts = time_best_of(3, [&] { a = ref::jacobian_raw(s); });
        const double tp = time_best_of(3, [&] { b = jacobian_raw(s); });
        report("jacobian", ts, tp, a == b);
    }
    {
        // Feasibility scan over all subsets of a 22-face support.
        const CellComplex cx = ring_complex(1200, 2400, rng);
        Eigen::VectorXd L_hat = Eigen::VectorXd::Zero(cx.num_faces());
        std::uniform_real_distribution<double> v(0.1, 0.5);
        for (int f = 0; f < 22; ++f) L_hat[f * 7] = v(rng);
        TargetClass a, b;
        const double ts = time_best_of(3, [&] { a = ref::classify_target(cx, L_hat); });
        const double tp = time_best_of(3, [&] { b = classify_target(cx, L_hat); });
        report("classify", ts, tp,
               a.kind == b.kind && a.witness == b.witness && a.slack == b.slack);
    }
    return 0;
}
