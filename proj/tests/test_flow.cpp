#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "sphereflow/curvature.hpp"
#include "sphereflow/errors.hpp"
#include "sphereflow/flow.hpp"
#include "test_support.hpp"

using namespace sphereflow;
namespace fx = testsup::fixture;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

Eigen::VectorXd vec1(double a) { return Eigen::VectorXd::Constant(1, a); }

} // namespace

TEST_CASE("options validation") {
    FlowOptions opts;
    CHECK_NOTHROW(opts.validate());
    opts.rtol = 0.0;
    CHECK_THROWS_AS(opts.validate(), DomainError);
    opts = FlowOptions{};
    opts.trace_stride = 0;
    CHECK_THROWS_AS(opts.validate(), DomainError);
    opts = FlowOptions{};
    opts.pin_threshold = 1e-11; // below residual_tol
    CHECK_THROWS_AS(opts.validate(), DomainError);
}

TEST_CASE("interior flow recovers the beach-ball pattern it came from") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd L_hat = vec2(fx::L_ball_interior, fx::L_ball_interior);
    const FlowResult res = flow_interior(ball, L_hat, vec2(0.6, 1.7));
    CHECK(res.status == FlowStatus::Converged);
    CHECK(res.residual_final <= 1e-10);
    CHECK(std::abs(res.k_final[0] - 1.0) < 1e-8);
    CHECK(std::abs(res.k_final[1] - 1.0) < 1e-8);
    CHECK(res.field_bound_violations == 0);
    CHECK(res.steps_accepted > 0);
    CHECK(res.field_evals > 0);

    // trace shape: starts at t = 0, strictly increasing, ends at t_final
    REQUIRE(!res.trace.rows.empty());
    CHECK(res.trace.rows.front().t == 0.0);
    for (std::size_t i = 1; i < res.trace.rows.size(); ++i)
        CHECK(res.trace.rows[i].t > res.trace.rows[i - 1].t);
    CHECK(res.trace.rows.back().t == res.t_final);
    CHECK(res.trace.tracked_faces == std::vector<int>{0, 1});
}

TEST_CASE("a start that already meets the target does not move") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd k0 = vec2(2.0, 2.0);
    const Eigen::VectorXd L_hat = total_curvature(CurvatureState(ball, k0));
    const FlowResult res = flow_interior(ball, L_hat, k0);
    CHECK(res.status == FlowStatus::Converged);
    CHECK(res.steps_accepted == 0);
    CHECK(res.t_final == 0.0);
    CHECK(res.trace.rows.size() == 1);
    CHECK(res.k_final[0] == 2.0);
    CHECK(res.k_final[1] == 2.0);
}

TEST_CASE("flows preserve the beach-ball face symmetry bit for bit") {
    const CellComplex ball = testsup::beach_ball();
    const double c = 0.8 * fx::L_ball_interior;
    const FlowResult res = flow_interior(ball, vec2(c, c), vec2(0.7, 0.7));
    CHECK(res.status == FlowStatus::Converged);
    CHECK(res.k_final[0] == res.k_final[1]); // bitwise
    for (const TraceRow& row : res.trace.rows) {
        CHECK(row.K[0] == row.K[1]);
        CHECK(row.L[0] == row.L[1]);
    }
}

TEST_CASE("flow gating rejects mismatched targets") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd stratum_target = vec2(0.9 * fx::L_ball_stratum, 0.0);
    const Eigen::VectorXd interior_target = vec2(fx::L_ball_interior, fx::L_ball_interior);

    CHECK_THROWS_AS(flow_interior(ball, stratum_target, vec2(1.0, 1.0)), DomainError);
    CHECK_THROWS_AS(flow_interior(ball, vec2(4.0, 4.0), vec2(1.0, 1.0)), DomainError);
    CHECK_THROWS_AS(flow_mixed(ball, vec2(4.0, 4.0), vec2(1.0, 1.0)), DomainError);
    CHECK_THROWS_AS(flow_mixed(ball, vec2(0.0, 0.0), vec2(1.0, 1.0)), DomainError);

    // reduced: support must be a nonempty proper subset matching a stratum
    CHECK_THROWS_AS(flow_reduced(ball, {}, Eigen::VectorXd(), Eigen::VectorXd()),
                    DomainError);
    CHECK_THROWS_AS(
        flow_reduced(ball, {0, 1}, interior_target, vec2(1.0, 1.0)), DomainError);
    CHECK_THROWS_AS(flow_reduced(ball, {0}, vec1(0.0), vec1(1.0)), DomainError);
    CHECK_THROWS_AS(flow_reduced(ball, {0}, vec1(5.0), vec1(1.0)), DomainError);

    // start vectors are validated against the evolving set
    CHECK_THROWS_AS(flow_interior(ball, interior_target, vec2(1.0, 0.0)), DomainError);
    CHECK_THROWS_AS(flow_interior(ball, interior_target, vec2(1.0, -2.0)), DomainError);
}

TEST_CASE("reduced flow solves a stratum target on its support") {
    const CellComplex ball = testsup::beach_ball();
    const double target = 0.9 * fx::L_ball_stratum;
    const FlowResult res = flow_reduced(ball, {0}, vec1(target), vec1(1.5));
    CHECK(res.status == FlowStatus::Converged);
    CHECK(res.residual_final <= 1e-10);
    CHECK(res.k_final[1] == 0.0); // never evolved
    CHECK(res.k_final[0] > 0.0);
    const Eigen::VectorXd L =
        total_curvature(CurvatureState(ball, res.k_final));
    CHECK(std::abs(L[0] - target) <= 1e-10);
    CHECK(res.trace.tracked_faces == std::vector<int>{0});
    CHECK(res.field_bound_violations == 0);
}

TEST_CASE("mixed flow pins the off-support face and matches the reduced flow") {
    const CellComplex ball = testsup::beach_ball();
    const double target = 0.9 * fx::L_ball_stratum;
    const Eigen::VectorXd L_hat = vec2(target, 0.0);

    const FlowResult mixed = flow_mixed(ball, L_hat, vec2(1.2, 0.8));
    CHECK(mixed.status == FlowStatus::Converged);
    CHECK(mixed.k_final[1] == 0.0); // pinned exactly
    CHECK(mixed.residual_final <= 1e-10);
    CHECK(mixed.field_bound_violations == 0);

    const FlowResult reduced = flow_reduced(ball, {0}, vec1(target), vec1(1.2));
    CHECK(std::abs(mixed.k_final[0] - reduced.k_final[0]) < 1e-6);

    // the pinned face's K column reads -inf from the pinning moment on
    const Eigen::Index col = 1;
    bool saw_finite = false, saw_pinned = false;
    for (const TraceRow& row : mixed.trace.rows) {
        if (std::isinf(row.K[col]))
            saw_pinned = true;
        else {
            saw_finite = true;
            CHECK(!saw_pinned); // -inf never reverts to finite
        }
    }
    CHECK(saw_finite);
    CHECK(saw_pinned);
}

TEST_CASE("mixed flow on random stratum instances agrees with reduced") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> k0d(0.3, 2.5);
    for (int i = 0; i < 12; ++i) {
        const CellComplex cx = testsup::random_complex(rng, 6);
        const std::vector<int> support = testsup::random_support(rng, cx.num_faces());
        const CurvatureState gen = testsup::random_stratum_state(rng, cx, support);
        const Eigen::VectorXd L_hat = total_curvature(gen);

        Eigen::VectorXd k0_full(cx.num_faces());
        for (int f = 0; f < cx.num_faces(); ++f) k0_full[f] = k0d(rng);
        Eigen::VectorXd L_supp(static_cast<Eigen::Index>(support.size()));
        Eigen::VectorXd k0_supp(static_cast<Eigen::Index>(support.size()));
        for (std::size_t j = 0; j < support.size(); ++j) {
            L_supp[static_cast<Eigen::Index>(j)] = L_hat[support[j]];
            k0_supp[static_cast<Eigen::Index>(j)] = k0_full[support[j]];
        }

        const FlowResult mixed = flow_mixed(cx, L_hat, k0_full);
        const FlowResult reduced = flow_reduced(cx, support, L_supp, k0_supp);
        CHECK((mixed.k_final - reduced.k_final).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((mixed.k_final - gen.k()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(mixed.field_bound_violations == 0);
        CHECK(reduced.field_bound_violations == 0);
    }
}

TEST_CASE("a start below the pin threshold is frozen before the first step") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd L_hat = vec2(0.9 * fx::L_ball_stratum, 0.0);
    const FlowResult res = flow_mixed(ball, L_hat, vec2(1.0, 1e-12));
    CHECK(res.status == FlowStatus::Converged);
    CHECK(res.k_final[1] == 0.0);
    REQUIRE(!res.trace.rows.empty());
    CHECK(std::isinf(res.trace.rows.front().K[1])); // pinned already at t = 0
}

TEST_CASE("off-support log-curvature decreases along the whole mixed flow") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd L_hat = vec2(0.8 * fx::L_ball_stratum, 0.0);
    FlowOptions opts;
    opts.trace_stride = 1;
    const FlowResult res = flow_mixed(ball, L_hat, vec2(1.1, 1.4), opts);
    CHECK(res.status == FlowStatus::Converged);
    int finite_pairs = 0;
    for (std::size_t i = 1; i < res.trace.rows.size(); ++i) {
        const double prev = res.trace.rows[i - 1].K[1];
        const double cur = res.trace.rows[i].K[1];
        if (std::isfinite(prev) && std::isfinite(cur)) {
            CHECK(cur < prev); // dK/dt = -L < 0 off support, always
            ++finite_pairs;
        }
    }
    CHECK(finite_pairs > 5);
}

TEST_CASE("gradient norm decays monotonically along interior trajectories") {
    const CellComplex ball = testsup::beach_ball();
    FlowOptions opts;
    opts.trace_stride = 1;
    const FlowResult res =
        flow_interior(ball, vec2(fx::L_ball_interior, fx::L_ball_interior),
                      vec2(0.4, 2.2), opts);
    CHECK(res.status == FlowStatus::Converged);
    REQUIRE(res.trace.rows.size() > 10);
    for (std::size_t i = 1; i < res.trace.rows.size(); ++i)
        CHECK(res.trace.rows[i].grad_norm <=
              res.trace.rows[i - 1].grad_norm * (1.0 + 1e-7) + 1e-13);
}

TEST_CASE("the flow descends the target-adjusted potential step by step") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd L_hat = vec2(fx::L_ball_interior, fx::L_ball_interior);
    FlowOptions opts;
    opts.trace_stride = 1;
    const FlowResult res = flow_interior(ball, L_hat, vec2(0.5, 1.9), opts);
    CHECK(res.status == FlowStatus::Converged);
    const auto& tracked = res.trace.tracked_faces;
    for (std::size_t i = 1; i < res.trace.rows.size(); ++i) {
        const CurvatureState a =
            CurvatureState::from_active_log(ball, tracked, res.trace.rows[i - 1].K);
        const CurvatureState b =
            CurvatureState::from_active_log(ball, tracked, res.trace.rows[i].K);
        Eigen::VectorXd dK = res.trace.rows[i].K - res.trace.rows[i - 1].K;
        double linear = 0.0;
        for (std::size_t j = 0; j < tracked.size(); ++j)
            linear += L_hat[tracked[j]] * dK[static_cast<Eigen::Index>(j)];
        const double descent = potential_difference(a, b) - linear;
        CHECK(descent <= 5e-9); // strictly decreasing up to quadrature noise
    }
}

TEST_CASE("recorded gradients obey the a-priori decay bound") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd L_hat = vec2(fx::L_ball_interior, fx::L_ball_interior);
    const Eigen::VectorXd k0 = vec2(0.6, 1.7);
    const FlowResult res = flow_interior(ball, L_hat, k0);
    REQUIRE(res.status == FlowStatus::Converged);
    const Eigen::VectorXd K_star = res.k_final.array().log().matrix();
    const Eigen::VectorXd K0 = k0.array().log().matrix();
    const auto rows = gradient_bound_check(ball, L_hat, res.trace, K_star, K0);
    CHECK(!rows.empty());
    for (const auto& r : rows) CHECK(r.ok);
}

TEST_CASE("a too-small time budget raises a solver error") {
    const CellComplex ball = testsup::beach_ball();
    FlowOptions opts;
    opts.t_max = 0.2;
    CHECK_THROWS_WITH_AS(
        flow_interior(ball, vec2(fx::L_ball_interior, fx::L_ball_interior),
                      vec2(std::exp(2.0), std::exp(2.0)), opts),
        doctest::Contains("budget"), SolveError);
}

TEST_CASE("the raw integrator reports divergence for an infeasible target") {
    const CellComplex ball = testsup::beach_ball();
    const FlowResult res = run_prescribed_flow(ball, vec2(4.0, 4.0), {0, 1},
                                               vec2(1.0, 1.0), FlowOptions{}, false);
    CHECK(res.status == FlowStatus::Diverged);
    CHECK(res.trace.rows.back().K.maxCoeff() > 30.0);
    CHECK(res.k_final.maxCoeff() > std::exp(30.0));
}

TEST_CASE("newton: beach-ball targets in a handful of iterations") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd L_hat = vec2(fx::L_ball_interior, fx::L_ball_interior);
    const NewtonResult res = newton_solve(ball, L_hat);
    CHECK(res.residual <= 1e-10);
    CHECK(res.iterations <= 10);
    CHECK(std::abs(res.k_final[0] - 1.0) < 1e-8);
    CHECK(std::abs(res.k_final[1] - 1.0) < 1e-8);
    CHECK(res.trace.rows.size() == static_cast<std::size_t>(res.iterations) + 1);
    CHECK(res.trace.rows.front().t == 0.0);
    CHECK(res.trace.rows.back().t == static_cast<double>(res.iterations));
}

TEST_CASE("newton: starting at the solution takes zero iterations") {
    const CellComplex ball = testsup::beach_ball();
    const Eigen::VectorXd k = vec2(1.7, 0.6);
    const Eigen::VectorXd L_hat = total_curvature(CurvatureState(ball, k));
    const Eigen::VectorXd K0 = k.array().log().matrix();
    const NewtonResult res = newton_solve(ball, L_hat, FlowOptions{}, &K0);
    CHECK(res.iterations == 0);
    CHECK(res.k_final[0] == k[0]);
    CHECK(res.k_final[1] == k[1]);
}

TEST_CASE("newton: stratum targets reduce to the support") {
    const CellComplex ball = testsup::beach_ball();
    const NewtonResult res = newton_solve(ball, vec2(fx::L_ball_stratum, 0.0));
    CHECK(res.residual <= 1e-10);
    CHECK(std::abs(res.k_final[0] - 1.0) < 1e-8); // the frozen fixture's generator
    CHECK(res.k_final[1] == 0.0);
    CHECK(res.trace.tracked_faces == std::vector<int>{0});
}

TEST_CASE("newton rejects infeasible and zero targets") {
    const CellComplex ball = testsup::beach_ball();
    CHECK_THROWS_AS(newton_solve(ball, vec2(4.0, 4.0)), DomainError);
    CHECK_THROWS_AS(newton_solve(ball, vec2(0.0, 0.0)), DomainError);
    const Eigen::VectorXd K0_wrong = Eigen::VectorXd::Zero(5);
    CHECK_THROWS_AS(newton_solve(ball, vec2(fx::L_ball_stratum, 0.0), FlowOptions{},
                                 &K0_wrong),
                    DomainError);
}

TEST_CASE("newton and the interior flow land on the same pattern") {
    std::mt19937_64 rng(52);
    for (int i = 0; i < 8; ++i) {
        const CellComplex cx = testsup::random_complex(rng, 6);
        const CurvatureState gen =
            CurvatureState(cx, testsup::random_positive_k(rng, cx.num_faces()));
        const Eigen::VectorXd L_hat = total_curvature(gen);
        const NewtonResult newton = newton_solve(cx, L_hat);
        const FlowResult flow =
            flow_interior(cx, L_hat, Eigen::VectorXd::Ones(cx.num_faces()));
        for (int f = 0; f < cx.num_faces(); ++f) {
            const double scale = std::max(1.0, std::abs(newton.k_final[f]));
            CHECK(std::abs(newton.k_final[f] - flow.k_final[f]) / scale < 1e-7);
            CHECK(std::abs(newton.k_final[f] - gen.k()[f]) / scale < 1e-7);
        }
    }
}

TEST_CASE("trace CSV: exact header and 17-digit round-trippable rows") {
    const CellComplex ball = testsup::beach_ball();
    const FlowResult res = flow_interior(
        ball, vec2(fx::L_ball_interior, fx::L_ball_interior), vec2(0.6, 1.7));
    std::ostringstream os;
    write_trace_csv(res.trace, os);
    const std::string csv = os.str();
    CHECK(csv.rfind("t,residual,grad_norm,K_0,K_1,L_0,L_1\n", 0) == 0);
    // one line per row plus the header
    const auto lines = static_cast<std::size_t>(
        std::count(csv.begin(), csv.end(), '\n'));
    CHECK(lines == res.trace.rows.size() + 1);

    // pinned entries print as -inf
    const FlowResult mixed =
        flow_mixed(ball, vec2(0.9 * fx::L_ball_stratum, 0.0), vec2(1.0, 1e-12));
    std::ostringstream os2;
    write_trace_csv(mixed.trace, os2);
    CHECK(os2.str().find("-inf") != std::string::npos);
}
