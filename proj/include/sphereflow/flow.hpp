#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "sphereflow/cell_complex.hpp"
#include "sphereflow/curvature.hpp"
#include "sphereflow/feasibility.hpp"

namespace sphereflow {

// Knobs shared by the flows and the Newton solver.  validate() rejects
// nonsense (everything must be positive, residual_tol < pin_threshold < 1).
struct FlowOptions {
    double dt_init = 0.05;       // first attempted step
    double dt_max = 1.0;         // hard step cap (interior/reduced)
    double rtol = 1e-8;          // embedded-pair relative tolerance
    double atol = 1e-10;         // and absolute tolerance
    double residual_tol = 1e-10; // convergence: max_f |L_f - L_hat_f|
    double pin_threshold = 1e-9; // mixed flow: freeze a face once k drops here
    double t_max = 1e6;          // time budget (interior/reduced)
    int trace_stride = 10;       // record every N-th accepted step

    // The mixed flow's off-support curvatures decay like 1/t, so reaching
    // pin_threshold takes t ~ 1/pin_threshold: far past t_max, and hopeless
    // at unit-size steps.  On that tail the step cap grows proportionally to
    // t, and because the converged faces make the system stiff, the stepper
    // hands the trajectory to an L-stable linearly-implicit pair once the
    // explicit step stalls below the cap (see run_prescribed_flow).  The
    // budget leaves headroom for weakly coupled faces, whose 1/t decay
    // constant can be small.  Only flow_mixed reads these two.
    double tail_step_fraction = 0.05;
    double t_max_mixed = 1e12;

    void validate() const;
};

enum class FlowStatus { Converged, BudgetExceeded, Diverged };

// One recorded point of a trajectory.  K runs over the tracked faces (the
// faces that were evolving when the flow started); an entry is -inf from the
// moment its face is pinned.  L is the full per-face total curvature.
struct TraceRow {
    double t;
    Eigen::VectorXd K;
    Eigen::VectorXd L;
    double residual;  // max over all faces of |L_f - L_hat_f|
    double grad_norm; // 2-norm of dK/dt over the currently evolving faces
};

struct FlowTrace {
    std::vector<int> tracked_faces; // column order of TraceRow::K
    std::vector<TraceRow> rows;     // t strictly increasing, row 0 at t = 0
};

struct FlowResult {
    FlowStatus status = FlowStatus::Converged;
    Eigen::VectorXd k_final; // full per-face curvatures (0 where pinned)
    FlowTrace trace;
    double t_final = 0.0;
    double residual_final = 0.0;
    long steps_accepted = 0;
    long steps_rejected = 0;
    long field_evals = 0;
    // Evaluations where some |dK_f/dt| exceeded its a-priori bound
    //   2*sum_{e at f} weight + 2*sum_all weight  (+ 1e-12 headroom).
    // Always 0 unless something is broken.
    long field_bound_violations = 0;
};

// The three prescribed-curvature flows, all integrating
//     dK_f/dt = -(L_f(K) - L_hat_f)
// with an embedded Dormand-Prince 4(5) pair and PI step control, stopping
// when the residual drops below residual_tol.  They differ in which faces
// evolve:
//
//  * flow_interior: every face; requires an Interior target.
//  * flow_reduced:  only the support faces, the rest pinned at k = 0 from
//                   the start; requires a Stratum target (support != F).
//  * flow_mixed:    every face starts active with k0 > 0; off-support faces
//                   see L_hat = 0, decay, and are frozen to exactly 0 once
//                   k < pin_threshold.  Accepts Stratum targets (and
//                   Interior ones, where it coincides with flow_interior).
//
// All three throw DomainError when the target's classification does not
// match, and SolveError when the time budget runs out.
FlowResult flow_interior(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                         const Eigen::VectorXd& k0, const FlowOptions& opts = {});
FlowResult flow_reduced(const CellComplex& cx, const std::vector<int>& support,
                        const Eigen::VectorXd& L_hat_support,
                        const Eigen::VectorXd& k0_support, const FlowOptions& opts = {});
FlowResult flow_mixed(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                      const Eigen::VectorXd& k0, const FlowOptions& opts = {});

// Ungated integrator driving the same field: `ode_faces` evolve from
// k0_full, everything else stays pinned, no feasibility check, and instead
// of throwing it reports Diverged (some K climbing past +40) or
// BudgetExceeded in the status.  This is the diagnostic entry point the
// gated flows wrap; it is exposed for tests (e.g. watching an infeasible
// target push K to +infinity).
FlowResult run_prescribed_flow(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                               const std::vector<int>& ode_faces,
                               const Eigen::VectorXd& k0_full, const FlowOptions& opts,
                               bool pin_decaying);

// Damped Newton on the same residual, over the active faces the target's
// classification dictates.  Step = jacobian^{-1} residual via Cholesky, with
// up to 40 halvings per iteration and at most 200 iterations.  K0 (over the
// active faces) defaults to zero, i.e. all circles at k = 1.
struct NewtonResult {
    Eigen::VectorXd k_final; // full per-face curvatures
    int iterations = 0;
    double residual = 0.0;
    // Per-iteration trace in flow-trace form (t = iteration index).
    FlowTrace trace;
};

NewtonResult newton_solve(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                          const FlowOptions& opts = {},
                          const Eigen::VectorXd* K0_active = nullptr);

// Check of the a-priori gradient decay bound along a recorded trajectory
// with finite limit K_star (interior/reduced flows):
//     |grad(t)|^2  <=  |grad(K_star)|^2 + |K_star - K(0)|^2 / t^2.
// One row per recorded t > 0; ok allows 1e-9 absolute headroom.
struct GradientBoundRow {
    double t;
    double lhs, rhs;
    bool ok;
};

std::vector<GradientBoundRow> gradient_bound_check(const CellComplex& cx,
                                                   const Eigen::VectorXd& L_hat,
                                                   const FlowTrace& trace,
                                                   const Eigen::VectorXd& K_star,
                                                   const Eigen::VectorXd& K0);

// CSV trace dump: header t,residual,grad_norm,K_0..K_{m-1},L_0..L_{|F|-1},
// one row per recorded point, 17 significant digits (pinned K prints -inf).
void write_trace_csv(const FlowTrace& trace, std::ostream& os);

} // namespace sphereflow
