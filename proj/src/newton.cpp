#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "sphereflow/errors.hpp"
#include "sphereflow/flow.hpp"

namespace sphereflow {

NewtonResult newton_solve(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                          const FlowOptions& opts, const Eigen::VectorXd* K0_active) {
    opts.validate();
    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind != TargetClass::Kind::Interior && cls.kind != TargetClass::Kind::Stratum)
        throw DomainError(std::string("newton: target classifies as ") +
                          kind_name(cls.kind) + ", need interior or stratum");

    const std::vector<int>& active = cls.support; // Interior: every face
    const Eigen::Index m = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd y;
    if (K0_active) {
        if (K0_active->size() != m)
            throw DomainError("newton: K0 must match the target support size");
        y = *K0_active;
    } else {
        y = Eigen::VectorXd::Zero(m); // all active circles at k = 1
    }

    NewtonResult out;
    out.trace.tracked_faces = active;

    constexpr int kMaxIterations = 200;
    constexpr int kMaxHalvings = 40;

    for (int iter = 0;; ++iter) {
        const CurvatureState state = CurvatureState::from_active_log(cx, active, y);
        const Eigen::VectorXd L = total_curvature(state);
        Eigen::VectorXd g(m); // residual over the active faces
        for (Eigen::Index i = 0; i < m; ++i)
            g[i] = L[active[static_cast<std::size_t>(i)]] -
                   L_hat[active[static_cast<std::size_t>(i)]];
        const double residual = (L - L_hat).cwiseAbs().maxCoeff();

        TraceRow row;
        row.t = static_cast<double>(iter);
        row.K = y;
        row.L = L;
        row.residual = residual;
        row.grad_norm = g.norm();
        out.trace.rows.push_back(std::move(row));

        if (residual <= opts.residual_tol) {
            out.k_final = state.k();
            out.iterations = iter;
            out.residual = residual;
            return out;
        }
        if (iter >= kMaxIterations)
            throw SolveError("newton: no convergence within 200 iterations");

        const Eigen::MatrixXd M = jacobian(state);
        const Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() != Eigen::Success)
            throw SolveError("newton: jacobian is not positive definite");
        const Eigen::VectorXd step = llt.solve(g);

        // Backtracking on the 2-norm of the residual: halve until it drops.
        const double base = g.squaredNorm();
        double lambda = 1.0;
        bool improved = false;
        for (int bt = 0; bt < kMaxHalvings; ++bt, lambda *= 0.5) {
            const Eigen::VectorXd y_try = y - lambda * step;
            const Eigen::VectorXd L_try =
                total_curvature(CurvatureState::from_active_log(cx, active, y_try));
            double val = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double gi = L_try[active[static_cast<std::size_t>(i)]] -
                                  L_hat[active[static_cast<std::size_t>(i)]];
                val += gi * gi;
            }
            if (val < base) {
                y = y_try;
                improved = true;
                break;
            }
        }
        if (!improved)
            throw SolveError("newton: line search failed to reduce the residual");
    }
}

} // namespace sphereflow
