#include "sphereflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sphereflow/errors.hpp"
#include "sphereflow/format.hpp"

namespace sphereflow {

void FlowOptions::validate() const {
    const bool positive = dt_init > 0 && dt_max > 0 && rtol > 0 && atol > 0 &&
                          residual_tol > 0 && pin_threshold > 0 && t_max > 0 &&
                          tail_step_fraction > 0 && t_max_mixed > 0;
    if (!positive || trace_stride < 1)
        throw DomainError("flow options: all tolerances/steps must be positive");
    if (!(residual_tol < pin_threshold && pin_threshold < 1.0))
        throw DomainError("flow options: need residual_tol < pin_threshold < 1");
}

namespace {

// A trajectory whose K climbs past this is running off to +infinity; only
// infeasible targets can do that, so the diagnostic integrator reports it
// instead of integrating forever.
constexpr double kDivergenceK = 40.0;

// Dormand-Prince 4(5) tableau (the dopri5 pair; first-same-as-last).
constexpr double A21 = 1.0 / 5.0;
constexpr double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0;
constexpr double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0;
constexpr double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0,
                 A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0;
constexpr double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0,
                 A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0;
constexpr double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0,
                 B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights (error estimator).
constexpr double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0,
                 E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0;

struct FlowField {
    const CellComplex* cx;
    const Eigen::VectorXd* L_hat;
    std::vector<int> active; // evolving faces, ascending
    std::vector<double> bound;
    long evals = 0;
    long violations = 0;

    // dK_f/dt = -(L_f - L_hat_f) over the active faces.  Also exports the
    // full per-face L, which the stepper reuses for residual and traces.
    Eigen::VectorXd eval(const Eigen::VectorXd& y, Eigen::VectorXd& L_out) {
        const CurvatureState s = CurvatureState::from_active_log(*cx, active, y);
        L_out = total_curvature(s);
        Eigen::VectorXd dy(y.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const int f = active[static_cast<std::size_t>(i)];
            dy[i] = -(L_out[f] - (*L_hat)[f]);
            if (std::abs(dy[i]) > bound[static_cast<std::size_t>(f)] + 1e-12)
                ++violations;
        }
        ++evals;
        return dy;
    }
};

double residual_inf(const Eigen::VectorXd& L, const Eigen::VectorXd& L_hat) {
    return (L - L_hat).cwiseAbs().maxCoeff();
}

} // namespace

FlowResult run_prescribed_flow(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                               const std::vector<int>& ode_faces,
                               const Eigen::VectorXd& k0_full, const FlowOptions& opts,
                               bool pin_decaying) {
    opts.validate();
    if (L_hat.size() != cx.num_faces() || k0_full.size() != cx.num_faces())
        throw DomainError("flow: target/start vectors must have num_faces entries");
    for (int f = 0; f < cx.num_faces(); ++f)
        if (!std::isfinite(L_hat[f]) || L_hat[f] < 0.0)
            throw DomainError("flow: target entries must be finite and >= 0");

    std::vector<char> is_ode(static_cast<std::size_t>(cx.num_faces()), 0);
    for (int f : ode_faces) {
        if (f < 0 || f >= cx.num_faces())
            throw DomainError("flow: evolving face id out of range");
        if (is_ode[static_cast<std::size_t>(f)])
            throw DomainError("flow: duplicate evolving face id");
        is_ode[static_cast<std::size_t>(f)] = 1;
    }
    if (ode_faces.empty())
        throw DomainError("flow: nothing to evolve");
    for (int f = 0; f < cx.num_faces(); ++f) {
        const bool ode = is_ode[static_cast<std::size_t>(f)] != 0;
        if (ode && !(k0_full[f] > 0.0 && std::isfinite(k0_full[f])))
            throw DomainError("flow: evolving faces need k0 > 0");
        if (!ode && k0_full[f] != 0.0)
            throw DomainError("flow: non-evolving faces must start at k = 0");
    }

    FlowField field;
    field.cx = &cx;
    field.L_hat = &L_hat;
    field.active = ode_faces;
    std::sort(field.active.begin(), field.active.end());
    field.bound.resize(static_cast<std::size_t>(cx.num_faces()));
    for (int f = 0; f < cx.num_faces(); ++f)
        field.bound[static_cast<std::size_t>(f)] =
            2.0 * cx.incident_weight(f) + 2.0 * cx.total_weight();

    const double budget = pin_decaying ? opts.t_max_mixed : opts.t_max;
    const double log_pin = std::log(opts.pin_threshold);

    FlowResult out;
    out.trace.tracked_faces = field.active;

    Eigen::VectorXd y(static_cast<Eigen::Index>(field.active.size()));
    for (std::size_t i = 0; i < field.active.size(); ++i)
        y[static_cast<Eigen::Index>(i)] = std::log(k0_full[field.active[i]]);

    // Freeze any face already below the pin threshold before the first step.
    const auto pin_pass = [&]() -> bool {
        if (!pin_decaying) return false;
        std::vector<int> keep_active;
        std::vector<double> keep_y;
        for (std::size_t i = 0; i < field.active.size(); ++i) {
            const int f = field.active[i];
            const double K = y[static_cast<Eigen::Index>(i)];
            if (L_hat[f] == 0.0 && K < log_pin) continue; // pin: drop from the system
            keep_active.push_back(f);
            keep_y.push_back(K);
        }
        if (keep_active.size() == field.active.size()) return false;
        field.active = std::move(keep_active);
        y = Eigen::Map<Eigen::VectorXd>(keep_y.data(),
                                        static_cast<Eigen::Index>(keep_y.size()));
        return true;
    };
    pin_pass();

    const auto decaying_left = [&]() -> long {
        if (!pin_decaying) return 0;
        long n = 0;
        for (int f : field.active)
            if (L_hat[f] == 0.0) ++n;
        return n;
    };

    const auto record = [&](double t, const Eigen::VectorXd& L, double residual,
                            double grad_norm) {
        TraceRow row;
        row.t = t;
        row.K.resize(static_cast<Eigen::Index>(out.trace.tracked_faces.size()));
        std::size_t at = 0;
        for (std::size_t i = 0; i < out.trace.tracked_faces.size(); ++i) {
            const int f = out.trace.tracked_faces[i];
            if (at < field.active.size() && field.active[at] == f)
                row.K[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(at++)];
            else
                row.K[static_cast<Eigen::Index>(i)] =
                    -std::numeric_limits<double>::infinity();
        }
        row.L = L;
        row.residual = residual;
        row.grad_norm = grad_norm;
        out.trace.rows.push_back(std::move(row));
    };

    Eigen::VectorXd L;
    Eigen::VectorXd f1 = field.eval(y, L); // FSAL slot
    double t = 0.0;
    double residual = residual_inf(L, L_hat);
    record(0.0, L, residual, f1.norm());

    double h = opts.dt_init;
    double err_prev = 1.0;
    const auto finish = [&](FlowStatus status) {
        out.status = status;
        out.t_final = t;
        out.residual_final = residual;
        out.k_final = Eigen::VectorXd::Zero(cx.num_faces());
        for (std::size_t i = 0; i < field.active.size(); ++i)
            out.k_final[field.active[i]] = std::exp(y[static_cast<Eigen::Index>(i)]);
        if (out.trace.rows.back().t != t)
            record(t, L, residual, f1.norm());
        out.field_evals = field.evals;
        out.field_bound_violations = field.violations;
        return out;
    };

    if (residual <= opts.residual_tol && decaying_left() == 0)
        return finish(FlowStatus::Converged);

    // The decaying faces of the mixed flow approach k = 0 like 1/t, so the
    // pin threshold is only reached around t ~ 1/pin_threshold.  Long before
    // that the already-converged faces make the system stiff: an explicit
    // pair is stability-limited to h ~ 1/||dL/dK|| no matter how large the
    // tail cap is, and can never cover that horizon.  When the accepted step
    // stalls far below the cap, the trajectory is handed to an L-stable
    // linearly-implicit 2(3) pair (W = I + h*d*dL/dK, d = 1/(2+sqrt 2)) whose
    // steps are free to grow with t.  The equilibrium is untouched by the
    // hand-off: convergence is declared on the residual, not on the path.
    constexpr double kRosD = 0.29289321881345248;  // 1/(2+sqrt 2)
    constexpr double kRosE32 = 7.4142135623730951; // 6+sqrt 2
    constexpr int kStallSteps = 20;

    bool use_ros = false;
    bool jac_dirty = true;
    int stall = 0;
    Eigen::MatrixXd M;
    Eigen::LLT<Eigen::MatrixXd> ros_w;
    Eigen::VectorXd k2, k3, k4, k5, k6, k7, y5, Lnew, Ltmp, err_vec;
    while (true) {
        double cap = opts.dt_max;
        if (pin_decaying) cap = std::max(cap, opts.tail_step_fraction * t);
        h = std::min(h, cap);
        if (h < 1e-12 * std::max(1.0, t))
            throw SolveError("flow: step size underflow");
        bool last_possible = false;
        if (t + h >= budget) {
            h = budget - t;
            last_possible = true;
            if (h <= 0.0) return finish(FlowStatus::BudgetExceeded);
        }

        if (!use_ros) {
            k2 = field.eval(y + h * (A21 * f1), Lnew);
            k3 = field.eval(y + h * (A31 * f1 + A32 * k2), Lnew);
            k4 = field.eval(y + h * (A41 * f1 + A42 * k2 + A43 * k3), Lnew);
            k5 = field.eval(y + h * (A51 * f1 + A52 * k2 + A53 * k3 + A54 * k4), Lnew);
            k6 = field.eval(
                y + h * (A61 * f1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), Lnew);
            y5 = y + h * (B1 * f1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            k7 = field.eval(y5, Lnew); // FSAL: the derivative at the new point
            err_vec = h * (E1 * f1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        } else {
            if (jac_dirty) {
                M = jacobian(CurvatureState::from_active_log(cx, field.active, y));
                jac_dirty = false;
            }
            Eigen::MatrixXd W = (h * kRosD) * M;
            W.diagonal().array() += 1.0;
            ros_w.compute(W);
            if (ros_w.info() != Eigen::Success) { // cannot happen for SPD W; be safe
                ++out.steps_rejected;
                h *= 0.5;
                continue;
            }
            k2 = ros_w.solve(f1);                         // stage 1
            k4 = field.eval(y + (0.5 * h) * k2, Ltmp);    // F at the midpoint
            k3 = ros_w.solve(k4 - k2) + k2;               // stage 2
            y5 = y + h * k3;
            k7 = field.eval(y5, Lnew);                    // F at the new point
            k5 = ros_w.solve(k7 - kRosE32 * (k3 - k4) - 2.0 * (k2 - f1)); // stage 3
            err_vec = (h / 6.0) * (k2 - 2.0 * k3 + k5);
        }

        double err = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc =
                opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            const double q = err_vec[i] / sc;
            err += q * q;
        }
        err = std::sqrt(err / static_cast<double>(std::max<Eigen::Index>(y.size(), 1)));

        if (err > 1.0) {
            ++out.steps_rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, use_ros ? -1.0 / 3.0 : -0.2));
            continue;
        }

        const double h_used = h;
        t += h;
        y.swap(y5);
        f1.swap(k7);
        L.swap(Lnew);
        ++out.steps_accepted;
        jac_dirty = true;

        if (pin_pass()) {
            // Dimensions changed and the frozen faces now contribute exactly
            // zero curvature; restart the FSAL derivative from scratch.
            f1 = field.eval(y, L);
        }

        residual = residual_inf(L, L_hat);

        if (out.steps_accepted % opts.trace_stride == 0)
            record(t, L, residual, f1.norm());

        if (residual <= opts.residual_tol && decaying_left() == 0)
            return finish(FlowStatus::Converged);
        if (y.size() > 0 && y.maxCoeff() > kDivergenceK)
            return finish(FlowStatus::Diverged);
        if (last_possible || t >= budget)
            return finish(FlowStatus::BudgetExceeded);

        if (!use_ros) {
            // PI step-size controller (deadbeat exponent 0.17 softened by the
            // previous error, Hairer-style), clamped to [0.2, 5] per step.
            const double e = std::max(err, 1e-10);
            const double fac = std::clamp(
                0.9 * std::pow(e, -0.17) * std::pow(err_prev, 0.04), 0.2, 5.0);
            h *= fac;
            err_prev = e;

            // Hand off to the L-stable pair when the step is being throttled
            // by stability rather than by the cap, which shows up two ways:
            // (a) the mixed flow's decaying tail, where the cap grows with t
            // but the accepted step cannot follow it, and (b) the endgame of
            // any flow, where the fastest mode rides the explicit stability
            // boundary and hovers at the tolerance floor (error-controlled h
            // strictly below the cap) instead of contracting to residual_tol.
            const bool tail_stall =
                pin_decaying && decaying_left() > 0 && h_used <= 0.02 * t;
            const bool endgame_stall = residual <= 1e-5 && h_used < 0.999 * cap;
            if (t >= 10.0 && (tail_stall || endgame_stall)) {
                if (++stall >= kStallSteps) use_ros = true;
            } else {
                stall = 0;
            }
        } else {
            const double e = std::max(err, 1e-10);
            h *= std::clamp(0.9 * std::pow(e, -1.0 / 3.0), 0.2, 5.0);
        }
    }
}

namespace {

FlowResult check_flow_outcome(FlowResult&& r) {
    switch (r.status) {
        case FlowStatus::Converged:
            return std::move(r);
        case FlowStatus::BudgetExceeded:
            throw SolveError("flow: time budget exhausted before convergence");
        case FlowStatus::Diverged:
            throw SolveError("flow: trajectory diverged (target not feasible?)");
    }
    return std::move(r);
}

} // namespace

FlowResult flow_interior(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                         const Eigen::VectorXd& k0, const FlowOptions& opts) {
    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind != TargetClass::Kind::Interior)
        throw DomainError(std::string("flow_interior: target classifies as ") +
                          kind_name(cls.kind) + ", need interior");
    std::vector<int> all(static_cast<std::size_t>(cx.num_faces()));
    for (int f = 0; f < cx.num_faces(); ++f) all[static_cast<std::size_t>(f)] = f;
    return check_flow_outcome(run_prescribed_flow(cx, L_hat, all, k0, opts, false));
}

FlowResult flow_reduced(const CellComplex& cx, const std::vector<int>& support,
                        const Eigen::VectorXd& L_hat_support,
                        const Eigen::VectorXd& k0_support, const FlowOptions& opts) {
    if (support.empty())
        throw DomainError("flow_reduced: empty support (zero target has nothing to flow)");
    if (static_cast<int>(support.size()) == cx.num_faces())
        throw DomainError("flow_reduced: support is every face; use flow_interior");
    if (L_hat_support.size() != static_cast<Eigen::Index>(support.size()) ||
        k0_support.size() != static_cast<Eigen::Index>(support.size()))
        throw DomainError("flow_reduced: support/target/start sizes differ");

    Eigen::VectorXd L_hat = Eigen::VectorXd::Zero(cx.num_faces());
    Eigen::VectorXd k0 = Eigen::VectorXd::Zero(cx.num_faces());
    for (std::size_t i = 0; i < support.size(); ++i) {
        const int f = support[i];
        if (f < 0 || f >= cx.num_faces())
            throw DomainError("flow_reduced: support face id out of range");
        if (!(L_hat_support[static_cast<Eigen::Index>(i)] > 0.0))
            throw DomainError("flow_reduced: support target entries must be positive");
        L_hat[f] = L_hat_support[static_cast<Eigen::Index>(i)];
        k0[f] = k0_support[static_cast<Eigen::Index>(i)];
    }

    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind != TargetClass::Kind::Stratum)
        throw DomainError(std::string("flow_reduced: target classifies as ") +
                          kind_name(cls.kind) + ", need stratum");
    return check_flow_outcome(run_prescribed_flow(cx, L_hat, cls.support, k0, opts, false));
}

FlowResult flow_mixed(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                      const Eigen::VectorXd& k0, const FlowOptions& opts) {
    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind != TargetClass::Kind::Stratum && cls.kind != TargetClass::Kind::Interior)
        throw DomainError(std::string("flow_mixed: target classifies as ") +
                          kind_name(cls.kind) + ", need stratum or interior");
    std::vector<int> all(static_cast<std::size_t>(cx.num_faces()));
    for (int f = 0; f < cx.num_faces(); ++f) all[static_cast<std::size_t>(f)] = f;
    return check_flow_outcome(run_prescribed_flow(cx, L_hat, all, k0, opts, true));
}

std::vector<GradientBoundRow> gradient_bound_check(const CellComplex& cx,
                                                   const Eigen::VectorXd& L_hat,
                                                   const FlowTrace& trace,
                                                   const Eigen::VectorXd& K_star,
                                                   const Eigen::VectorXd& K0) {
    const auto& active = trace.tracked_faces;
    if (K_star.size() != static_cast<Eigen::Index>(active.size()) ||
        K0.size() != static_cast<Eigen::Index>(active.size()))
        throw DomainError("gradient_bound_check: K vectors must match tracked faces");

    const CurvatureState star = CurvatureState::from_active_log(cx, active, K_star);
    const Eigen::VectorXd L_star = total_curvature(star);
    double grad_star_sq = 0.0;
    for (int f : active) {
        const double g = L_star[f] - L_hat[f];
        grad_star_sq += g * g;
    }
    const double dist_sq = (K_star - K0).squaredNorm();

    std::vector<GradientBoundRow> rows;
    for (const TraceRow& row : trace.rows) {
        if (!(row.t > 0.0)) continue;
        GradientBoundRow r;
        r.t = row.t;
        r.lhs = row.grad_norm * row.grad_norm;
        r.rhs = grad_star_sq + dist_sq / (row.t * row.t);
        r.ok = r.lhs <= r.rhs + 1e-9;
        rows.push_back(r);
    }
    return rows;
}

void write_trace_csv(const FlowTrace& trace, std::ostream& os) {
    os << "t,residual,grad_norm";
    for (std::size_t i = 0; i < trace.tracked_faces.size(); ++i) os << ",K_" << i;
    const Eigen::Index nf = trace.rows.empty() ? 0 : trace.rows.front().L.size();
    for (Eigen::Index f = 0; f < nf; ++f) os << ",L_" << f;
    os << "\n";
    for (const TraceRow& row : trace.rows) {
        os << format_double(row.t) << ',' << format_double(row.residual) << ','
           << format_double(row.grad_norm);
        for (Eigen::Index i = 0; i < row.K.size(); ++i)
            os << ',' << format_double(row.K[i]);
        for (Eigen::Index f = 0; f < row.L.size(); ++f)
            os << ',' << format_double(row.L[f]);
        os << "\n";
    }
}

} // namespace sphereflow
