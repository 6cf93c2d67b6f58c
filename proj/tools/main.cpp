// Command-line front end: classify curvature targets, solve for circle
// pattern metrics (Newton or prescribed flows), cross-check the two
// degenerate-flow routes, and evaluate single bigons.
//
// Exit codes: 0 success / feasible; 1 bad input; 2 infeasible target;
// 3 support too large for the exhaustive feasibility scan; 4 mixed/reduced
// comparison discrepancy; 5 solver budget exhausted.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sphereflow/bigon.hpp"
#include "sphereflow/cell_complex.hpp"
#include "sphereflow/curvature.hpp"
#include "sphereflow/errors.hpp"
#include "sphereflow/feasibility.hpp"
#include "sphereflow/flow.hpp"
#include "sphereflow/format.hpp"

namespace {

using namespace sphereflow;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Targets come either as a path to a JSON array file or inline ("[1,2,0]").
Eigen::VectorXd load_target(const std::string& spec, int num_faces) {
    std::string text = spec;
    const auto first = spec.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || spec[first] != '[') text = read_file(spec);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("target: invalid JSON: ") + e.what());
    }
    if (!doc.is_array())
        throw ParseError("target: expected a JSON array of numbers");
    if (static_cast<int>(doc.size()) != num_faces)
        throw ParseError("target: need exactly one entry per face (" +
                         std::to_string(num_faces) + ")");
    Eigen::VectorXd L_hat(num_faces);
    for (int i = 0; i < num_faces; ++i) {
        if (!doc[static_cast<std::size_t>(i)].is_number())
            throw ParseError("target: entries must be numbers");
        L_hat[i] = doc[static_cast<std::size_t>(i)].get<double>();
    }
    return L_hat;
}

std::string json_doubles(const Eigen::VectorXd& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
    }
    return s + "]";
}

std::string json_ints(const std::vector<int>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s + "]";
}

std::string json_string(const std::string& s) { return "\"" + s + "\""; }

// Classification report (also what infeasible targets print before exit 2).
// Keys in every report are emitted in sorted order so output is
// byte-comparable across runs.
std::string classification_json(const TargetClass& cls) {
    switch (cls.kind) {
        case TargetClass::Kind::Zero:
            return "{\"class\":\"zero\"}";
        case TargetClass::Kind::Interior:
            return "{\"class\":\"interior\",\"support\":" + json_ints(cls.support) + "}";
        case TargetClass::Kind::Stratum:
            return "{\"class\":\"stratum\",\"support\":" + json_ints(cls.support) + "}";
        case TargetClass::Kind::Infeasible:
            return std::string("{\"boundary_proximal\":") +
                   (cls.boundary_proximal ? "true" : "false") +
                   ",\"class\":\"infeasible\",\"slack\":" + format_double(cls.slack) +
                   ",\"support\":" + json_ints(cls.support) +
                   ",\"witness\":" + json_ints(cls.witness) + "}";
    }
    return "{}";
}

Eigen::VectorXd radii_of(const Eigen::VectorXd& k) {
    Eigen::VectorXd r(k.size());
    for (Eigen::Index i = 0; i < k.size(); ++i) r[i] = radius_from_curvature(k[i]);
    return r;
}

// Starting log-curvatures: zeros without a seed (every circle at k = 1),
// otherwise uniform in (-1, 1) from the seeded generator, so runs with the
// same seed reproduce traces byte for byte.
Eigen::VectorXd starting_log(std::optional<unsigned long long> seed, std::mt19937_64& rng,
                             Eigen::Index n) {
    if (!seed) return Eigen::VectorXd::Zero(n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd K(n);
    for (Eigen::Index i = 0; i < n; ++i) K[i] = u(rng);
    return K;
}

void write_trace_file(const std::string& path, const FlowTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write trace file: " + path);
    write_trace_csv(trace, out);
}

// Single-row trace for the all-great-circles answer to the zero target.
FlowTrace zero_trace(int num_faces) {
    FlowTrace t;
    TraceRow row;
    row.t = 0.0;
    row.K.resize(0);
    row.L = Eigen::VectorXd::Zero(num_faces);
    row.residual = 0.0;
    row.grad_norm = 0.0;
    t.rows.push_back(std::move(row));
    return t;
}

struct CommonArgs {
    std::string complex_path;
    std::string target_spec;
    std::string trace_path;
    double tol = -1.0; // override for residual_tol when >= 0
    std::optional<unsigned long long> seed;
};

FlowOptions make_options(const CommonArgs& args) {
    FlowOptions opts;
    if (args.tol >= 0.0) {
        if (!(args.tol > 0.0))
            throw DomainError("--tol must be positive");
        opts.residual_tol = args.tol;
    }
    return opts;
}

int cmd_check(const CommonArgs& args) {
    const CellComplex cx = CellComplex::parse(read_file(args.complex_path));
    const Eigen::VectorXd L_hat = load_target(args.target_spec, cx.num_faces());
    const TargetClass cls = classify_target(cx, L_hat);
    std::cout << classification_json(cls) << "\n";
    return cls.kind == TargetClass::Kind::Infeasible ? 2 : 0;
}

int cmd_solve(const CommonArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const CellComplex cx = CellComplex::parse(read_file(args.complex_path));
    const Eigen::VectorXd L_hat = load_target(args.target_spec, cx.num_faces());
    const FlowOptions opts = make_options(args);
    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind == TargetClass::Kind::Infeasible) {
        std::cout << classification_json(cls) << "\n";
        return 2;
    }

    Eigen::VectorXd k_final;
    Eigen::VectorXd L_final;
    int iterations = 0;
    double residual = 0.0;
    FlowTrace trace;
    if (cls.kind == TargetClass::Kind::Zero) {
        k_final = Eigen::VectorXd::Zero(cx.num_faces());
        L_final = Eigen::VectorXd::Zero(cx.num_faces());
        trace = zero_trace(cx.num_faces());
    } else {
        std::mt19937_64 rng(args.seed.value_or(0));
        const Eigen::VectorXd K0 =
            starting_log(args.seed, rng, static_cast<Eigen::Index>(cls.support.size()));
        const NewtonResult res = newton_solve(cx, L_hat, opts, &K0);
        k_final = res.k_final;
        L_final = total_curvature(CurvatureState(cx, k_final));
        iterations = res.iterations;
        residual = res.residual;
        trace = res.trace;
    }
    if (!args.trace_path.empty()) write_trace_file(args.trace_path, trace);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "{\"L_final\":" << json_doubles(L_final)
              << ",\"class\":" << json_string(kind_name(cls.kind))
              << ",\"command\":\"solve\",\"iterations\":" << iterations
              << ",\"k_final\":" << json_doubles(k_final)
              << ",\"r_final\":" << json_doubles(radii_of(k_final))
              << ",\"residual\":" << format_double(residual)
              << ",\"seed\":" << (args.seed ? std::to_string(*args.seed) : "null")
              << ",\"support\":" << json_ints(cls.support) << ",\"trace\":"
              << (args.trace_path.empty() ? "null" : json_string(args.trace_path))
              << ",\"wall_time_s\":" << format_double(wall) << "}\n";
    return 0;
}

int cmd_flow(const CommonArgs& args, std::string flow_kind) {
    const auto t0 = std::chrono::steady_clock::now();
    const CellComplex cx = CellComplex::parse(read_file(args.complex_path));
    const Eigen::VectorXd L_hat = load_target(args.target_spec, cx.num_faces());
    const FlowOptions opts = make_options(args);
    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind == TargetClass::Kind::Infeasible) {
        std::cout << classification_json(cls) << "\n";
        return 2;
    }

    std::mt19937_64 rng(args.seed.value_or(0));
    Eigen::VectorXd k_final, L_final;
    FlowTrace trace;
    double t_final = 0.0, residual = 0.0;
    long accepted = 0, rejected = 0, evals = 0;

    if (cls.kind == TargetClass::Kind::Zero) {
        if (flow_kind == "auto") flow_kind = "zero";
        k_final = Eigen::VectorXd::Zero(cx.num_faces());
        L_final = Eigen::VectorXd::Zero(cx.num_faces());
        trace = zero_trace(cx.num_faces());
    } else {
        if (flow_kind == "auto")
            flow_kind = cls.kind == TargetClass::Kind::Interior ? "interior" : "mixed";
        FlowResult res;
        if (flow_kind == "interior") {
            const Eigen::VectorXd K0 = starting_log(args.seed, rng, cx.num_faces());
            res = flow_interior(cx, L_hat, K0.array().exp().matrix(), opts);
        } else if (flow_kind == "mixed") {
            const Eigen::VectorXd K0 = starting_log(args.seed, rng, cx.num_faces());
            res = flow_mixed(cx, L_hat, K0.array().exp().matrix(), opts);
        } else { // reduced
            const Eigen::Index m = static_cast<Eigen::Index>(cls.support.size());
            Eigen::VectorXd L_supp(m);
            for (Eigen::Index i = 0; i < m; ++i)
                L_supp[i] = L_hat[cls.support[static_cast<std::size_t>(i)]];
            const Eigen::VectorXd K0 = starting_log(args.seed, rng, m);
            res = flow_reduced(cx, cls.support, L_supp, K0.array().exp().matrix(), opts);
        }
        k_final = res.k_final;
        L_final = res.trace.rows.back().L;
        trace = res.trace;
        t_final = res.t_final;
        residual = res.residual_final;
        accepted = res.steps_accepted;
        rejected = res.steps_rejected;
        evals = res.field_evals;
    }
    if (!args.trace_path.empty()) write_trace_file(args.trace_path, trace);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "{\"L_final\":" << json_doubles(L_final)
              << ",\"class\":" << json_string(kind_name(cls.kind))
              << ",\"command\":\"flow\",\"field_evals\":" << evals
              << ",\"flow\":" << json_string(flow_kind)
              << ",\"k_final\":" << json_doubles(k_final)
              << ",\"r_final\":" << json_doubles(radii_of(k_final))
              << ",\"residual\":" << format_double(residual)
              << ",\"seed\":" << (args.seed ? std::to_string(*args.seed) : "null")
              << ",\"steps_accepted\":" << accepted << ",\"steps_rejected\":" << rejected
              << ",\"support\":" << json_ints(cls.support)
              << ",\"t_final\":" << format_double(t_final) << ",\"trace\":"
              << (args.trace_path.empty() ? "null" : json_string(args.trace_path))
              << ",\"wall_time_s\":" << format_double(wall) << "}\n";
    return 0;
}

int cmd_compare(const CommonArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const CellComplex cx = CellComplex::parse(read_file(args.complex_path));
    const Eigen::VectorXd L_hat = load_target(args.target_spec, cx.num_faces());
    const FlowOptions opts = make_options(args);
    const TargetClass cls = classify_target(cx, L_hat);
    if (cls.kind == TargetClass::Kind::Infeasible) {
        std::cout << classification_json(cls) << "\n";
        return 2;
    }
    if (cls.kind == TargetClass::Kind::Interior)
        throw DomainError("compare: needs a stratum (or zero) target; the reduced "
                          "flow is undefined when the support is every face");

    Eigen::VectorXd k_mixed, k_reduced;
    FlowTrace trace;
    if (cls.kind == TargetClass::Kind::Zero) {
        k_mixed = Eigen::VectorXd::Zero(cx.num_faces());
        k_reduced = k_mixed;
        trace = zero_trace(cx.num_faces());
    } else {
        std::mt19937_64 rng(args.seed.value_or(0));
        const Eigen::VectorXd K0_mixed = starting_log(args.seed, rng, cx.num_faces());
        const Eigen::Index m = static_cast<Eigen::Index>(cls.support.size());
        const Eigen::VectorXd K0_red = starting_log(args.seed, rng, m);
        Eigen::VectorXd L_supp(m);
        for (Eigen::Index i = 0; i < m; ++i)
            L_supp[i] = L_hat[cls.support[static_cast<std::size_t>(i)]];
        const FlowResult mixed =
            flow_mixed(cx, L_hat, K0_mixed.array().exp().matrix(), opts);
        const FlowResult reduced =
            flow_reduced(cx, cls.support, L_supp, K0_red.array().exp().matrix(), opts);
        k_mixed = mixed.k_final;
        k_reduced = reduced.k_final;
        trace = mixed.trace;
    }
    if (!args.trace_path.empty()) write_trace_file(args.trace_path, trace);

    const double disc = (k_mixed - k_reduced).cwiseAbs().maxCoeff();
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "{\"class\":" << json_string(kind_name(cls.kind))
              << ",\"command\":\"compare\",\"k_mixed\":" << json_doubles(k_mixed)
              << ",\"k_reduced\":" << json_doubles(k_reduced)
              << ",\"max_discrepancy\":" << format_double(disc)
              << ",\"seed\":" << (args.seed ? std::to_string(*args.seed) : "null")
              << ",\"support\":" << json_ints(cls.support) << ",\"trace\":"
              << (args.trace_path.empty() ? "null" : json_string(args.trace_path))
              << ",\"wall_time_s\":" << format_double(wall) << "}\n";
    return disc > 1e-6 ? 4 : 0;
}

int cmd_bigon(double r1, double r2, double phi) {
    const BigonGeometry g = bigon(r1, r2, phi);
    std::cout << "{\"L1\":" << format_double(g.L1) << ",\"L2\":" << format_double(g.L2)
              << ",\"alpha1\":" << format_double(g.alpha1)
              << ",\"alpha2\":" << format_double(g.alpha2)
              << ",\"area\":" << format_double(g.area)
              << ",\"center_distance\":" << format_double(g.d)
              << ",\"command\":\"bigon\",\"ell1\":" << format_double(g.ell1)
              << ",\"ell2\":" << format_double(g.ell2)
              << ",\"phi\":" << format_double(g.phi) << ",\"r1\":" << format_double(g.r1)
              << ",\"r2\":" << format_double(g.r2) << "}\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"circle pattern metrics on the 2-sphere: classify prescribed "
                 "total-curvature targets and compute the patterns realizing them"};
    app.require_subcommand(1);

    CommonArgs args;
    unsigned long long seed_value = 0;

    const auto add_common = [&](CLI::App* sub, bool solver) {
        sub->add_option("--complex", args.complex_path, "complex JSON file")->required();
        sub->add_option("--target", args.target_spec,
                        "target vector: JSON array file or inline \"[...]\"")
            ->required();
        if (solver) {
            sub->add_option("--trace", args.trace_path, "write a CSV trace here");
            sub->add_option("--tol", args.tol, "residual tolerance override");
            // The bound variable enforces integer syntax; the value itself is
            // taken from the each-callback's string because CLI11 runs these
            // callbacks before it assigns bound variables.
            sub->add_option("--seed", seed_value, "randomize the start (reproducibly)")
                ->each([&](const std::string& s) { args.seed = std::stoull(s); });
        }
    };

    CLI::App* check = app.add_subcommand("check", "classify a target");
    add_common(check, false);

    CLI::App* solve = app.add_subcommand("solve", "Newton solve for a target");
    add_common(solve, true);

    CLI::App* flow = app.add_subcommand("flow", "integrate a prescribed flow");
    add_common(flow, true);
    std::string flow_kind = "auto";
    flow->add_option("--flow", flow_kind, "interior, mixed, or reduced")
        ->check(CLI::IsMember({"interior", "mixed", "reduced", "auto"}));

    CLI::App* compare = app.add_subcommand("compare", "mixed vs reduced cross-check");
    add_common(compare, true);

    CLI::App* bigon_cmd = app.add_subcommand("bigon", "evaluate one bigon");
    double r1 = 0, r2 = 0, phi = 0;
    bigon_cmd->add_option("r1", r1, "first radius (0, pi/2]")->required();
    bigon_cmd->add_option("r2", r2, "second radius (0, pi/2]")->required();
    bigon_cmd->add_option("phi", phi, "intersection angle (0, pi/2)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(check)) return cmd_check(args);
        if (app.got_subcommand(solve)) return cmd_solve(args);
        if (app.got_subcommand(flow)) return cmd_flow(args, flow_kind);
        if (app.got_subcommand(compare)) return cmd_compare(args);
        if (app.got_subcommand(bigon_cmd)) return cmd_bigon(r1, r2, phi);
    } catch (const SupportTooLargeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SolveError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
