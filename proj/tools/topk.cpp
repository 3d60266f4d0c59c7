#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "topk/cli.hpp"

namespace {

std::optional<topk::SolverKind> parse_solver(const std::string& name) {
    try {
        return topk::solver_from_string(name);
    } catch (const topk::InvalidParameter&) {
        return std::nullopt;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Top-k arm identification: optimal allocations, optimality checks and simulations"};
    app.require_subcommand(1);

    topk::SolveOptions solve;
    std::string solver_name = "fwga";
    double tau_scale = 0.0;
    auto* s = app.add_subcommand("solve", "Compute the optimal allocation of an instance");
    s->add_option("--instance", solve.instance_path, "Instance JSON file")->required();
    s->add_option("--solver", solver_name, "fwga | kkt | grid")->capture_default_str();
    s->add_option("--iters", solve.solver.iters, "Solver iterations")->capture_default_str();
    auto* s_tau = s->add_option("--tau-scale", tau_scale, "FWGA step-size scale");
    s->add_option("--grid-step", solve.solver.grid_step, "Lattice step of the grid oracle")->capture_default_str();
    s->add_option("--eq-tol", solve.equality_tol, "Relative tolerance for the equality graph")->capture_default_str();
    s->add_option("--out", solve.out_path, "Write {psi, mu} JSON here");

    topk::CheckOptions check;
    auto* c = app.add_subcommand("check", "Check optimality conditions of an allocation");
    c->add_option("--instance", check.instance_path, "Instance JSON file")->required();
    c->add_option("--allocation", check.allocation_path, "Allocation JSON file {psi, mu?}")->required();
    c->add_option("--eq-tol", check.equality_tol, "Relative tolerance for the equality graph")->capture_default_str();

    topk::SimulateOptions sim;
    std::uint64_t seed = 0;
    std::size_t reps = 0, threads = 0, stride = 0, iters = 0;
    double sim_tau = 0.0;
    auto* m = app.add_subcommand("simulate", "Run the experiment described by a config file");
    m->add_option("--config", sim.config_path, "Experiment config JSON")->required();
    auto* m_seed = m->add_option("--seed", seed, "Master seed");
    auto* m_reps = m->add_option("--reps", reps, "Replications")->check(CLI::PositiveNumber);
    auto* m_threads = m->add_option("--threads", threads, "Worker threads (else PURE_EXPLORE_THREADS)");
    auto* m_stride = m->add_option("--stride", stride, "Trace stride");
    auto* m_iters = m->add_option("--iters", iters, "Single solver iteration count for convergence runs");
    auto* m_tau = m->add_option("--tau-scale", sim_tau, "FWGA step-size scale");
    m->add_option("--out", sim.out_path, "Output CSV path");

    topk::ReportOptions report;
    auto* r = app.add_subcommand("report", "Summarize result files and write plot series");
    r->add_option("inputs", report.inputs, "Result CSV files");
    r->add_option("--out", report.out_dir, "Directory for series files")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : topk::kExitInput;
    }

    if (s->parsed()) {
        const auto kind = parse_solver(solver_name);
        if (!kind) {
            std::cerr << "error: unknown solver '" << solver_name << "'\n";
            return topk::kExitInput;
        }
        solve.solver.kind = *kind;
        if (s_tau->count()) solve.solver.tau_scale = tau_scale;
        return topk::cmd_solve(solve, std::cout, std::cerr);
    }
    if (c->parsed()) return topk::cmd_check(check, std::cout, std::cerr);
    if (m->parsed()) {
        if (m_seed->count()) sim.seed = seed;
        if (m_reps->count()) sim.reps = reps;
        if (m_threads->count()) sim.threads = threads;
        if (m_stride->count()) sim.stride = stride;
        if (m_iters->count()) sim.iters = iters;
        if (m_tau->count()) sim.tau_scale = sim_tau;
        return topk::cmd_simulate(sim, std::cout, std::cerr);
    }
    return topk::cmd_report(report, std::cout, std::cerr);
}
