#pragma once

// Replication harness: fixed confidence, fixed budget, posterior level and
// allocation convergence. Replications run in parallel on independent rng
// streams and are merged in replication order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "allocation.hpp"
#include "bandit_state.hpp"
#include "errors.hpp"
#include "expfam.hpp"
#include "policies.hpp"
#include "posterior_probability.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "stopping.hpp"

namespace topk {

// ---------------------------------------------------------------------------
// Parallel execution
// ---------------------------------------------------------------------------

// Explicit request, else PURE_EXPLORE_THREADS, else the hardware count.
inline std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("PURE_EXPLORE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs body(index) for index in [0, n) on up to `threads` workers. The first
// exception is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(n);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

// Environment and policy randomness come from separate streams of one
// replication seed.
struct ReplicationStreams {
    std::uint64_t seed = 0;
    Rng env;
    Rng policy;

    static ReplicationStreams make(std::uint64_t master, std::uint64_t slot, std::uint64_t rep) {
        const std::uint64_t seed = derive_seed(master, slot, rep);
        return {seed, make_stream(seed, 0, 0), make_stream(seed, 1, 0)};
    }
};

inline void pull(BanditState& state, const InstanceSpec& inst, std::size_t arm, Rng& env) {
    state.observe(arm, sample_reward(inst.family, arm, inst.theta[arm], env));
}

inline void initialize(BanditState& state, const InstanceSpec& inst, std::size_t pulls, Rng& env) {
    for (std::size_t r = 0; r < pulls; ++r) {
        for (std::size_t a = 0; a < inst.arms(); ++a) pull(state, inst, a, env);
    }
}

// Fills parameters that depend on the instance or budget.
inline PolicyParams resolve_params(PolicyParams p, const InstanceSpec& inst, std::size_t budget = 0) {
    if (budget > 0 && (p.kind == PolicyKind::Sar || p.kind == PolicyKind::UGapEBudget)) p.budget = budget;
    if (p.kind == PolicyKind::UGapEBudget && !(p.ugape_H > 0.0)) p.ugape_H = gaps_and_H(inst).H;
    return p;
}

struct ConfidenceOutcome {
    std::size_t tau = 0;
    bool correct = false;
    bool capped = false;
    std::uint64_t seed = 0;
};

inline ConfidenceOutcome run_confidence_once(const InstanceSpec& inst, const PolicyParams& params,
                                             const StoppingConfig& stopping, ReplicationStreams streams,
                                             std::size_t cap = kDefaultRoundCap, ConjugatePrior prior = {}) {
    const auto p = resolve_params(params, inst);
    auto policy = make_policy(p, inst.arms(), inst.k);
    BanditState state = BanditState::make(inst.family, inst.arms(), prior);
    initialize(state, inst, policy->init_pulls(), streams.env);
    const bool own = has_own_stopping(p.kind);
    ConfidenceOutcome out;
    out.seed = streams.seed;
    bool stopped = !own && should_stop(state, inst.k, stopping);
    while (!stopped && state.t < cap) {
        const auto step = policy->step(state, streams.policy);
        if (step.stop) {
            stopped = true;
            break;
        }
        if (step.arms.empty()) throw StateError("policy returned no arm");
        for (auto arm : step.arms) {
            pull(state, inst, arm, streams.env);
            if (!own && should_stop(state, inst.k, stopping)) {
                stopped = true;
                break;
            }
            if (state.t >= cap) break;
        }
    }
    out.tau = state.t;
    out.capped = !stopped;
    out.correct = !out.capped && policy->recommend(state) == inst.top;
    return out;
}

struct BudgetOutcome {
    std::vector<bool> error;                        // per budget
    std::vector<std::vector<std::size_t>> counts;  // per budget, T at the checkpoint
};

inline bool budget_dependent(PolicyKind kind) { return kind == PolicyKind::Sar || kind == PolicyKind::UGapEBudget; }

// Runs once up to the last budget and records the recommendation at every
// checkpoint. Budgets must be increasing.
inline BudgetOutcome run_budget_once(const InstanceSpec& inst, const PolicyParams& params,
                                     const std::vector<std::size_t>& budgets, ReplicationStreams streams,
                                     ConjugatePrior prior = {}) {
    if (budgets.empty()) throw InvalidParameter("no budgets");
    const auto p = resolve_params(params, inst, budgets.back());
    auto policy = make_policy(p, inst.arms(), inst.k);
    BanditState state = BanditState::make(inst.family, inst.arms(), prior);
    if (policy->init_pulls() * inst.arms() > budgets.front()) {
        throw InvalidParameter("budget smaller than the initialization phase");
    }
    initialize(state, inst, policy->init_pulls(), streams.env);
    BudgetOutcome out;
    std::size_t next = 0;
    auto record = [&] {
        out.error.push_back(policy->recommend(state) != inst.top);
        out.counts.push_back(state.counts);
        ++next;
    };
    while (next < budgets.size() && state.t == budgets[next]) record();
    while (next < budgets.size()) {
        const auto step = policy->step(state, streams.policy);
        if (step.stop || step.arms.empty()) break;
        for (auto arm : step.arms) {
            pull(state, inst, arm, streams.env);
            while (next < budgets.size() && state.t == budgets[next]) record();
            if (next == budgets.size()) break;
        }
    }
    while (next < budgets.size()) record();  // policy finished early
    return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration and records
// ---------------------------------------------------------------------------

enum class Setting { FixedConfidence, FixedBudget, PosteriorLevel, AllocationConvergence };

inline std::string_view to_string(Setting s) {
    switch (s) {
        case Setting::FixedConfidence: return "fixed_confidence";
        case Setting::FixedBudget: return "fixed_budget";
        case Setting::PosteriorLevel: return "posterior_level";
        case Setting::AllocationConvergence: return "allocation_convergence";
    }
    return "unknown";
}

inline Setting setting_from_string(std::string_view name) {
    for (auto s : {Setting::FixedConfidence, Setting::FixedBudget, Setting::PosteriorLevel,
                   Setting::AllocationConvergence}) {
        if (name == to_string(s)) return s;
    }
    throw InvalidParameter("unknown setting '" + std::string(name) + "'");
}

enum class SolverKind { Fwga, Kkt, Grid };

inline std::string_view to_string(SolverKind s) {
    switch (s) {
        case SolverKind::Fwga: return "fwga";
        case SolverKind::Kkt: return "kkt";
        case SolverKind::Grid: return "grid";
    }
    return "unknown";
}

inline SolverKind solver_from_string(std::string_view name) {
    for (auto s : {SolverKind::Fwga, SolverKind::Kkt, SolverKind::Grid}) {
        if (name == to_string(s)) return s;
    }
    throw InvalidParameter("unknown solver '" + std::string(name) + "'");
}

struct SolverConfig {
    SolverKind kind = SolverKind::Fwga;
    std::size_t iters = 100000;
    std::optional<double> tau_scale;
    double grid_step = 0.005;
    bool operator==(const SolverConfig&) const = default;
};

struct ExperimentConfig {
    Setting setting = Setting::FixedConfidence;
    InstanceSpec instance;
    std::vector<PolicyParams> policies;
    std::size_t replications = 1;
    std::uint64_t seed = 1;
    std::string output;
    std::size_t threads = 0;
    ConjugatePrior prior;

    StoppingConfig stopping;                // fixed confidence
    std::size_t cap = kDefaultRoundCap;     // fixed confidence, posterior level
    std::vector<std::size_t> budgets;       // fixed budget
    std::vector<double> levels;             // posterior level
    std::size_t trace_stride = 0;           // posterior level -log(1-P) trace; 0 disables
    std::vector<std::size_t> iters_list;    // allocation convergence
    std::vector<SolverKind> solvers;        // allocation convergence
    std::size_t stride = 0;                 // allocation convergence trace stride
    SolverConfig solver;                    // tau_scale feeds the convergence runs

    void validate() const {
        if (replications < 1) throw InvalidParameter("replications must be >= 1");
        switch (setting) {
            case Setting::FixedConfidence: stopping.validate(); break;
            case Setting::FixedBudget:
                if (budgets.empty()) throw InvalidParameter("fixed budget needs budgets");
                for (std::size_t b = 0; b < budgets.size(); ++b) {
                    if (budgets[b] < instance.arms()) throw InvalidParameter("budgets must be at least K");
                    if (b > 0 && budgets[b] <= budgets[b - 1]) throw InvalidParameter("budgets must increase");
                }
                break;
            case Setting::PosteriorLevel:
                if (levels.empty()) throw InvalidParameter("posterior level needs levels");
                for (double c : levels) {
                    if (!(c > 0.0 && c < 1.0)) throw InvalidParameter("levels must lie in (0, 1)");
                }
                break;
            case Setting::AllocationConvergence:
                if (iters_list.empty() || solvers.empty()) {
                    throw InvalidParameter("allocation convergence needs iters and solvers");
                }
                for (auto n : iters_list) {
                    if (n < 1) throw InvalidParameter("iteration counts must be >= 1");
                }
                break;
        }
        if (setting != Setting::AllocationConvergence && policies.empty()) {
            throw InvalidParameter("no policies configured");
        }
    }
};

struct ConfidenceRecord {
    std::size_t rep = 0;
    PolicyKind policy = PolicyKind::KktTs;
    ConfidenceOutcome outcome;
};

struct ConfidenceSummary {
    PolicyKind policy = PolicyKind::KktTs;
    std::size_t reps = 0;
    std::size_t capped = 0;
    double mean_tau = 0.0;
    double stderr_tau = 0.0;
    double delta_hat = 0.0;
};

struct BudgetRow {
    PolicyKind policy = PolicyKind::KktTs;
    std::size_t budget = 0;
    double pfs = 0.0;
    double stderr_pfs = 0.0;
    std::size_t reps = 0;
    std::vector<double> mean_alloc;  // across-replication mean of T/n
};

struct LevelRecord {
    std::size_t rep = 0;
    PolicyKind policy = PolicyKind::KktTs;
    double level = 0.0;
    std::size_t hit = 0;  // first round with P >= level
    bool capped = false;
    std::uint64_t seed = 0;
};

struct PosteriorTracePoint {
    std::size_t rep = 0;
    PolicyKind policy = PolicyKind::KktTs;
    std::size_t t = 0;
    double neg_log_error = 0.0;  // -log(1 - P)
};

struct ConvergenceRow {
    SolverKind solver = SolverKind::Fwga;
    std::size_t n = 0;  // configured iterations
    std::size_t iter = 0;
    double gamma = 0.0;
    double gap = 0.0;
};

inline double sample_stderr(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
}

// ---------------------------------------------------------------------------
// Fixed confidence
// ---------------------------------------------------------------------------

struct FixedConfidenceResult {
    std::vector<ConfidenceRecord> records;  // policy-major, replication order
    std::vector<ConfidenceSummary> summaries;
};

inline ConfidenceSummary summarize_confidence(PolicyKind policy, const std::vector<ConfidenceRecord>& records) {
    ConfidenceSummary s;
    s.policy = policy;
    std::vector<double> taus;
    std::size_t wrong = 0;
    for (const auto& r : records) {
        if (r.policy != policy) continue;
        ++s.reps;
        if (r.outcome.capped) {
            ++s.capped;
            continue;
        }
        taus.push_back(static_cast<double>(r.outcome.tau));
        if (!r.outcome.correct) ++wrong;
    }
    if (!taus.empty()) {
        for (double t : taus) s.mean_tau += t;
        s.mean_tau /= static_cast<double>(taus.size());
        s.stderr_tau = sample_stderr(taus);
        s.delta_hat = static_cast<double>(wrong) / static_cast<double>(taus.size());
    }
    return s;
}

inline FixedConfidenceResult run_fixed_confidence(const ExperimentConfig& cfg) {
    cfg.validate();
    FixedConfidenceResult res;
    const std::size_t R = cfg.replications;
    const std::size_t P = cfg.policies.size();
    res.records.resize(P * R);
    parallel_for(P * R, resolve_threads(cfg.threads), [&](std::size_t idx) {
        const std::size_t slot = idx / R;
        const std::size_t rep = idx % R;
        auto params = cfg.policies[slot];
        params.delta = cfg.stopping.delta;
        const auto out = run_confidence_once(cfg.instance, params, cfg.stopping,
                                             ReplicationStreams::make(cfg.seed, slot, rep), cfg.cap, cfg.prior);
        res.records[idx] = {rep, params.kind, out};
    });
    for (const auto& p : cfg.policies) res.summaries.push_back(summarize_confidence(p.kind, res.records));
    return res;
}

// ---------------------------------------------------------------------------
// Fixed budget
// ---------------------------------------------------------------------------

inline constexpr std::size_t kBudgetBlock = 1024;

inline std::vector<BudgetRow> run_fixed_budget(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t R = cfg.replications;
    const std::size_t P = cfg.policies.size();
    const std::size_t B = cfg.budgets.size();
    const std::size_t K = cfg.instance.arms();
    // Budget-dependent policies run once per budget; others once per
    // replication with checkpoints.
    struct Job {
        std::size_t slot;
        std::size_t budget_index;  // B means all budgets at once
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < P; ++s) {
        if (budget_dependent(cfg.policies[s].kind)) {
            for (std::size_t b = 0; b < B; ++b) jobs.push_back({s, b});
        } else {
            jobs.push_back({s, B});
        }
    }
    // Per (job, checkpoint): error count and summed arm counts. Integer sums
    // make the result independent of scheduling.
    struct Tally {
        std::size_t errors = 0;
        std::vector<std::uint64_t> counts;
    };
    const std::size_t blocks = (R + kBudgetBlock - 1) / kBudgetBlock;
    std::vector<std::vector<Tally>> tallies(jobs.size() * blocks);
    parallel_for(tallies.size(), resolve_threads(cfg.threads), [&](std::size_t idx) {
        const std::size_t j = idx / blocks;
        const std::size_t blk = idx % blocks;
        const auto& job = jobs[j];
        const std::vector<std::size_t> budgets =
            job.budget_index == B ? cfg.budgets : std::vector<std::size_t>{cfg.budgets[job.budget_index]};
        const std::uint64_t slot = job.slot * (B + 1) + job.budget_index;
        std::vector<Tally> tally(budgets.size(), Tally{0, std::vector<std::uint64_t>(K, 0)});
        const std::size_t end = std::min(R, (blk + 1) * kBudgetBlock);
        for (std::size_t rep = blk * kBudgetBlock; rep < end; ++rep) {
            const auto o = run_budget_once(cfg.instance, cfg.policies[job.slot], budgets,
                                           ReplicationStreams::make(cfg.seed, slot, rep), cfg.prior);
            for (std::size_t c = 0; c < budgets.size(); ++c) {
                tally[c].errors += o.error[c] ? 1 : 0;
                for (std::size_t a = 0; a < K; ++a) tally[c].counts[a] += o.counts[c][a];
            }
        }
        tallies[idx] = std::move(tally);
    });
    std::vector<BudgetRow> rows;
    for (std::size_t s = 0; s < P; ++s) {
        for (std::size_t b = 0; b < B; ++b) {
            std::size_t j = 0;
            while (!(jobs[j].slot == s && (jobs[j].budget_index == B || jobs[j].budget_index == b))) ++j;
            const std::size_t pos = jobs[j].budget_index == B ? b : 0;
            std::size_t errors = 0;
            std::vector<std::uint64_t> counts(K, 0);
            for (std::size_t blk = 0; blk < blocks; ++blk) {
                const auto& t = tallies[j * blocks + blk][pos];
                errors += t.errors;
                for (std::size_t a = 0; a < K; ++a) counts[a] += t.counts[a];
            }
            BudgetRow row;
            row.policy = cfg.policies[s].kind;
            row.budget = cfg.budgets[b];
            row.reps = R;
            const double Rd = static_cast<double>(R);
            row.pfs = static_cast<double>(errors) / Rd;
            // Sample std of the 0/1 error indicators over sqrt(R).
            row.stderr_pfs = R > 1 ? std::sqrt(row.pfs * (1.0 - row.pfs) / (Rd - 1.0)) : 0.0;
            row.mean_alloc.resize(K);
            for (std::size_t a = 0; a < K; ++a) {
                row.mean_alloc[a] = static_cast<double>(counts[a]) / (Rd * static_cast<double>(row.budget));
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Posterior level
// ---------------------------------------------------------------------------

inline bool level_checkpoint(std::size_t t) { return t <= 1000 || t % 10 == 0; }

struct PosteriorRunOutput {
    std::vector<std::size_t> hits;  // per level; 0 when capped
    std::vector<bool> capped;
    std::vector<PosteriorTracePoint> trace;
};

// First round at which P(true top set | data) reaches each level. P is
// evaluated every round up to t = 1000 and every 10 rounds after; a crossing
// found at a sparse checkpoint is refined by replaying from the previous
// checkpoint's snapshot.
inline PosteriorRunOutput run_posterior_once(const InstanceSpec& inst, const PolicyParams& params,
                                             const std::vector<double>& levels, std::size_t cap,
                                             std::size_t trace_stride, ReplicationStreams streams,
                                             ConjugatePrior prior = {}) {
    const auto p = resolve_params(params, inst);
    auto policy = make_policy(p, inst.arms(), inst.k);
    BanditState state = BanditState::make(inst.family, inst.arms(), prior);
    initialize(state, inst, policy->init_pulls(), streams.env);

    PosteriorRunOutput out;
    out.hits.assign(levels.size(), 0);
    out.capped.assign(levels.size(), false);
    auto error_prob = [&](const BanditState& s) { return posterior_prob_incorrect(s.posterior, inst.top); };
    auto pending = [&] {
        for (auto h : out.hits) {
            if (h == 0) return true;
        }
        return false;
    };
    auto mark = [&](std::size_t t, double err) {
        for (std::size_t l = 0; l < levels.size(); ++l) {
            if (out.hits[l] == 0 && 1.0 - err >= levels[l]) out.hits[l] = t;
        }
    };
    struct Snapshot {
        BanditState state;
        std::unique_ptr<Policy> policy;
        ReplicationStreams streams;
    };
    // Pending pulls of a partially consumed batch are part of the snapshot.
    std::vector<std::size_t> queue;
    std::size_t queue_pos = 0;
    auto advance = [&](BanditState& s, Policy& pol, ReplicationStreams& st, std::vector<std::size_t>& q,
                       std::size_t& qp) {
        if (qp >= q.size()) {
            auto step = pol.step(s, st.policy);
            if (step.stop || step.arms.empty()) return false;
            q = std::move(step.arms);
            qp = 0;
        }
        pull(s, inst, q[qp++], st.env);
        return true;
    };

    mark(state.t, error_prob(state));
    Snapshot snap{state, policy->clone(), streams};
    std::vector<std::size_t> snap_queue = queue;
    std::size_t snap_pos = queue_pos;
    // A requested trace runs to the horizon `cap`; otherwise stop once every
    // level is reached.
    const bool trace_only = levels.empty();
    const bool to_horizon = trace_stride > 0;
    while ((to_horizon || pending()) && state.t < cap) {
        if (!advance(state, *policy, streams, queue, queue_pos)) break;
        const std::size_t t = state.t;
        if (trace_stride > 0 && t % trace_stride == 0) {
            const double err = error_prob(state);
            out.trace.push_back({0, p.kind, t, -std::log(err)});
        }
        if (trace_only || !pending() || !level_checkpoint(t)) continue;
        const double err = error_prob(state);
        bool crossed = false;
        for (std::size_t l = 0; l < levels.size(); ++l) crossed = crossed || (out.hits[l] == 0 && 1.0 - err >= levels[l]);
        if (crossed && t > 1000) {
            // Replay single rounds from the last checkpoint.
            BanditState rs = snap.state;
            auto rp = snap.policy->clone();
            ReplicationStreams rst = snap.streams;
            std::vector<std::size_t> rq = snap_queue;
            std::size_t rqp = snap_pos;
            while (rs.t < t) {
                advance(rs, *rp, rst, rq, rqp);
                mark(rs.t, rs.t == t ? err : error_prob(rs));
            }
        } else {
            mark(t, err);
        }
        snap = Snapshot{state, policy->clone(), streams};
        snap_queue = queue;
        snap_pos = queue_pos;
    }
    if (trace_only) return out;
    for (std::size_t l = 0; l < levels.size(); ++l) out.capped[l] = out.hits[l] == 0;
    return out;
}

struct PosteriorLevelResult {
    std::vector<LevelRecord> records;
    std::vector<PosteriorTracePoint> trace;
};

inline PosteriorLevelResult run_posterior_level(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t R = cfg.replications;
    const std::size_t P = cfg.policies.size();
    std::vector<PosteriorRunOutput> outs(P * R);
    std::vector<std::uint64_t> seeds(P * R);
    parallel_for(P * R, resolve_threads(cfg.threads), [&](std::size_t idx) {
        const auto streams = ReplicationStreams::make(cfg.seed, idx / R, idx % R);
        seeds[idx] = streams.seed;
        outs[idx] = run_posterior_once(cfg.instance, cfg.policies[idx / R], cfg.levels, cfg.cap, cfg.trace_stride,
                                       streams, cfg.prior);
    });
    PosteriorLevelResult res;
    for (std::size_t idx = 0; idx < outs.size(); ++idx) {
        const auto kind = cfg.policies[idx / R].kind;
        for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
            res.records.push_back({idx % R, kind, cfg.levels[l], outs[idx].hits[l], outs[idx].capped[l], seeds[idx]});
        }
        for (auto tp : outs[idx].trace) {
            tp.rep = idx % R;
            res.trace.push_back(tp);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Allocation convergence
// ---------------------------------------------------------------------------

inline std::vector<ConvergenceRow> run_allocation_convergence(const ExperimentConfig& cfg,
                                                              const ReferenceSolution* reference = nullptr) {
    cfg.validate();
    std::optional<ReferenceSolution> own;
    if (!reference) {
        own = reference_solution(cfg.instance);
        reference = &*own;
    }
    struct Job {
        SolverKind solver;
        std::size_t n;
    };
    std::vector<Job> jobs;
    for (auto s : cfg.solvers) {
        if (s == SolverKind::Grid) throw InvalidParameter("the grid oracle has no iteration trace");
        for (auto n : cfg.iters_list) jobs.push_back({s, n});
    }
    std::vector<std::vector<TracePoint>> traces(jobs.size());
    parallel_for(jobs.size(), resolve_threads(cfg.threads), [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::size_t stride = cfg.stride > 0 ? cfg.stride : job.n;
        if (job.solver == SolverKind::Fwga) {
            FwgaOptions o;
            o.iters = job.n;
            o.tau_scale = cfg.solver.tau_scale;
            o.stride = stride;
            o.reference = reference;
            traces[j] = fwga_solve(cfg.instance, o).trace;
        } else {
            KktOptions o;
            o.iters = job.n;
            o.stride = stride;
            o.reference = reference;
            traces[j] = kkt_tracking_solve(cfg.instance, o).trace;
        }
    });
    std::vector<ConvergenceRow> rows;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        for (const auto& tp : traces[j]) rows.push_back({jobs[j].solver, jobs[j].n, tp.iter, tp.gamma, tp.gap});
    }
    return rows;
}

}  // namespace topk
