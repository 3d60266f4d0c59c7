#pragma once

// Solvers for max_psi min_{(i,j)} C_{i,j}(psi): Frank-Wolfe gradient ascent,
// KKT-Tracking, an exhaustive lattice oracle, and the saddle gap Q.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "allocation.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace topk {

struct TracePoint {
    std::size_t iter = 0;
    double gamma = 0.0;
    double gap = std::numeric_limits<double>::quiet_NaN();  // Q, when a reference is set
};

// Saddle point (psi*, mu*) with precomputed C(psi*), used to evaluate Q.
struct ReferenceSolution {
    Allocation psi;
    DualWeights mu;
    double gamma = 0.0;
    std::vector<double> rates;  // C(psi*) per pair
};

struct SolverResult {
    Allocation psi;
    DualWeights mu;
    double gamma = 0.0;
    std::vector<TracePoint> trace;
};

// Q = <mu_k, C(psi*)> - <mu*, C(psi_k)>.
inline double optimality_gap(const InstanceSpec& inst, const std::vector<double>& psi_k, const std::vector<double>& mu_k,
                             const std::vector<double>& psi_star, const std::vector<double>& mu_star,
                             Objective objective = Objective::Confidence) {
    const auto c_star = pair_rates(inst, psi_star, objective);
    const auto c_k = pair_rates(inst, psi_k, objective);
    if (mu_k.size() != c_star.size() || mu_star.size() != c_star.size()) {
        throw InvalidParameter("dual weights do not match the pair count");
    }
    double q = 0.0;
    for (std::size_t p = 0; p < c_star.size(); ++p) q += mu_k[p] * c_star[p] - mu_star[p] * c_k[p];
    return q;
}

namespace detail {

inline double gap_against(const InstanceSpec& inst, const ReferenceSolution& ref, const std::vector<double>& psi,
                          const std::vector<double>& mu, Objective objective) {
    double q = 0.0;
    std::size_t p = 0;
    for (auto i : inst.top) {
        for (auto j : inst.bottom) {
            q += mu[p] * ref.rates[p] - ref.mu.mu[p] * pair_rate(inst, psi, i, j, objective);
            ++p;
        }
    }
    return q;
}

struct ArgminPair {
    std::size_t index = 0;
    ArmPair pair;
    PairTerms terms;
};

inline ArgminPair argmin_pair(const InstanceSpec& inst, const std::vector<double>& psi, Objective objective) {
    ArgminPair best;
    best.terms.value = std::numeric_limits<double>::infinity();
    std::size_t p = 0;
    for (auto i : inst.top) {
        for (auto j : inst.bottom) {
            const auto t = pair_terms(inst, psi, i, j, objective);
            if (t.value < best.terms.value) best = {p, {i, j}, t};
            ++p;
        }
    }
    return best;
}

inline bool record_now(std::size_t t, std::size_t n, std::size_t stride) {
    return stride > 0 && (t % stride == 0 || t == n);
}

}  // namespace detail

// With 10 instead of 1 for Bernoulli/Poisson, the projected-gradient iterate
// barely leaves uniform at N = 1e5 because those gradients are small.
inline double default_tau_scale(const RewardFamily&) { return 1.0; }

struct FwgaOptions {
    std::size_t iters = 100000;
    std::optional<double> tau_scale;  // default_tau_scale(family) when empty
    Objective objective = Objective::Confidence;
    std::optional<Allocation> psi0;
    std::optional<DualWeights> mu0;
    std::size_t stride = 0;  // 0 disables the trace
    const ReferenceSolution* reference = nullptr;
};

inline SolverResult fwga_solve(const InstanceSpec& inst, const FwgaOptions& opt = {}) {
    if (opt.iters < 1) throw InvalidParameter("FWGA needs at least one iteration");
    const std::size_t K = inst.arms();
    const std::size_t P = inst.pair_count();
    std::vector<double> psi = opt.psi0 ? opt.psi0->psi : Allocation::uniform(K).psi;
    std::vector<double> mu = opt.mu0 ? opt.mu0->mu : DualWeights::uniform(P).mu;
    if (psi.size() != K || mu.size() != P) throw InvalidParameter("initial point has the wrong dimension");
    std::vector<double> u = psi;
    const double c_tau = opt.tau_scale.value_or(default_tau_scale(inst.family));
    if (!(c_tau > 0.0)) throw InvalidParameter("tau scale must be positive");
    const double n = static_cast<double>(opt.iters);
    const double tau_base = c_tau * n * std::sqrt(n);

    SolverResult res;
    std::vector<double> step(K);
    for (std::size_t t = 1; t <= opt.iters; ++t) {
        const double td = static_cast<double>(t);
        const double alpha = 2.0 / (td + 1.0);
        const auto fw = detail::argmin_pair(inst, psi, opt.objective);
        for (auto& m : mu) m *= 1.0 - alpha;
        mu[fw.index] += alpha;

        const std::size_t i = fw.pair.top;
        const std::size_t j = fw.pair.bottom;
        // Gradient of the selected pair at u_{t-1}; u_i + u_j = 0 uses the
        // equal-weight point so the ascent step can leave the boundary.
        auto g = pair_terms(inst, u, i, j, opt.objective);
        if (g.degenerate) {
            std::vector<double> half(K, 0.0);
            half[i] = half[j] = 0.5;
            g = pair_terms(inst, half, i, j, opt.objective);
        }
        const double inv_tau = td / tau_base;
        step = u;
        step[i] += inv_tau * g.di;
        step[j] += inv_tau * g.dj;
        u = project_simplex(step).psi;
        for (std::size_t a = 0; a < K; ++a) psi[a] = (1.0 - alpha) * psi[a] + alpha * u[a];

        if (detail::record_now(t, opt.iters, opt.stride)) {
            TracePoint tp{t, gamma(inst, psi, opt.objective).value};
            if (opt.reference) tp.gap = detail::gap_against(inst, *opt.reference, psi, mu, opt.objective);
            res.trace.push_back(tp);
        }
    }
    res.gamma = gamma(inst, psi, opt.objective).value;
    res.psi.psi = std::move(psi);
    res.mu.mu = std::move(mu);
    return res;
}

// Incremental KKT-Tracking state. The instance may change between calls
// (plug-in tracking), and the iteration counter continues across calls.
class KktTracker {
public:
    explicit KktTracker(std::size_t arms, std::size_t pairs)
        : psi_(Allocation::uniform(arms).psi), pair_hits_(pairs, 0) {}
    KktTracker(Allocation psi0, std::size_t pairs) : psi_(std::move(psi0.psi)), pair_hits_(pairs, 0) {}

    void run(const InstanceSpec& inst, std::size_t iters, Objective objective = Objective::Confidence) {
        for (std::size_t s = 0; s < iters; ++s) step(inst, objective);
    }

    void step(const InstanceSpec& inst, Objective objective = Objective::Confidence) {
        ++t_;
        const auto best = detail::argmin_pair(inst, psi_, objective);
        const auto& tm = best.terms;
        const double h = (tm.degenerate || !(tm.value > 0.0)) ? 0.5 : psi_[best.pair.top] * tm.di / tm.value;
        const double w = 1.0 / static_cast<double>(t_);
        for (auto& p : psi_) p *= 1.0 - w;
        psi_[best.pair.top] += w * h;
        psi_[best.pair.bottom] += w * (1.0 - h);
        ++pair_hits_[best.index];
    }

    const std::vector<double>& psi() const noexcept { return psi_; }
    std::size_t iterations() const noexcept { return t_; }

    std::vector<double> pair_frequency() const {
        std::vector<double> mu(pair_hits_.size(), 0.0);
        if (t_ == 0) return DualWeights::uniform(mu.size()).mu;
        for (std::size_t p = 0; p < mu.size(); ++p) mu[p] = static_cast<double>(pair_hits_[p]) / static_cast<double>(t_);
        return mu;
    }

private:
    std::vector<double> psi_;
    std::vector<std::size_t> pair_hits_;
    std::size_t t_ = 0;
};

struct KktOptions {
    std::size_t iters = 100000;
    Objective objective = Objective::Confidence;
    std::optional<Allocation> psi0;
    std::size_t stride = 0;
    const ReferenceSolution* reference = nullptr;
};

inline SolverResult kkt_tracking_solve(const InstanceSpec& inst, const KktOptions& opt = {}) {
    const std::size_t K = inst.arms();
    Allocation psi0 = opt.psi0 ? *opt.psi0 : Allocation::uniform(K);
    if (psi0.size() != K) throw InvalidParameter("initial point has the wrong dimension");
    for (double p : psi0.psi) {
        if (!(p > 0.0)) throw InvalidParameter("KKT-Tracking needs a strictly positive starting allocation");
    }
    KktTracker tracker(std::move(psi0), inst.pair_count());
    SolverResult res;
    for (std::size_t t = 1; t <= opt.iters; ++t) {
        tracker.step(inst, opt.objective);
        if (detail::record_now(t, opt.iters, opt.stride)) {
            TracePoint tp{t, gamma(inst, tracker.psi(), opt.objective).value};
            if (opt.reference) {
                tp.gap = detail::gap_against(inst, *opt.reference, tracker.psi(), tracker.pair_frequency(), opt.objective);
            }
            res.trace.push_back(tp);
        }
    }
    res.psi.psi = tracker.psi();
    res.mu.mu = tracker.pair_frequency();
    res.gamma = gamma(inst, res.psi.psi, opt.objective).value;
    return res;
}

// ---------------------------------------------------------------------------
// Lattice oracle
// ---------------------------------------------------------------------------

struct GridOptions {
    double step = 0.005;
    bool polish = true;
    Objective objective = Objective::Confidence;
};

struct GridResult {
    Allocation psi;
    double gamma = 0.0;
};

namespace detail {

struct GridSearch {
    const InstanceSpec& inst;
    Objective objective;
    std::size_t units = 0;
    double step = 0.0;
    std::vector<std::size_t> order;   // arm visiting order
    std::vector<std::size_t> rank;    // position of each arm in order
    std::vector<double> psi;
    double best = -1.0;
    std::vector<double> best_psi;

    // Minimum rate over pairs whose two arms are both assigned.
    double partial_min(std::size_t depth) const {
        double m = std::numeric_limits<double>::infinity();
        const std::size_t a = order[depth];
        for (std::size_t d = 0; d < depth; ++d) {
            const std::size_t b = order[d];
            const bool a_top = inst.is_top(a);
            if (a_top == inst.is_top(b)) continue;
            const std::size_t i = a_top ? a : b;
            const std::size_t j = a_top ? b : a;
            m = std::min(m, pair_rate(inst, psi, i, j, objective));
        }
        return m;
    }

    void recurse(std::size_t depth, std::size_t remaining, double running_min) {
        const std::size_t arm = order[depth];
        if (depth + 1 == order.size()) {
            psi[arm] = static_cast<double>(remaining) * step;
            const double m = std::min(running_min, partial_min(depth));
            if (m > best) {
                best = m;
                best_psi = psi;
            }
            return;
        }
        for (std::size_t u = 0; u <= remaining; ++u) {
            psi[arm] = static_cast<double>(u) * step;
            const double m = std::min(running_min, partial_min(depth));
            // C is nondecreasing in each weight, so later assignments cannot
            // raise a completed pair above m.
            if (m <= best) continue;
            recurse(depth + 1, remaining - u, m);
        }
        psi[arm] = 0.0;
    }
};

// Local coordinate search moving mass between pairs of arms.
inline void coordinate_search(const InstanceSpec& inst, std::vector<double>& psi, double& best, double step,
                              Objective objective) {
    const std::size_t K = psi.size();
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t a = 0; a < K; ++a) {
            for (std::size_t b = 0; b < K; ++b) {
                if (a == b || psi[b] < step) continue;
                psi[a] += step;
                psi[b] -= step;
                const double g = gamma(inst, psi, objective).value;
                if (g > best) {
                    best = g;
                    improved = true;
                } else {
                    psi[a] -= step;
                    psi[b] += step;
                }
            }
        }
    }
}

// Adaptive random-direction search along zero-sum directions. Coordinate
// moves stall on the ridge where several pair rates are equal; random
// directions keep making progress along it.
inline void ridge_search(const InstanceSpec& inst, std::vector<double>& psi, double& best, double radius,
                         Objective objective, std::uint64_t seed = 0x5eedULL) {
    const std::size_t K = psi.size();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> trial(K);
    std::vector<double> d(K);
    std::size_t failures = 0;
    const std::size_t patience = 20 * K;
    while (radius > 1e-10) {
        double mean = 0.0;
        for (auto& x : d) {
            x = normal(rng);
            mean += x;
        }
        mean /= static_cast<double>(K);
        double scale = 0.0;
        for (auto& x : d) {
            x -= mean;
            scale = std::max(scale, std::abs(x));
        }
        bool feasible = scale > 0.0;
        for (std::size_t a = 0; a < K && feasible; ++a) {
            trial[a] = psi[a] + radius * d[a] / scale;
            feasible = trial[a] >= 0.0;
        }
        const double g = feasible ? gamma(inst, trial, objective).value : -1.0;
        if (g > best) {
            best = g;
            psi = trial;
            failures = 0;
            radius *= 2.0;
        } else if (++failures >= patience) {
            failures = 0;
            radius *= 0.5;
        }
    }
}

}  // namespace detail

inline GridResult grid_oracle_solve(const InstanceSpec& inst, const GridOptions& opt = {}) {
    const std::size_t K = inst.arms();
    if (K > 5) throw InvalidParameter("grid oracle is limited to K <= 5 arms");
    if (!(opt.step > 0.0) || opt.step > 0.5) throw InvalidParameter("grid step must lie in (0, 0.5]");
    const double units_real = 1.0 / opt.step;
    const auto units = static_cast<std::size_t>(std::llround(units_real));
    if (std::abs(units_real - static_cast<double>(units)) > 1e-9 * units_real) {
        throw InvalidParameter("grid step must divide 1");
    }
    detail::GridSearch search{inst, opt.objective, units, opt.step, {}, {}, std::vector<double>(K, 0.0), -1.0, {}};
    // Interleave top and bottom arms so pairs complete early and pruning bites.
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < inst.top.size() || b < inst.bottom.size()) {
        if (a < inst.top.size()) search.order.push_back(inst.top[a++]);
        if (b < inst.bottom.size()) search.order.push_back(inst.bottom[b++]);
    }
    search.recurse(0, units, std::numeric_limits<double>::infinity());
    GridResult res{{search.best_psi}, search.best};
    if (opt.polish) {
        detail::coordinate_search(inst, res.psi.psi, res.gamma, opt.step / 10.0, opt.objective);
        detail::ridge_search(inst, res.psi.psi, res.gamma, opt.step / 10.0, opt.objective);
    }
    // Renormalize away accumulated rounding from lattice arithmetic.
    double sum = 0.0;
    for (double p : res.psi.psi) sum += p;
    for (double& p : res.psi.psi) p /= sum;
    res.gamma = gamma(inst, res.psi.psi, opt.objective).value;
    return res;
}

// ---------------------------------------------------------------------------
// Dual weights at a candidate optimum
// ---------------------------------------------------------------------------

// min ||A x - y||_2 subject to x >= 0, by cyclic coordinate descent. A is
// row-major with `cols` columns.
inline std::vector<double> nnls(const std::vector<double>& A, std::size_t cols, const std::vector<double>& y,
                                std::size_t sweeps = 20000, double tol = 1e-15) {
    const std::size_t rows = y.size();
    if (A.size() != rows * cols) throw InvalidParameter("nnls dimension mismatch");
    std::vector<double> x(cols, 0.0);
    std::vector<double> r = y;  // r = y - A x
    std::vector<double> col_norm(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t q = 0; q < rows; ++q) col_norm[c] += A[q * cols + c] * A[q * cols + c];
    }
    for (std::size_t s = 0; s < sweeps; ++s) {
        double max_move = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (col_norm[c] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t q = 0; q < rows; ++q) dot += A[q * cols + c] * r[q];
            const double nx = std::max(0.0, x[c] + dot / col_norm[c]);
            const double d = nx - x[c];
            if (d != 0.0) {
                for (std::size_t q = 0; q < rows; ++q) r[q] -= d * A[q * cols + c];
                x[c] = nx;
                max_move = std::max(max_move, std::abs(d));
            }
        }
        if (max_move < tol) break;
    }
    return x;
}

// Pairs whose rate lies within rel_tol * Gamma of Gamma, as pair indices.
inline std::vector<std::size_t> equality_pairs(const InstanceSpec& inst, const std::vector<double>& psi, double rel_tol,
                                               Objective objective = Objective::Confidence) {
    const auto rates = pair_rates(inst, psi, objective);
    const double g = *std::min_element(rates.begin(), rates.end());
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < rates.size(); ++p) {
        if (rates[p] - g <= rel_tol * g) out.push_back(p);
    }
    return out;
}

struct DualFit {
    DualWeights mu;
    double residual = 0.0;  // L-infinity stationarity residual of the raw fit
    double mass = 0.0;      // sum of the raw nonnegative fit before normalization
};

// Fits mu >= 0 on the given support to the stationarity equations
// psi_i = sum_j mu_ij h_{i;j}, psi_j = sum_i mu_ij h_{j;i}.
inline DualFit fit_dual_weights(const InstanceSpec& inst, const std::vector<double>& psi,
                                const std::vector<std::size_t>& support, Objective objective = Objective::Confidence) {
    const std::size_t K = inst.arms();
    const std::size_t E = support.size();
    std::vector<double> A(K * E, 0.0);
    for (std::size_t e = 0; e < E; ++e) {
        const auto pr = inst.pair(support[e]);
        const double h = sampling_fraction(inst, psi, pr.top, pr.bottom, objective);
        A[pr.top * E + e] = h;
        A[pr.bottom * E + e] = 1.0 - h;
    }
    const auto x = nnls(A, E, psi);
    DualFit fit;
    fit.mu.mu.assign(inst.pair_count(), 0.0);
    for (std::size_t e = 0; e < E; ++e) fit.mass += x[e];
    for (std::size_t q = 0; q < K; ++q) {
        double s = 0.0;
        for (std::size_t e = 0; e < E; ++e) s += A[q * E + e] * x[e];
        fit.residual = std::max(fit.residual, std::abs(s - psi[q]));
    }
    for (std::size_t e = 0; e < E; ++e) fit.mu.mu[support[e]] = fit.mass > 0.0 ? x[e] / fit.mass : 0.0;
    return fit;
}

struct ReferenceOptions {
    double grid_step = 0.005;
    double equality_tol = 1e-2;
    double fit_tol = 1e-3;            // accepted stationarity residual of the NNLS fit
    std::size_t fallback_iters = 10000000;
    std::size_t fwga_iters = 200000;  // used for psi* when K > 5
    std::size_t refine_iters = 1000000;  // KKT-Tracking candidate for psi*
    Objective objective = Objective::Confidence;
};

// psi* is the better (by Gamma) of the lattice oracle (a long FWGA run when
// K > 5) and a long KKT-Tracking run; the lattice alone resolves psi* only to
// about the lattice step because Gamma is flat near its maximum. mu* comes
// from the equality-graph stationarity fit, with a long KKT-Tracking fallback.
inline ReferenceSolution reference_solution(const InstanceSpec& inst, const ReferenceOptions& opt = {}) {
    ReferenceSolution ref;
    if (inst.arms() <= 5) {
        ref.psi = grid_oracle_solve(inst, {opt.grid_step, true, opt.objective}).psi;
    } else {
        FwgaOptions f;
        f.iters = opt.fwga_iters;
        f.objective = opt.objective;
        ref.psi = fwga_solve(inst, f).psi;
    }
    if (opt.refine_iters > 0) {
        KktOptions k;
        k.iters = opt.refine_iters;
        k.objective = opt.objective;
        auto tracked = kkt_tracking_solve(inst, k);
        if (tracked.gamma > gamma(inst, ref.psi.psi, opt.objective).value) ref.psi = std::move(tracked.psi);
    }
    // Near-active pairs admit spurious duals that break complementary
    // slackness, so take the tightest equality graph that still fits.
    std::optional<DualWeights> mu;
    for (double tol = 1e-7; tol <= opt.equality_tol * (1.0 + 1e-12); tol *= 10.0) {
        const auto support = equality_pairs(inst, ref.psi.psi, tol, opt.objective);
        const auto fit = fit_dual_weights(inst, ref.psi.psi, support, opt.objective);
        if (fit.residual <= opt.fit_tol && fit.mass > 0.0) {
            mu = fit.mu;
            break;
        }
    }
    if (mu) {
        ref.mu = std::move(*mu);
    } else {
        KktOptions k;
        k.iters = opt.fallback_iters;
        k.objective = opt.objective;
        ref.mu = kkt_tracking_solve(inst, k).mu;
    }
    ref.rates = pair_rates(inst, ref.psi.psi, opt.objective);
    ref.gamma = *std::min_element(ref.rates.begin(), ref.rates.end());
    return ref;
}

inline ReferenceSolution make_reference(const InstanceSpec& inst, Allocation psi, DualWeights mu,
                                        Objective objective = Objective::Confidence) {
    ReferenceSolution ref{std::move(psi), std::move(mu), 0.0, {}};
    ref.rates = pair_rates(inst, ref.psi.psi, objective);
    ref.gamma = *std::min_element(ref.rates.begin(), ref.rates.end());
    return ref;
}

}  // namespace topk
