#pragma once

// Optimality diagnostics for a candidate allocation: KKT residuals, the
// equality-pair graph with per-component balance, monotonicity, and the
// connected-graph sufficient condition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "allocation.hpp"
#include "solvers.hpp"

namespace topk {

struct KktReport {
    double stationarity = 0.0;  // max_a |psi_a - sum over pairs containing a of mu h|
    double slackness = 0.0;     // |sum mu (Gamma - C)| / Gamma
    double residual = 0.0;      // max of the two
};

inline KktReport check_kkt(const InstanceSpec& inst, const std::vector<double>& psi, const std::vector<double>& mu,
                           Objective objective = Objective::Confidence) {
    if (psi.size() != inst.arms() || mu.size() != inst.pair_count()) {
        throw InvalidParameter("allocation or dual weights have the wrong dimension");
    }
    const std::size_t K = inst.arms();
    std::vector<double> implied(K, 0.0);
    const auto rates = pair_rates(inst, psi, objective);
    const double g = *std::min_element(rates.begin(), rates.end());
    double slack = 0.0;
    std::size_t p = 0;
    for (auto i : inst.top) {
        for (auto j : inst.bottom) {
            const double h = sampling_fraction(inst, psi, i, j, objective);
            implied[i] += mu[p] * h;
            implied[j] += mu[p] * (1.0 - h);
            slack += mu[p] * (g - rates[p]);
            ++p;
        }
    }
    KktReport r;
    for (std::size_t a = 0; a < K; ++a) r.stationarity = std::max(r.stationarity, std::abs(psi[a] - implied[a]));
    r.slackness = g > 0.0 ? std::abs(slack) / g : std::numeric_limits<double>::infinity();
    r.residual = std::max(r.stationarity, r.slackness);
    return r;
}

struct GraphComponent {
    std::vector<std::size_t> top;
    std::vector<std::size_t> bottom;
    double balance_residual = 0.0;
};

struct SufficientCheck {
    bool applicable = false;        // graph connected and the anchor assumption holds
    double assumption_margin = 0.0; // 1 - sum_{j != j1} d(i_k, .)/d(j, .)
    double equality_residual = 0.0; // max relative deviation of C_{i_k,j}, C_{i,j_1} from Gamma
    double balance_residual = 0.0;
    bool satisfied = false;
};

struct StructureOptions {
    double equality_tol = 1e-2;  // relative to Gamma
    double balance_tol = 1e-3;
    double monotone_tol = 2e-3;
    double kkt_tol = 1e-3;
    Objective objective = Objective::Confidence;
};

struct OptimalityReport {
    double gamma = 0.0;
    ArmPair argmin;
    std::vector<ArmPair> equality_pairs;
    std::vector<GraphComponent> components;
    bool rows_columns_ok = false;  // every arm incident to an equality pair
    double overall_balance_residual = 0.0;
    bool balance_ok = false;
    double monotone_violation = 0.0;
    bool monotone_ok = false;
    bool necessary_ok = false;
    DualWeights mu;  // stationarity fit on the equality graph
    KktReport kkt;
    bool kkt_ok = false;
    SufficientCheck sufficient;
};

namespace detail {

// Ratio d(theta_from, bar)/d(theta_to, bar) across one equality edge.
inline double edge_ratio(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i, std::size_t j,
                         bool from_top, Objective objective) {
    const auto t = pair_terms(inst, psi, i, j, objective);
    const double num = from_top ? t.di : t.dj;
    const double den = from_top ? t.dj : t.di;
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

inline double weighted_square(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t a) {
    return psi[a] * psi[a] / inst.family.variance(a);
}

}  // namespace detail

inline OptimalityReport check_structure(const InstanceSpec& inst, const std::vector<double>& psi,
                                        const StructureOptions& opt = {}) {
    const std::size_t K = inst.arms();
    if (psi.size() != K) throw InvalidParameter("allocation has the wrong dimension");
    OptimalityReport rep;
    const auto g = gamma(inst, psi, opt.objective);
    rep.gamma = g.value;
    rep.argmin = g.argmin;

    const auto support = equality_pairs(inst, psi, opt.equality_tol, opt.objective);
    std::vector<std::vector<std::size_t>> adj(K);
    for (auto p : support) {
        const auto pr = inst.pair(p);
        rep.equality_pairs.push_back(pr);
        adj[pr.top].push_back(pr.bottom);
        adj[pr.bottom].push_back(pr.top);
    }
    rep.rows_columns_ok = rep.gamma > 0.0;
    for (std::size_t a = 0; a < K; ++a) rep.rows_columns_ok = rep.rows_columns_ok && !adj[a].empty();

    // Components by BFS from the lowest-index unvisited top arm; S is the
    // path product from the anchor.
    std::vector<bool> seen(K, false);
    std::vector<double> S(K, 0.0);
    rep.balance_ok = !support.empty();
    for (auto anchor : inst.top) {
        if (seen[anchor] || adj[anchor].empty()) continue;
        GraphComponent comp;
        std::queue<std::size_t> q;
        q.push(anchor);
        seen[anchor] = true;
        S[anchor] = 1.0;
        while (!q.empty()) {
            const std::size_t a = q.front();
            q.pop();
            (inst.is_top(a) ? comp.top : comp.bottom).push_back(a);
            for (auto b : adj[a]) {
                if (seen[b]) continue;
                seen[b] = true;
                const bool from_top = inst.is_top(a);
                const std::size_t i = from_top ? a : b;
                const std::size_t j = from_top ? b : a;
                S[b] = S[a] * detail::edge_ratio(inst, psi, i, j, from_top, opt.objective);
                q.push(b);
            }
        }
        std::sort(comp.top.begin(), comp.top.end());
        std::sort(comp.bottom.begin(), comp.bottom.end());
        double lhs = 0.0;
        double rhs = 0.0;
        if (inst.family.is_gaussian()) {
            for (auto i : comp.top) lhs += detail::weighted_square(inst, psi, i);
            for (auto j : comp.bottom) rhs += detail::weighted_square(inst, psi, j);
        } else {
            for (auto i : comp.top) lhs += S[i];
            for (auto j : comp.bottom) rhs += S[j];
        }
        comp.balance_residual = std::abs(lhs - rhs);
        rep.balance_ok = rep.balance_ok && comp.balance_residual <= opt.balance_tol;
        rep.components.push_back(std::move(comp));
    }
    if (inst.family.is_gaussian()) {
        double lhs = 0.0;
        double rhs = 0.0;
        for (auto i : inst.top) lhs += detail::weighted_square(inst, psi, i);
        for (auto j : inst.bottom) rhs += detail::weighted_square(inst, psi, j);
        rep.overall_balance_residual = std::abs(lhs - rhs);
    }

    // Within the top set a larger mean receives no more allocation; within
    // the bottom set a smaller mean receives no more allocation. Only arms
    // sharing one divergence are comparable (unequal Gaussian variances break
    // the ordering).
    for (const auto* set : {&inst.top, &inst.bottom}) {
        const bool top = set == &inst.top;
        for (auto a : *set) {
            for (auto b : *set) {
                if (a == b || inst.family.variance(a) != inst.family.variance(b)) continue;
                const bool constrained = top ? inst.theta[a] >= inst.theta[b] : inst.theta[a] <= inst.theta[b];
                if (constrained) rep.monotone_violation = std::max(rep.monotone_violation, psi[a] - psi[b]);
            }
        }
    }
    rep.monotone_ok = rep.monotone_violation <= opt.monotone_tol;
    rep.necessary_ok = rep.rows_columns_ok && rep.balance_ok && rep.monotone_ok;

    const auto fit = fit_dual_weights(inst, psi, support, opt.objective);
    rep.mu = fit.mu;
    rep.kkt = check_kkt(inst, psi, rep.mu.mu, opt.objective);
    rep.kkt_ok = fit.mass > 0.0 && rep.kkt.residual <= opt.kkt_tol;

    // Sufficient condition for a connected graph: i_k = lowest-mean top arm,
    // j_1 = highest-mean bottom arm.
    std::size_t ik = inst.top.front();
    for (auto i : inst.top) {
        if (inst.theta[i] < inst.theta[ik]) ik = i;
    }
    std::size_t j1 = inst.bottom.front();
    for (auto j : inst.bottom) {
        if (inst.theta[j] > inst.theta[j1]) j1 = j;
    }
    auto ratio_top = [&](std::size_t i, std::size_t j) {
        return detail::edge_ratio(inst, psi, i, j, true, opt.objective);
    };
    SufficientCheck& sc = rep.sufficient;
    sc.assumption_margin = 1.0;
    for (auto j : inst.bottom) {
        if (j != j1) sc.assumption_margin -= ratio_top(ik, j);
    }
    auto rel_dev = [&](std::size_t i, std::size_t j) {
        return std::abs(pair_rate(inst, psi, i, j, opt.objective) - rep.gamma) / rep.gamma;
    };
    for (auto j : inst.bottom) sc.equality_residual = std::max(sc.equality_residual, rel_dev(ik, j));
    for (auto i : inst.top) sc.equality_residual = std::max(sc.equality_residual, rel_dev(i, j1));
    double lhs = 0.0;
    for (auto i : inst.top) lhs += 1.0 / ratio_top(i, j1);
    lhs *= ratio_top(ik, j1);
    double rhs = 0.0;
    for (auto j : inst.bottom) rhs += ratio_top(ik, j);
    sc.balance_residual = std::abs(lhs - rhs);
    sc.applicable = rep.components.size() == 1 && sc.assumption_margin > 0.0;
    sc.satisfied = sc.applicable && sc.equality_residual <= opt.equality_tol && sc.balance_residual <= opt.balance_tol;
    return rep;
}

}  // namespace topk
