#pragma once

// Sampling rules as step functions over BanditState, plus a uniform Policy
// interface used by the experiment runners.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "allocation.hpp"
#include "bandit_state.hpp"
#include "errors.hpp"
#include "expfam.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "stopping.hpp"

namespace topk {

// ---------------------------------------------------------------------------
// Policy kinds
// ---------------------------------------------------------------------------

enum class PolicyKind {
    KktTs,
    KktTsBudget,
    DtTs,
    CTracking,
    DTracking,
    Uniform,
    KlLucb,
    KlElimination,
    UGapEConfidence,
    UGapEBudget,
    Sar,
    OcbaSs,
    OcbaSS,
};

inline std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::KktTs: return "kkt-ts";
        case PolicyKind::KktTsBudget: return "kkt-ts-budget";
        case PolicyKind::DtTs: return "dt-ts";
        case PolicyKind::CTracking: return "c-tracking";
        case PolicyKind::DTracking: return "d-tracking";
        case PolicyKind::Uniform: return "uniform";
        case PolicyKind::KlLucb: return "kl-lucb";
        case PolicyKind::KlElimination: return "kl-elimination";
        case PolicyKind::UGapEConfidence: return "ugape";
        case PolicyKind::UGapEBudget: return "ugape-budget";
        case PolicyKind::Sar: return "sar";
        case PolicyKind::OcbaSs: return "ocba-ss";
        case PolicyKind::OcbaSS: return "ocba-SS";
    }
    return "unknown";
}

inline PolicyKind policy_from_string(std::string_view name) {
    for (auto k : {PolicyKind::KktTs, PolicyKind::KktTsBudget, PolicyKind::DtTs, PolicyKind::CTracking,
                   PolicyKind::DTracking, PolicyKind::Uniform, PolicyKind::KlLucb, PolicyKind::KlElimination,
                   PolicyKind::UGapEConfidence, PolicyKind::UGapEBudget, PolicyKind::Sar, PolicyKind::OcbaSs,
                   PolicyKind::OcbaSS}) {
        if (name == to_string(k)) return k;
    }
    throw InvalidParameter("unknown policy '" + std::string(name) + "'");
}

// Policies that carry a stopping rule of their own.
inline bool has_own_stopping(PolicyKind kind) {
    return kind == PolicyKind::KlLucb || kind == PolicyKind::KlElimination || kind == PolicyKind::UGapEConfidence;
}

struct PolicyParams {
    PolicyKind kind = PolicyKind::KktTs;
    double delta = 0.1;                      // exploration rate for KL / UGapE bounds
    std::size_t dt_solver_iters = 100;       // DT-TS inner KKT-Tracking length
    std::size_t tracking_solver_iters = 50;  // C/D-Tracking warm-start iterations per round
    double ugape_a = 1.0;
    double ugape_H = 0.0;                    // 0: computed from the true gaps by the runner
    std::size_t budget = 0;                  // SAR, UGapE-budget
    std::size_t ocba_delta0 = 10;
    std::size_t ocba_batch = 10;

    bool operator==(const PolicyParams&) const = default;
};

// ---------------------------------------------------------------------------
// Step functions
// ---------------------------------------------------------------------------

inline std::size_t argmax_deficit(const std::vector<double>& target, const BanditState& state) {
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < target.size(); ++a) {
        const double v = target[a] - static_cast<double>(state.counts[a]);
        if (v > best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

// One KKT-TS decision: posterior draw, argmin pair at psi = T/t under the
// drawn means, then a coin with probability h_{i;j}. Draw order: K posterior
// samples, then one uniform.
inline std::size_t kkt_ts_step(const BanditState& state, std::size_t k, Rng& rng,
                               Objective objective = Objective::Confidence) {
    const auto draw = posterior_sample(state.posterior, rng);
    const auto inst = InstanceSpec::plug_in(state.family(), draw, k);
    const auto psi = state.proportions();
    const auto g = gamma(inst, psi, objective);
    const double h = sampling_fraction(inst, psi, g.argmin.top, g.argmin.bottom, objective);
    return uniform01(rng) < h ? g.argmin.top : g.argmin.bottom;
}

inline std::size_t dt_ts_step(const BanditState& state, std::size_t k, Rng& rng, std::size_t solver_iters = 100) {
    const auto draw = posterior_sample(state.posterior, rng);
    const auto inst = InstanceSpec::plug_in(state.family(), draw, k);
    KktTracker tracker(inst.arms(), inst.pair_count());
    tracker.run(inst, solver_iters);
    std::vector<double> target = tracker.psi();
    for (auto& x : target) x *= static_cast<double>(state.t);
    return argmax_deficit(target, state);
}

// L-infinity projection onto {psi in simplex : psi >= eps}:
// psi'_a = max(psi_a - lambda, eps) with lambda chosen so the sum is 1.
inline std::vector<double> clip_to_simplex(const std::vector<double>& psi, double eps) {
    const std::size_t K = psi.size();
    if (!(eps >= 0.0) || eps * static_cast<double>(K) > 1.0 + 1e-12) {
        throw InvalidParameter("clip level must lie in [0, 1/K]");
    }
    auto total = [&](double lambda) {
        double s = 0.0;
        for (double p : psi) s += std::max(p - lambda, eps);
        return s;
    };
    // total is nonincreasing in lambda; bracket then bisect.
    double lo = -1.0;
    double hi = 1.0;
    while (total(lo) < 1.0) lo *= 2.0;
    while (total(hi) > 1.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) > 1.0 ? lo : hi) = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    std::vector<double> out(K);
    for (std::size_t a = 0; a < K; ++a) out[a] = std::max(psi[a] - lambda, eps);
    return out;
}

inline double c_tracking_epsilon(std::size_t arms, std::size_t t) {
    const double K = static_cast<double>(arms);
    return 0.5 / std::sqrt(K * K + static_cast<double>(t));
}

// Accumulates the clipped plug-in target into state.cum_target, then plays
// argmax cum_target - T.
inline std::size_t c_tracking_step(BanditState& state, const std::vector<double>& plug_in_psi) {
    if (state.cum_target.size() != state.arms()) state.cum_target.assign(state.arms(), 0.0);
    const auto clipped = clip_to_simplex(plug_in_psi, c_tracking_epsilon(state.arms(), state.t));
    for (std::size_t a = 0; a < clipped.size(); ++a) state.cum_target[a] += clipped[a];
    return argmax_deficit(state.cum_target, state);
}

// Forced exploration of U = {a : T_a < sqrt(t) - K/2}; otherwise argmax t psi - T.
inline std::size_t d_tracking_step(const BanditState& state, const std::vector<double>& plug_in_psi) {
    const double bound = std::sqrt(static_cast<double>(state.t)) - 0.5 * static_cast<double>(state.arms());
    std::optional<std::size_t> forced;
    for (std::size_t a = 0; a < state.arms(); ++a) {
        if (static_cast<double>(state.counts[a]) < bound && (!forced || state.counts[a] < state.counts[*forced])) {
            forced = a;
        }
    }
    if (forced) return *forced;
    std::vector<double> target = plug_in_psi;
    for (auto& x : target) x *= static_cast<double>(state.t);
    return argmax_deficit(target, state);
}

inline std::size_t uniform_step(const BanditState& state) { return state.t % state.arms(); }

// ---------------------------------------------------------------------------
// Confidence bounds
// ---------------------------------------------------------------------------

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

// {q : T d(mean, q) <= beta}, by closed form (Gaussian) or bisection.
inline Interval kl_confidence_bounds(const BanditState& state, std::size_t arm, double beta) {
    if (state.counts.at(arm) == 0) throw StateError("confidence bounds of an unsampled arm");
    if (!(beta >= 0.0)) throw InvalidParameter("beta must be nonnegative");
    const RewardFamily& fam = state.family();
    const double n = static_cast<double>(state.counts[arm]);
    const double m = state.means[arm];
    if (fam.is_gaussian()) {
        const double r = std::sqrt(2.0 * fam.variances[arm] * beta / n);
        return {m - r, m + r};
    }
    const double level = beta / n;
    auto excess = [&](double q) { return kl_unchecked(fam, arm, m, q) - level; };
    auto bisect = [&](double inside, double outside) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (inside + outside);
            if (mid == inside || mid == outside) break;
            (excess(mid) <= 0.0 ? inside : outside) = mid;
        }
        return inside;
    };
    Interval out{m, m};
    if (beta == 0.0) return out;
    if (fam.kind == FamilyKind::Bernoulli) {
        out.upper = (m >= 1.0 || excess(1.0) <= 0.0) ? 1.0 : bisect(m, 1.0);
        out.lower = (m <= 0.0 || excess(0.0) <= 0.0) ? 0.0 : bisect(m, 0.0);
        return out;
    }
    // Poisson: d(m, q) grows without bound as q -> infinity and, for m > 0,
    // as q -> 0.
    double hi = std::max(1.0, 2.0 * m);
    while (excess(hi) <= 0.0) hi *= 2.0;
    out.upper = bisect(m, hi);
    out.lower = m <= 0.0 ? 0.0 : bisect(m, 0.0);
    return out;
}

inline std::vector<Interval> all_kl_bounds(const BanditState& state, double beta) {
    std::vector<Interval> out(state.arms());
    for (std::size_t a = 0; a < out.size(); ++a) out[a] = kl_confidence_bounds(state, a, beta);
    return out;
}

struct LucbDecision {
    std::size_t u = 0;  // most optimistic empirical-bottom arm
    std::size_t l = 0;  // most pessimistic empirical-top arm
    bool stop = false;
};

inline LucbDecision kl_lucb_step(const BanditState& state, std::size_t k, double beta) {
    const auto top = empirical_top_k(state, k);
    const auto bottom = complement(top, state.arms());
    const auto b = all_kl_bounds(state, beta);
    LucbDecision d;
    d.u = bottom.front();
    for (auto j : bottom) {
        if (b[j].upper > b[d.u].upper) d.u = j;
    }
    d.l = top.front();
    for (auto i : top) {
        if (b[i].lower < b[d.l].lower) d.l = i;
    }
    // Separation of the two critical intervals.
    d.stop = b[d.u].upper <= b[d.l].lower;
    return d;
}

// Racing state for KL-Elimination: selected S, eliminated E, remaining R.
struct EliminationSets {
    std::vector<std::size_t> selected;
    std::vector<std::size_t> eliminated;
    std::vector<std::size_t> remaining;

    static EliminationSets start(std::size_t arms) {
        EliminationSets s;
        s.remaining.resize(arms);
        std::iota(s.remaining.begin(), s.remaining.end(), std::size_t{0});
        return s;
    }
    bool done(std::size_t k) const { return remaining.size() + selected.size() <= k; }
};

// Applies one elimination test on the current statistics. Elimination never
// moves arms into S; it stops once |R| + |S| = k.
inline void kl_elimination_update(const BanditState& state, EliminationSets& sets, std::size_t k, double beta) {
    if (sets.selected.size() > k) throw StateError("selected set exceeds k");
    if (sets.done(k) || sets.remaining.empty()) return;
    const std::size_t k_left = k - sets.selected.size();
    std::vector<double> means(sets.remaining.size());
    for (std::size_t r = 0; r < means.size(); ++r) means[r] = state.means[sets.remaining[r]];
    const auto top_pos = top_k_indices(means, k_left);
    std::size_t a_w = 0;
    for (std::size_t r = 1; r < means.size(); ++r) {
        if (means[r] < means[a_w]) a_w = r;
    }
    std::optional<double> min_lower;
    for (auto p : top_pos) {
        const double L = kl_confidence_bounds(state, sets.remaining[p], beta).lower;
        if (!min_lower || L < *min_lower) min_lower = L;
    }
    const std::size_t worst = sets.remaining[a_w];
    const bool worst_in_top = std::find(top_pos.begin(), top_pos.end(), a_w) != top_pos.end();
    if (min_lower && !worst_in_top && kl_confidence_bounds(state, worst, beta).upper < *min_lower) {
        sets.eliminated.push_back(worst);
        sets.remaining.erase(sets.remaining.begin() + static_cast<std::ptrdiff_t>(a_w));
    }
}

inline std::vector<std::size_t> elimination_recommendation(const EliminationSets& sets) {
    std::vector<std::size_t> out = sets.selected;
    out.insert(out.end(), sets.remaining.begin(), sets.remaining.end());
    std::sort(out.begin(), out.end());
    return out;
}

enum class UGapEBounds { KlBeta, BudgetAH };

struct UGapEDecision {
    std::size_t arm = 0;
    bool stop = false;
    double b_max = 0.0;  // max over J of B_i
    std::vector<double> gap_index;
    std::vector<std::size_t> candidate;  // J: the k arms with smallest B
};

inline double ugape_budget_width(double a, std::size_t budget, double H, std::size_t count) {
    return std::sqrt(a * static_cast<double>(budget) / (4.0 * H * static_cast<double>(count)));
}

inline std::vector<Interval> ugape_bounds(const BanditState& state, UGapEBounds mode, double beta, double a,
                                          std::size_t budget, double H) {
    if (mode == UGapEBounds::KlBeta) return all_kl_bounds(state, beta);
    if (!(a > 0.0 && H > 0.0) || budget == 0) throw InvalidParameter("UGapE budget bounds need a, H and a budget");
    std::vector<Interval> out(state.arms());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double w = ugape_budget_width(a, budget, H, state.counts[i]);
        out[i] = {state.means[i] - w, state.means[i] + w};
    }
    return out;
}

// B_i = (k-th largest U over arms other than i) - L_i; J = k smallest B;
// sample the wider of u = argmax_{not J} U and l = argmin_{J} L.
inline UGapEDecision ugape_step(const BanditState& state, std::size_t k, const std::vector<Interval>& bounds) {
    state.require_all_sampled();
    const std::size_t K = state.arms();
    UGapEDecision d;
    d.gap_index.resize(K);
    std::vector<double> others;
    others.reserve(K);
    for (std::size_t i = 0; i < K; ++i) {
        others.clear();
        for (std::size_t a = 0; a < K; ++a) {
            if (a != i) others.push_back(bounds[a].upper);
        }
        std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end(),
                         std::greater<>());
        d.gap_index[i] = others[k - 1] - bounds[i].lower;
    }
    std::vector<double> neg(K);
    for (std::size_t i = 0; i < K; ++i) neg[i] = -d.gap_index[i];
    d.candidate = top_k_indices(neg, k);
    d.b_max = -std::numeric_limits<double>::infinity();
    for (auto i : d.candidate) d.b_max = std::max(d.b_max, d.gap_index[i]);
    const auto rest = complement(d.candidate, K);
    std::size_t u = rest.front();
    for (auto j : rest) {
        if (bounds[j].upper > bounds[u].upper) u = j;
    }
    std::size_t l = d.candidate.front();
    for (auto i : d.candidate) {
        if (bounds[i].lower < bounds[l].lower) l = i;
    }
    const double wu = bounds[u].upper - bounds[u].lower;
    const double wl = bounds[l].upper - bounds[l].lower;
    d.arm = wu > wl ? u : l;
    d.stop = d.b_max <= 0.0;
    return d;
}

// Successive Accepts and Rejects: cumulative per-arm sample targets n_p.
inline std::vector<std::size_t> sar_schedule(std::size_t arms, std::size_t budget) {
    if (arms < 2) throw InvalidParameter("SAR needs at least two arms");
    if (budget <= arms) throw InvalidParameter("SAR needs a budget larger than K");
    double log_bar = 0.5;
    for (std::size_t i = 2; i <= arms; ++i) log_bar += 1.0 / static_cast<double>(i);
    std::vector<std::size_t> n(arms - 1);
    for (std::size_t p = 1; p < arms; ++p) {
        const double v = static_cast<double>(budget - arms) / (log_bar * static_cast<double>(arms + 1 - p));
        n[p - 1] = static_cast<std::size_t>(std::ceil(v - 1e-12));
    }
    return n;
}

struct SarSets {
    std::vector<std::size_t> active;
    std::vector<std::size_t> accepted;
};

// Phase-end decision: remove the active arm with the largest empirical gap
// and accept it when it ranks inside the top k - |S|.
inline void sar_phase_end(const BanditState& state, SarSets& sets, std::size_t k) {
    const std::size_t k_left = k - sets.accepted.size();
    if (sets.active.empty()) return;
    if (k_left == 0) {
        sets.active.clear();
        return;
    }
    if (k_left >= sets.active.size()) {
        sets.accepted.insert(sets.accepted.end(), sets.active.begin(), sets.active.end());
        sets.active.clear();
        return;
    }
    std::vector<std::size_t> order = sets.active;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return state.means[a] > state.means[b]; });
    const double upper_ref = state.means[order[k_left]];      // (k'+1)-th mean
    const double lower_ref = state.means[order[k_left - 1]];  // k'-th mean
    std::size_t pick = 0;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < order.size(); ++r) {
        const double m = state.means[order[r]];
        const double gap = r < k_left ? m - upper_ref : lower_ref - m;
        if (gap > best_gap) {
            best_gap = gap;
            pick = r;
        }
    }
    const std::size_t arm = order[pick];
    sets.active.erase(std::find(sets.active.begin(), sets.active.end(), arm));
    if (pick < k_left) sets.accepted.push_back(arm);
}

enum class OcbaVariant { Ss, SS };

struct OcbaChoice {
    ArmPair pair;
    std::size_t arm = 0;
};

// Pair minimizing plug-in C at psi = T/t; the ss rule samples the top arm
// when sum_{top} T^2 < sum_{bottom} T^2, else the bottom arm.
inline OcbaChoice ocba_choose(const BanditState& state, std::size_t k, OcbaVariant variant, bool toggle) {
    const auto inst = empirical_instance(state, k);
    const auto g = gamma(inst, state.proportions());
    OcbaChoice c{g.argmin, g.argmin.top};
    if (variant == OcbaVariant::Ss) {
        double st = 0.0;
        double sb = 0.0;
        for (auto i : inst.top) st += static_cast<double>(state.counts[i]) * static_cast<double>(state.counts[i]);
        for (auto j : inst.bottom) sb += static_cast<double>(state.counts[j]) * static_cast<double>(state.counts[j]);
        c.arm = st < sb ? g.argmin.top : g.argmin.bottom;
    } else {
        c.arm = toggle ? g.argmin.bottom : g.argmin.top;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Policy objects
// ---------------------------------------------------------------------------

struct StepResult {
    std::vector<std::size_t> arms;  // pulled in order by the runner
    bool stop = false;              // own stopping rule fired (arms empty)
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyKind kind() const = 0;
    // Pulls per arm made by the runner before the first step.
    virtual std::size_t init_pulls() const { return 1; }
    virtual StepResult step(BanditState& state, Rng& rng) = 0;
    virtual std::vector<std::size_t> recommend(const BanditState& state) const { return empirical_top_k(state, k_); }
    virtual std::unique_ptr<Policy> clone() const = 0;

protected:
    explicit Policy(std::size_t k) : k_(k) {}
    std::size_t k_;
};

class KktTsPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<KktTsPolicy>(*this); }
    KktTsPolicy(std::size_t k, Objective objective) : Policy(k), objective_(objective) {}
    PolicyKind kind() const override {
        return objective_ == Objective::Budget ? PolicyKind::KktTsBudget : PolicyKind::KktTs;
    }
    StepResult step(BanditState& state, Rng& rng) override { return {{kkt_ts_step(state, k_, rng, objective_)}}; }

private:
    Objective objective_;
};

class DtTsPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<DtTsPolicy>(*this); }
    DtTsPolicy(std::size_t k, std::size_t iters) : Policy(k), iters_(iters) {}
    PolicyKind kind() const override { return PolicyKind::DtTs; }
    StepResult step(BanditState& state, Rng& rng) override { return {{dt_ts_step(state, k_, rng, iters_)}}; }

private:
    std::size_t iters_;
};

// C- and D-Tracking share a warm-started KKT-Tracking plug-in solver.
class TrackingPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<TrackingPolicy>(*this); }
    TrackingPolicy(std::size_t k, std::size_t arms, bool cumulative, std::size_t iters)
        : Policy(k), cumulative_(cumulative), iters_(iters), tracker_(arms, k * (arms - k)) {}
    PolicyKind kind() const override { return cumulative_ ? PolicyKind::CTracking : PolicyKind::DTracking; }
    StepResult step(BanditState& state, Rng&) override {
        tracker_.run(empirical_instance(state, k_), iters_);
        const auto& psi = tracker_.psi();
        return {{cumulative_ ? c_tracking_step(state, psi) : d_tracking_step(state, psi)}};
    }

private:
    bool cumulative_;
    std::size_t iters_;
    KktTracker tracker_;
};

class UniformPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<UniformPolicy>(*this); }
    explicit UniformPolicy(std::size_t k) : Policy(k) {}
    PolicyKind kind() const override { return PolicyKind::Uniform; }
    StepResult step(BanditState& state, Rng&) override { return {{uniform_step(state)}}; }
};

class KlLucbPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<KlLucbPolicy>(*this); }
    KlLucbPolicy(std::size_t k, double delta) : Policy(k), delta_(delta) {}
    PolicyKind kind() const override { return PolicyKind::KlLucb; }
    StepResult step(BanditState& state, Rng&) override {
        const auto d = kl_lucb_step(state, k_, exploration_rate(state.t, delta_));
        if (d.stop) return {{}, true};
        return {{d.u, d.l}};
    }

private:
    double delta_;
};

class KlEliminationPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<KlEliminationPolicy>(*this); }
    KlEliminationPolicy(std::size_t k, std::size_t arms, double delta)
        : Policy(k), delta_(delta), sets_(EliminationSets::start(arms)) {}
    PolicyKind kind() const override { return PolicyKind::KlElimination; }
    StepResult step(BanditState& state, Rng&) override {
        kl_elimination_update(state, sets_, k_, exploration_rate(state.t, delta_));
        if (sets_.done(k_)) return {{}, true};
        return {sets_.remaining};
    }
    std::vector<std::size_t> recommend(const BanditState& state) const override {
        if (sets_.done(k_)) return elimination_recommendation(sets_);
        return empirical_top_k(state, k_);
    }
    const EliminationSets& sets() const noexcept { return sets_; }

private:
    double delta_;
    EliminationSets sets_;
};

class UGapEPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<UGapEPolicy>(*this); }
    // Confidence mode when budget == 0.
    UGapEPolicy(std::size_t k, double delta, double a, std::size_t budget, double H)
        : Policy(k), delta_(delta), a_(a), budget_(budget), H_(H) {}
    PolicyKind kind() const override { return budget_ == 0 ? PolicyKind::UGapEConfidence : PolicyKind::UGapEBudget; }
    StepResult step(BanditState& state, Rng&) override {
        const auto mode = budget_ == 0 ? UGapEBounds::KlBeta : UGapEBounds::BudgetAH;
        const auto bounds = ugape_bounds(state, mode, exploration_rate(state.t, delta_), a_, budget_, H_);
        const auto d = ugape_step(state, k_, bounds);
        if (budget_ > 0) {
            // Fixed budget: keep the candidate set with the smallest B so far.
            if (d.b_max < best_b_) {
                best_b_ = d.b_max;
                best_set_ = d.candidate;
            }
            return {{d.arm}};
        }
        if (d.stop) {
            best_set_ = d.candidate;
            return {{}, true};
        }
        return {{d.arm}};
    }
    std::vector<std::size_t> recommend(const BanditState& state) const override {
        if (!best_set_.empty()) return best_set_;
        return empirical_top_k(state, k_);
    }

private:
    double delta_;
    double a_;
    std::size_t budget_;
    double H_;
    double best_b_ = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_set_;
};

class SarPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<SarPolicy>(*this); }
    SarPolicy(std::size_t k, std::size_t arms, std::size_t budget)
        : Policy(k), schedule_(sar_schedule(arms, budget)) {
        sets_.active.resize(arms);
        std::iota(sets_.active.begin(), sets_.active.end(), std::size_t{0});
    }
    PolicyKind kind() const override { return PolicyKind::Sar; }
    StepResult step(BanditState& state, Rng&) override {
        while (phase_ < schedule_.size() && !sets_.active.empty()) {
            const std::size_t target = std::max<std::size_t>(schedule_[phase_], 1);
            std::vector<std::size_t> batch;
            for (auto a : sets_.active) {
                for (std::size_t c = state.counts[a]; c < target; ++c) batch.push_back(a);
            }
            if (!batch.empty()) return {batch};
            sar_phase_end(state, sets_, k_);
            ++phase_;
        }
        if (!sets_.active.empty()) sar_phase_end(state, sets_, k_);
        return {{}, true};
    }
    std::vector<std::size_t> recommend(const BanditState& state) const override {
        // Truncated runs fill the remaining slots from the active set.
        std::vector<std::size_t> out = sets_.accepted;
        const std::size_t k_left = k_ - std::min(k_, out.size());
        if (k_left > 0 && !sets_.active.empty()) {
            std::vector<double> means(sets_.active.size());
            for (std::size_t r = 0; r < means.size(); ++r) means[r] = state.means[sets_.active[r]];
            for (auto p : top_k_indices(means, k_left)) out.push_back(sets_.active[p]);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    const SarSets& sets() const noexcept { return sets_; }
    const std::vector<std::size_t>& schedule() const noexcept { return schedule_; }

private:
    std::vector<std::size_t> schedule_;
    SarSets sets_;
    std::size_t phase_ = 0;
};

class OcbaPolicy final : public Policy {
public:
    std::unique_ptr<Policy> clone() const override { return std::make_unique<OcbaPolicy>(*this); }
    OcbaPolicy(std::size_t k, OcbaVariant variant, std::size_t delta0, std::size_t batch)
        : Policy(k), variant_(variant), delta0_(delta0), batch_(batch) {
        if (delta0 < 1 || batch < 1) throw InvalidParameter("OCBA needs delta0 >= 1 and n >= 1");
    }
    PolicyKind kind() const override { return variant_ == OcbaVariant::Ss ? PolicyKind::OcbaSs : PolicyKind::OcbaSS; }
    std::size_t init_pulls() const override { return delta0_; }
    StepResult step(BanditState& state, Rng&) override {
        const auto c = ocba_choose(state, k_, variant_, toggle_);
        toggle_ = !toggle_;
        return {std::vector<std::size_t>(batch_, c.arm)};
    }

private:
    OcbaVariant variant_;
    std::size_t delta0_;
    std::size_t batch_;
    bool toggle_ = false;
};

inline std::unique_ptr<Policy> make_policy(const PolicyParams& p, std::size_t arms, std::size_t k) {
    switch (p.kind) {
        case PolicyKind::KktTs: return std::make_unique<KktTsPolicy>(k, Objective::Confidence);
        case PolicyKind::KktTsBudget: return std::make_unique<KktTsPolicy>(k, Objective::Budget);
        case PolicyKind::DtTs: return std::make_unique<DtTsPolicy>(k, p.dt_solver_iters);
        case PolicyKind::CTracking: return std::make_unique<TrackingPolicy>(k, arms, true, p.tracking_solver_iters);
        case PolicyKind::DTracking: return std::make_unique<TrackingPolicy>(k, arms, false, p.tracking_solver_iters);
        case PolicyKind::Uniform: return std::make_unique<UniformPolicy>(k);
        case PolicyKind::KlLucb: return std::make_unique<KlLucbPolicy>(k, p.delta);
        case PolicyKind::KlElimination: return std::make_unique<KlEliminationPolicy>(k, arms, p.delta);
        case PolicyKind::UGapEConfidence: return std::make_unique<UGapEPolicy>(k, p.delta, p.ugape_a, 0, p.ugape_H);
        case PolicyKind::UGapEBudget:
            if (p.budget == 0) throw InvalidParameter("UGapE budget variant needs a budget");
            return std::make_unique<UGapEPolicy>(k, p.delta, p.ugape_a, p.budget, p.ugape_H);
        case PolicyKind::Sar: return std::make_unique<SarPolicy>(k, arms, p.budget);
        case PolicyKind::OcbaSs: return std::make_unique<OcbaPolicy>(k, OcbaVariant::Ss, p.ocba_delta0, p.ocba_batch);
        case PolicyKind::OcbaSS: return std::make_unique<OcbaPolicy>(k, OcbaVariant::SS, p.ocba_delta0, p.ocba_batch);
    }
    throw InvalidParameter("unknown policy");
}

}  // namespace topk
