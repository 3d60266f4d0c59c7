#pragma once

// Problem instances, allocations and the pairwise rate functions C_{i,j}
// (fixed confidence / posterior) and B_{i,j} (fixed budget) that define the
// optimal allocation problem  max_psi min_{i in top, j in bottom} C_{i,j}(psi).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "expfam.hpp"

namespace topk {

enum class Objective { Confidence, Budget };

struct ArmPair {
    std::size_t top = 0;
    std::size_t bottom = 0;
    bool operator==(const ArmPair&) const = default;
};

// Indices of the k largest values, ties broken toward the lower index,
// returned in increasing index order.
inline std::vector<std::size_t> top_k_indices(const std::vector<double>& values, std::size_t k) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

inline std::vector<std::size_t> complement(const std::vector<std::size_t>& subset, std::size_t n) {
    std::vector<bool> in(n, false);
    for (auto i : subset) in.at(i) = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!in[i]) out.push_back(i);
    }
    return out;
}

struct InstanceSpec {
    RewardFamily family;
    std::vector<double> theta;
    std::size_t k = 1;
    std::vector<std::size_t> top;     // increasing arm index
    std::vector<std::size_t> bottom;  // increasing arm index

    // Validated instance: k in [1, K), means in the family domain and a
    // strictly separated top-k set.
    static InstanceSpec make(RewardFamily family, std::vector<double> theta, std::size_t k) {
        const std::size_t K = theta.size();
        if (K < 2) throw InvalidInstance("need at least two arms");
        if (k < 1 || k >= K) throw InvalidInstance("k must satisfy 1 <= k < K");
        if (family.is_gaussian() && family.variances.size() != K) {
            throw InvalidInstance("Gaussian instance needs one variance per arm");
        }
        for (double t : theta) {
            try {
                validate_mean(family, t);
            } catch (const InvalidParameter& e) {
                throw InvalidInstance(e.what());
            }
        }
        InstanceSpec inst = partition(std::move(family), std::move(theta), k);
        double min_top = std::numeric_limits<double>::infinity();
        double max_bottom = -std::numeric_limits<double>::infinity();
        for (auto i : inst.top) min_top = std::min(min_top, inst.theta[i]);
        for (auto j : inst.bottom) max_bottom = std::max(max_bottom, inst.theta[j]);
        if (!(min_top > max_bottom)) throw InvalidInstance("top-k set is not unique");
        return inst;
    }

    // Unvalidated plug-in instance built from estimates (posterior draws,
    // sample means). Means are clamped into the natural domain and the top
    // set is the k largest with lower-index tie-breaking.
    static InstanceSpec plug_in(const RewardFamily& family, std::vector<double> theta, std::size_t k) {
        for (auto& t : theta) t = clamp_mean(family, t);
        return partition(family, std::move(theta), k);
    }

    std::size_t arms() const noexcept { return theta.size(); }
    std::size_t pair_count() const noexcept { return top.size() * bottom.size(); }

    ArmPair pair(std::size_t index) const { return {top[index / bottom.size()], bottom[index % bottom.size()]}; }

    std::size_t pair_index(ArmPair p) const {
        const auto a = std::find(top.begin(), top.end(), p.top);
        const auto b = std::find(bottom.begin(), bottom.end(), p.bottom);
        if (a == top.end() || b == bottom.end()) throw InvalidParameter("pair is not (top, bottom)");
        return static_cast<std::size_t>(a - top.begin()) * bottom.size() + static_cast<std::size_t>(b - bottom.begin());
    }

    bool is_top(std::size_t arm) const { return std::binary_search(top.begin(), top.end(), arm); }

private:
    static InstanceSpec partition(RewardFamily family, std::vector<double> theta, std::size_t k) {
        InstanceSpec inst;
        inst.family = std::move(family);
        inst.theta = std::move(theta);
        inst.k = k;
        inst.top = top_k_indices(inst.theta, k);
        inst.bottom = complement(inst.top, inst.theta.size());
        return inst;
    }
};

// A point on the K-simplex.
struct Allocation {
    std::vector<double> psi;

    static Allocation uniform(std::size_t arms) { return {std::vector<double>(arms, 1.0 / static_cast<double>(arms))}; }

    std::size_t size() const noexcept { return psi.size(); }
    double operator[](std::size_t i) const { return psi[i]; }

    void validate(double tol = 1e-9) const {
        double sum = 0.0;
        for (double p : psi) {
            if (!(p >= 0.0)) throw InvalidParameter("allocation has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) throw InvalidParameter("allocation does not sum to one");
    }
};

// A point on the simplex over (top, bottom) pairs, indexed as
// InstanceSpec::pair_index.
struct DualWeights {
    std::vector<double> mu;

    static DualWeights uniform(std::size_t pairs) { return {std::vector<double>(pairs, 1.0 / static_cast<double>(pairs))}; }
    static DualWeights vertex(std::size_t pairs, std::size_t index) {
        DualWeights w{std::vector<double>(pairs, 0.0)};
        w.mu.at(index) = 1.0;
        return w;
    }
    std::size_t size() const noexcept { return mu.size(); }
};

// ---------------------------------------------------------------------------
// Pair quantities
// ---------------------------------------------------------------------------

// Value and partial derivatives of one pair rate at weights (wi, wj).
//   value = wi * di + wj * dj,  di = d value / d wi,  dj = d value / d wj.
struct PairTerms {
    double value = 0.0;
    double di = 0.0;
    double dj = 0.0;
    bool degenerate = false;
};

namespace detail {

// Weighted transport point between arm i and arm j. For Gaussian arms the
// weights are precisions wi/sigma_i^2, which reduces to the plain weighted
// mean when variances are equal.
inline double weighted_mean(const RewardFamily& family, std::size_t i, std::size_t j, double ti, double tj, double wi,
                            double wj) {
    if (family.is_gaussian()) {
        const double pi = wi / family.variances[i];
        const double pj = wj / family.variances[j];
        return (pi * ti + pj * tj) / (pi + pj);
    }
    return (wi * ti + wj * tj) / (wi + wj);
}

inline PairTerms confidence_terms(const RewardFamily& family, std::size_t i, std::size_t j, double ti, double tj,
                                  double wi, double wj) {
    PairTerms out;
    if (!(wi + wj > 0.0)) {
        out.degenerate = true;
        return out;
    }
    if (family.is_gaussian()) {
        // Closed forms avoid cancellation in theta_bar.
        const double si = family.variances[i];
        const double sj = family.variances[j];
        const double diff = ti - tj;
        const double pi = wi / si;
        const double pj = wj / sj;
        const double denom = pi + pj;
        out.di = diff * diff * pj * pj / (2.0 * si * denom * denom);
        out.dj = diff * diff * pi * pi / (2.0 * sj * denom * denom);
        out.value = wi * out.di + wj * out.dj;
        return out;
    }
    const double bar = (wi * ti + wj * tj) / (wi + wj);
    out.di = kl_unchecked(family, i, ti, bar);
    out.dj = kl_unchecked(family, j, tj, bar);
    out.value = wi * out.di + wj * out.dj;
    return out;
}

inline double nat_unchecked(const RewardFamily& family, std::size_t arm, double theta) {
    switch (family.kind) {
        case FamilyKind::Gaussian: return theta / family.variances[arm];
        case FamilyKind::Bernoulli: {
            const double t = clamp_mean(family, theta);
            return std::log(t / (1.0 - t));
        }
        case FamilyKind::Poisson: return std::log(clamp_mean(family, theta));
    }
    return 0.0;
}

// B_{i,j}: psi_i d(theta_B, theta_i) + psi_j d(theta_B, theta_j) where theta_B
// is the mean whose natural parameter is the weighted natural-parameter mean.
inline PairTerms budget_terms(const RewardFamily& family, std::size_t i, std::size_t j, double ti, double tj, double wi,
                              double wj) {
    if (family.is_gaussian()) return confidence_terms(family, i, j, ti, tj, wi, wj);
    PairTerms out;
    if (!(wi + wj > 0.0)) {
        out.degenerate = true;
        return out;
    }
    const double ci = clamp_mean(family, ti);
    const double cj = clamp_mean(family, tj);
    const double eta = (wi * nat_unchecked(family, i, ci) + wj * nat_unchecked(family, j, cj)) / (wi + wj);
    double bar = family.kind == FamilyKind::Bernoulli
                     ? (eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta)))
                     : std::exp(eta);
    bar = clamp_mean(family, bar);
    out.di = kl_unchecked(family, i, bar, ci);
    out.dj = kl_unchecked(family, j, bar, cj);
    out.value = wi * out.di + wj * out.dj;
    return out;
}

inline PairTerms pair_terms(Objective objective, const RewardFamily& family, std::size_t i, std::size_t j, double ti,
                            double tj, double wi, double wj) {
    return objective == Objective::Confidence ? confidence_terms(family, i, j, ti, tj, wi, wj)
                                              : budget_terms(family, i, j, ti, tj, wi, wj);
}

}  // namespace detail

inline PairTerms pair_terms(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i, std::size_t j,
                            Objective objective = Objective::Confidence) {
    return detail::pair_terms(objective, inst.family, i, j, inst.theta[i], inst.theta[j], psi[i], psi[j]);
}

// Weighted mean between theta_i and theta_j; empty when psi_i + psi_j = 0.
inline std::optional<double> theta_bar(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i,
                                       std::size_t j) {
    if (!(psi.at(i) + psi.at(j) > 0.0)) return std::nullopt;
    return detail::weighted_mean(inst.family, i, j, inst.theta[i], inst.theta[j], psi[i], psi[j]);
}

inline double transport_cost(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i, std::size_t j) {
    return pair_terms(inst, psi, i, j, Objective::Confidence).value;
}

// (dC/dpsi_i, dC/dpsi_j). Throws on a degenerate pair.
inline std::pair<double, double> transport_cost_grad(const InstanceSpec& inst, const std::vector<double>& psi,
                                                     std::size_t i, std::size_t j) {
    const auto t = pair_terms(inst, psi, i, j, Objective::Confidence);
    if (t.degenerate) throw InvalidParameter("gradient of a pair with zero total allocation");
    return {t.di, t.dj};
}

inline double budget_rate(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i, std::size_t j) {
    return pair_terms(inst, psi, i, j, Objective::Budget).value;
}

inline std::pair<double, double> budget_rate_grad(const InstanceSpec& inst, const std::vector<double>& psi,
                                                  std::size_t i, std::size_t j) {
    const auto t = pair_terms(inst, psi, i, j, Objective::Budget);
    if (t.degenerate) throw InvalidParameter("gradient of a pair with zero total allocation");
    return {t.di, t.dj};
}

inline double pair_rate(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i, std::size_t j,
                        Objective objective) {
    return pair_terms(inst, psi, i, j, objective).value;
}

// Share h_{i;j} of the pair's effort attributed to arm i (1/2 when the rate is 0).
inline double sampling_fraction(const InstanceSpec& inst, const std::vector<double>& psi, std::size_t i, std::size_t j,
                                Objective objective = Objective::Confidence) {
    // Arguments may come in either order; the rate is symmetric in its pair.
    const bool i_top = inst.is_top(i);
    const std::size_t a = i_top ? i : j;
    const std::size_t b = i_top ? j : i;
    const auto t = pair_terms(inst, psi, a, b, objective);
    if (t.degenerate || !(t.value > 0.0)) return 0.5;
    const double share_a = psi[a] * t.di / t.value;
    return i_top ? share_a : 1.0 - share_a;
}

struct GammaValue {
    double value = 0.0;
    ArmPair argmin;
};

// min over top x bottom pairs; ties go to the lexicographically smallest pair.
inline GammaValue gamma(const InstanceSpec& inst, const std::vector<double>& psi,
                        Objective objective = Objective::Confidence) {
    GammaValue best{std::numeric_limits<double>::infinity(), {}};
    for (auto i : inst.top) {
        for (auto j : inst.bottom) {
            const double c = pair_rate(inst, psi, i, j, objective);
            if (c < best.value) best = {c, {i, j}};
        }
    }
    return best;
}

// Vector of all pair rates, indexed as InstanceSpec::pair_index.
inline std::vector<double> pair_rates(const InstanceSpec& inst, const std::vector<double>& psi,
                                      Objective objective = Objective::Confidence) {
    std::vector<double> out;
    out.reserve(inst.pair_count());
    for (auto i : inst.top) {
        for (auto j : inst.bottom) out.push_back(pair_rate(inst, psi, i, j, objective));
    }
    return out;
}

// Euclidean projection onto the probability simplex (sort and threshold).
inline Allocation project_simplex(const std::vector<double>& v) {
    if (v.empty()) return {};
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumsum = 0.0;
    double threshold = 0.0;
    for (std::size_t r = 0; r < sorted.size(); ++r) {
        cumsum += sorted[r];
        const double candidate = (cumsum - 1.0) / static_cast<double>(r + 1);
        if (sorted[r] - candidate > 0.0) threshold = candidate;
    }
    Allocation out{std::vector<double>(v.size())};
    for (std::size_t i = 0; i < v.size(); ++i) out.psi[i] = std::max(v[i] - threshold, 0.0);
    return out;
}

}  // namespace topk
