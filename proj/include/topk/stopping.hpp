#pragma once

// Chernoff GLR stopping for fixed-confidence top-k identification.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "allocation.hpp"
#include "bandit_state.hpp"
#include "errors.hpp"

namespace topk {

enum class ThresholdKind { Heuristic, Theoretical };

struct StoppingConfig {
    ThresholdKind kind = ThresholdKind::Heuristic;
    double delta = 0.1;
    double c = 1.0;      // theoretical only; 1 makes delta-correctness heuristic
    double alpha = 1.5;  // theoretical only

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("delta must lie in (0, 1)");
        if (kind == ThresholdKind::Theoretical && !(alpha > 1.0 && c > 0.0)) {
            throw InvalidParameter("theoretical threshold needs alpha > 1 and C > 0");
        }
    }
};

inline constexpr std::size_t kDefaultRoundCap = 10000000;

// Exploration rate log((log t + 1)/delta).
inline double exploration_rate(std::size_t t, double delta) {
    const double td = std::max<double>(static_cast<double>(t), 1.0);
    return std::log((std::log(td) + 1.0) / delta);
}

inline double threshold(const StoppingConfig& config, std::size_t t) {
    if (config.kind == ThresholdKind::Heuristic) return exploration_rate(t, config.delta);
    const double td = std::max<double>(static_cast<double>(t), 1.0);
    return std::log(config.c / config.delta) + config.alpha * std::log(td);
}

struct ChernoffValue {
    double z = 0.0;
    ArmPair argmin;
};

// Z_t = min over (empirical top) x (empirical bottom) of
// T_i d(mean_i, m_ij) + T_j d(mean_j, m_ij), i.e. t * Gamma(means, T/t).
inline ChernoffValue chernoff_statistic(const BanditState& state, std::size_t k) {
    const auto inst = empirical_instance(state, k);
    const auto g = gamma(inst, state.counts_real(), Objective::Confidence);
    return {g.value, g.argmin};
}

inline bool should_stop(const BanditState& state, std::size_t k, const StoppingConfig& config) {
    return chernoff_statistic(state, k).z > threshold(config, state.t);
}

struct GapSummary {
    std::vector<double> gaps;
    double H = 0.0;  // sum of gap^-2
};

// Delta_i = theta_i - theta_(k+1) for top arms, theta_(k) - theta_j for bottom arms.
inline GapSummary gaps_and_H(const InstanceSpec& inst) {
    double kth = std::numeric_limits<double>::infinity();
    double next = -std::numeric_limits<double>::infinity();
    for (auto i : inst.top) kth = std::min(kth, inst.theta[i]);
    for (auto j : inst.bottom) next = std::max(next, inst.theta[j]);
    if (!(kth > next)) throw InvalidInstance("top-k set is not unique");
    GapSummary out;
    out.gaps.resize(inst.arms());
    for (std::size_t a = 0; a < inst.arms(); ++a) {
        out.gaps[a] = inst.is_top(a) ? inst.theta[a] - next : kth - inst.theta[a];
        out.H += 1.0 / (out.gaps[a] * out.gaps[a]);
    }
    return out;
}

}  // namespace topk
