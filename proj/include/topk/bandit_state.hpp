#pragma once

// Sequential learning state shared by every sampling rule.

#include <cstddef>
#include <vector>

#include "allocation.hpp"
#include "errors.hpp"
#include "expfam.hpp"

namespace topk {

struct BanditState {
    std::size_t t = 0;
    std::vector<std::size_t> counts;
    std::vector<double> sums;
    std::vector<double> means;
    PosteriorState posterior;
    std::vector<double> cum_target;  // C-Tracking only

    static BanditState make(const RewardFamily& family, std::size_t arms, ConjugatePrior prior = {}) {
        BanditState s;
        s.counts.assign(arms, 0);
        s.sums.assign(arms, 0.0);
        s.means.assign(arms, 0.0);
        s.posterior = make_posterior(family, arms, prior);
        return s;
    }

    std::size_t arms() const noexcept { return counts.size(); }
    const RewardFamily& family() const noexcept { return posterior.family; }

    void observe(std::size_t arm, double reward) {
        posterior.observe(arm, reward);
        ++t;
        ++counts.at(arm);
        sums[arm] += reward;
        means[arm] = sums[arm] / static_cast<double>(counts[arm]);
    }

    bool all_sampled() const noexcept {
        for (auto c : counts) {
            if (c == 0) return false;
        }
        return true;
    }

    void require_all_sampled() const {
        if (!all_sampled()) throw StateError("every arm must be sampled at least once");
    }

    // Allocation T_i / t.
    std::vector<double> proportions() const {
        std::vector<double> psi(counts.size(), 0.0);
        if (t == 0) return psi;
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = static_cast<double>(counts[i]) / static_cast<double>(t);
        return psi;
    }

    std::vector<double> counts_real() const { return {counts.begin(), counts.end()}; }
};

// Indices of the k largest sample means (ties toward lower index), increasing.
inline std::vector<std::size_t> empirical_top_k(const BanditState& state, std::size_t k) {
    state.require_all_sampled();
    return top_k_indices(state.means, k);
}

// Plug-in problem at the sample means.
inline InstanceSpec empirical_instance(const BanditState& state, std::size_t k) {
    state.require_all_sampled();
    return InstanceSpec::plug_in(state.family(), state.means, k);
}

}  // namespace topk
