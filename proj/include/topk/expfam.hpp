#pragma once

// One-parameter canonical exponential-family reward models: KL divergence,
// natural-parameter maps, reward sampling and conjugate posteriors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace topk {

enum class FamilyKind { Gaussian, Bernoulli, Poisson };

inline std::string_view to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Gaussian: return "gaussian";
        case FamilyKind::Bernoulli: return "bernoulli";
        case FamilyKind::Poisson: return "poisson";
    }
    return "unknown";
}

inline FamilyKind family_from_string(std::string_view name) {
    if (name == "gaussian" || name == "normal") return FamilyKind::Gaussian;
    if (name == "bernoulli") return FamilyKind::Bernoulli;
    if (name == "poisson") return FamilyKind::Poisson;
    throw InvalidParameter("unknown reward family '" + std::string(name) + "'");
}

// Clamp applied to plug-in means before natural parameters are taken.
inline constexpr double kMeanClamp = 1e-9;

struct RewardFamily {
    FamilyKind kind = FamilyKind::Gaussian;
    // Per-arm variances; Gaussian only.
    std::vector<double> variances;

    static RewardFamily gaussian(std::vector<double> variances) {
        RewardFamily f{FamilyKind::Gaussian, std::move(variances)};
        for (double v : f.variances) {
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter("Gaussian variances must be positive");
        }
        return f;
    }
    static RewardFamily gaussian(std::size_t arms, double variance) {
        return gaussian(std::vector<double>(arms, variance));
    }
    static RewardFamily bernoulli() { return {FamilyKind::Bernoulli, {}}; }
    static RewardFamily poisson() { return {FamilyKind::Poisson, {}}; }

    bool is_gaussian() const noexcept { return kind == FamilyKind::Gaussian; }

    double variance(std::size_t arm) const {
        if (kind != FamilyKind::Gaussian) return 1.0;
        if (arm >= variances.size()) throw InvalidParameter("arm index outside the variance vector");
        return variances[arm];
    }

    bool operator==(const RewardFamily&) const = default;
};

// Throws unless theta lies in the family's mean domain.
inline void validate_mean(const RewardFamily& family, double theta) {
    if (!std::isfinite(theta)) throw InvalidParameter("mean must be finite");
    switch (family.kind) {
        case FamilyKind::Gaussian: return;
        case FamilyKind::Bernoulli:
            if (theta < 0.0 || theta > 1.0) throw InvalidParameter("Bernoulli mean outside [0,1]");
            return;
        case FamilyKind::Poisson:
            if (theta <= 0.0) throw InvalidParameter("Poisson mean must be positive");
            return;
    }
}

// Maps a plug-in mean into the interior of the natural domain.
inline double clamp_mean(const RewardFamily& family, double theta) noexcept {
    switch (family.kind) {
        case FamilyKind::Bernoulli: return std::clamp(theta, kMeanClamp, 1.0 - kMeanClamp);
        case FamilyKind::Poisson: return std::max(theta, kMeanClamp);
        case FamilyKind::Gaussian: break;
    }
    return theta;
}

namespace detail {

// x log(x / y) with 0 log 0 = 0.
inline double xlogx_over_y(double x, double y) {
    if (x == 0.0) return 0.0;
    if (y == 0.0) return std::numeric_limits<double>::infinity();
    return x * std::log(x / y);
}

}  // namespace detail

// Kullback-Leibler divergence d(theta1, theta2) between two members of the
// family indexed by their means.
inline double kl(const RewardFamily& family, std::size_t arm, double theta1, double theta2) {
    validate_mean(family, theta1);
    validate_mean(family, theta2);
    switch (family.kind) {
        case FamilyKind::Gaussian: {
            const double diff = theta1 - theta2;
            return diff * diff / (2.0 * family.variance(arm));
        }
        case FamilyKind::Bernoulli: {
            if (theta1 == theta2) return 0.0;
            const double v = detail::xlogx_over_y(theta1, theta2) +
                             detail::xlogx_over_y(1.0 - theta1, 1.0 - theta2);
            return std::max(v, 0.0);
        }
        case FamilyKind::Poisson: {
            if (theta1 == theta2) return 0.0;
            return std::max(theta2 - theta1 + theta1 * std::log(theta1 / theta2), 0.0);
        }
    }
    return 0.0;
}

// Unchecked KL for hot loops whose arguments are already inside the domain.
inline double kl_unchecked(const RewardFamily& family, std::size_t arm, double theta1, double theta2) noexcept {
    switch (family.kind) {
        case FamilyKind::Gaussian: {
            const double diff = theta1 - theta2;
            return diff * diff / (2.0 * family.variances[arm]);
        }
        case FamilyKind::Bernoulli: {
            if (theta1 == theta2) return 0.0;
            const double v = detail::xlogx_over_y(theta1, theta2) +
                             detail::xlogx_over_y(1.0 - theta1, 1.0 - theta2);
            return v > 0.0 ? v : 0.0;
        }
        case FamilyKind::Poisson: {
            if (theta1 == theta2) return 0.0;
            if (theta1 == 0.0) return theta2;
            const double v = theta2 - theta1 + theta1 * std::log(theta1 / theta2);
            return v > 0.0 ? v : 0.0;
        }
    }
    return 0.0;
}

inline double nat_param(const RewardFamily& family, std::size_t arm, double theta) {
    validate_mean(family, theta);
    switch (family.kind) {
        case FamilyKind::Gaussian: return theta / family.variance(arm);
        case FamilyKind::Bernoulli:
            if (theta == 0.0 || theta == 1.0) {
                throw InvalidParameter("Bernoulli mean on the boundary has an infinite natural parameter");
            }
            return std::log(theta / (1.0 - theta));
        case FamilyKind::Poisson: return std::log(theta);
    }
    return 0.0;
}

inline double mean_from_nat(const RewardFamily& family, std::size_t arm, double eta) {
    if (!std::isfinite(eta)) throw InvalidParameter("natural parameter must be finite");
    switch (family.kind) {
        case FamilyKind::Gaussian: return family.variance(arm) * eta;
        case FamilyKind::Bernoulli:
            return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
        case FamilyKind::Poisson: return std::exp(eta);
    }
    return 0.0;
}

// Log-partition function A(eta).
inline double log_partition(const RewardFamily& family, std::size_t arm, double eta) {
    switch (family.kind) {
        case FamilyKind::Gaussian: return 0.5 * family.variance(arm) * eta * eta;
        case FamilyKind::Bernoulli: return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        case FamilyKind::Poisson: return std::exp(eta);
    }
    return 0.0;
}

inline double sample_reward(const RewardFamily& family, std::size_t arm, double theta, Rng& rng) {
    switch (family.kind) {
        case FamilyKind::Gaussian:
            return std::normal_distribution<double>(theta, std::sqrt(family.variance(arm)))(rng);
        case FamilyKind::Bernoulli:
            if (theta < 0.0 || theta > 1.0) throw InvalidParameter("Bernoulli mean outside [0,1]");
            return std::bernoulli_distribution(theta)(rng) ? 1.0 : 0.0;
        case FamilyKind::Poisson:
            if (!(theta > 0.0)) throw InvalidParameter("Poisson mean must be positive");
            return static_cast<double>(std::poisson_distribution<long long>(theta)(rng));
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Conjugate posteriors
// ---------------------------------------------------------------------------

// Hyperparameters of one arm's posterior.
//   Gaussian:  a = observation count, b = mean of observations (flat prior)
//   Bernoulli: Beta(a, b)
//   Poisson:   Gamma(shape = a, rate = b)
struct ArmPosterior {
    double a = 0.0;
    double b = 0.0;
    bool operator==(const ArmPosterior&) const = default;
};

// Conjugate prior for Bernoulli (Beta) and Poisson (Gamma) arms.
struct ConjugatePrior {
    double a = 1.0;
    double b = 1.0;
};

struct PosteriorState {
    RewardFamily family;
    std::vector<ArmPosterior> arms;

    std::size_t size() const noexcept { return arms.size(); }

    bool proper(std::size_t arm) const {
        const auto& p = arms.at(arm);
        if (family.is_gaussian()) return p.a >= 1.0;
        return p.a > 0.0 && p.b > 0.0;
    }

    // In-place conjugate update.
    void observe(std::size_t arm, double reward) {
        auto& p = arms.at(arm);
        switch (family.kind) {
            case FamilyKind::Gaussian:
                p.a += 1.0;
                p.b += (reward - p.b) / p.a;
                break;
            case FamilyKind::Bernoulli:
                if (reward != 0.0 && reward != 1.0) throw InvalidParameter("Bernoulli reward must be 0 or 1");
                p.a += reward;
                p.b += 1.0 - reward;
                break;
            case FamilyKind::Poisson:
                if (reward < 0.0 || reward != std::floor(reward)) {
                    throw InvalidParameter("Poisson reward must be a non-negative integer");
                }
                p.a += reward;
                p.b += 1.0;
                break;
        }
    }

    bool operator==(const PosteriorState&) const = default;
};

inline PosteriorState make_posterior(const RewardFamily& family, std::size_t arms, ConjugatePrior prior = {}) {
    if (!family.is_gaussian() && !(prior.a > 0.0 && prior.b > 0.0)) {
        throw InvalidParameter("conjugate prior hyperparameters must be positive");
    }
    PosteriorState state{family, {}};
    const ArmPosterior init = family.is_gaussian() ? ArmPosterior{0.0, 0.0} : ArmPosterior{prior.a, prior.b};
    state.arms.assign(arms, init);
    return state;
}

inline PosteriorState posterior_update(PosteriorState state, std::size_t arm, double reward) {
    state.observe(arm, reward);
    return state;
}

namespace detail {

using quiet_policy = boost::math::policies::policy<
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::promote_double<false>>;

inline void require_proper(const PosteriorState& state, std::size_t arm) {
    if (!state.proper(arm)) throw StateError("posterior of arm " + std::to_string(arm) + " is improper");
}

inline double gamma_draw(double shape, Rng& rng) {
    return std::gamma_distribution<double>(shape, 1.0)(rng);
}

}  // namespace detail

inline double posterior_mean(const PosteriorState& state, std::size_t arm) {
    detail::require_proper(state, arm);
    const auto& p = state.arms[arm];
    switch (state.family.kind) {
        case FamilyKind::Gaussian: return p.b;
        case FamilyKind::Bernoulli: return p.a / (p.a + p.b);
        case FamilyKind::Poisson: return p.a / p.b;
    }
    return 0.0;
}

inline double posterior_sd(const PosteriorState& state, std::size_t arm) {
    detail::require_proper(state, arm);
    const auto& p = state.arms[arm];
    switch (state.family.kind) {
        case FamilyKind::Gaussian: return std::sqrt(state.family.variance(arm) / p.a);
        case FamilyKind::Bernoulli: {
            const double n = p.a + p.b;
            return std::sqrt(p.a * p.b / (n * n * (n + 1.0)));
        }
        case FamilyKind::Poisson: return std::sqrt(p.a) / p.b;
    }
    return 0.0;
}

inline double posterior_sample_arm(const PosteriorState& state, std::size_t arm, Rng& rng) {
    detail::require_proper(state, arm);
    const auto& p = state.arms[arm];
    switch (state.family.kind) {
        case FamilyKind::Gaussian:
            return std::normal_distribution<double>(p.b, std::sqrt(state.family.variance(arm) / p.a))(rng);
        case FamilyKind::Bernoulli: {
            const double x = detail::gamma_draw(p.a, rng);
            const double y = detail::gamma_draw(p.b, rng);
            if (x + y == 0.0) return p.a >= p.b ? 1.0 : 0.0;
            return x / (x + y);
        }
        case FamilyKind::Poisson: return detail::gamma_draw(p.a, rng) / p.b;
    }
    return 0.0;
}

// Independent draw of every arm's mean, in arm order.
inline std::vector<double> posterior_sample(const PosteriorState& state, Rng& rng) {
    std::vector<double> out(state.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = posterior_sample_arm(state, i, rng);
    return out;
}

inline double posterior_cdf(const PosteriorState& state, std::size_t arm, double x) {
    detail::require_proper(state, arm);
    const auto& p = state.arms[arm];
    switch (state.family.kind) {
        case FamilyKind::Gaussian: {
            const double z = (x - p.b) / std::sqrt(state.family.variance(arm) / p.a);
            return 0.5 * std::erfc(-z / std::sqrt(2.0));
        }
        case FamilyKind::Bernoulli:
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            return boost::math::ibeta(p.a, p.b, x, detail::quiet_policy());
        case FamilyKind::Poisson:
            if (x <= 0.0) return 0.0;
            return boost::math::gamma_p(p.a, p.b * x, detail::quiet_policy());
    }
    return 0.0;
}

// 1 - cdf, evaluated without cancellation in the upper tail.
inline double posterior_sf(const PosteriorState& state, std::size_t arm, double x) {
    detail::require_proper(state, arm);
    const auto& p = state.arms[arm];
    switch (state.family.kind) {
        case FamilyKind::Gaussian: {
            const double z = (x - p.b) / std::sqrt(state.family.variance(arm) / p.a);
            return 0.5 * std::erfc(z / std::sqrt(2.0));
        }
        case FamilyKind::Bernoulli:
            if (x <= 0.0) return 1.0;
            if (x >= 1.0) return 0.0;
            return boost::math::ibetac(p.a, p.b, x, detail::quiet_policy());
        case FamilyKind::Poisson:
            if (x <= 0.0) return 1.0;
            return boost::math::gamma_q(p.a, p.b * x, detail::quiet_policy());
    }
    return 0.0;
}

inline double posterior_pdf(const PosteriorState& state, std::size_t arm, double x) {
    detail::require_proper(state, arm);
    const auto& p = state.arms[arm];
    switch (state.family.kind) {
        case FamilyKind::Gaussian: {
            const double sd = std::sqrt(state.family.variance(arm) / p.a);
            const double z = (x - p.b) / sd;
            return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
        }
        case FamilyKind::Bernoulli:
            if (x < 0.0 || x > 1.0) return 0.0;
            if ((x == 0.0 && p.a < 1.0) || (x == 1.0 && p.b < 1.0)) return std::numeric_limits<double>::infinity();
            return boost::math::ibeta_derivative(p.a, p.b, x, detail::quiet_policy());
        case FamilyKind::Poisson:
            if (x < 0.0) return 0.0;
            if (x == 0.0 && p.a < 1.0) return std::numeric_limits<double>::infinity();
            return p.b * boost::math::gamma_p_derivative(p.a, p.b * x, detail::quiet_policy());
    }
    return 0.0;
}

}  // namespace topk
