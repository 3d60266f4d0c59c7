#pragma once

// Posterior probability that a given k-set is the top-k set, as a
// one-dimensional integral over the smallest top-set draw.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "allocation.hpp"
#include "errors.hpp"
#include "expfam.hpp"

namespace topk {

namespace detail {

// Adaptive Simpson on [a, b] with absolute tolerance eps.
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                                   double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps,
                               int max_depth = 40) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, eps, max_depth);
}

// Integral over [lo, hi] split into panels; the tolerance is relative to a
// coarse first-pass estimate so tiny integrals keep full relative accuracy.
inline double integrate_panels(const std::function<double(double)>& f, double lo, double hi, std::size_t panels,
                               double rel_tol) {
    if (!(hi > lo) || panels == 0) return 0.0;
    const double w = (hi - lo) / static_cast<double>(panels);
    double coarse = 0.0;
    std::vector<double> est(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = lo + w * static_cast<double>(p);
        const double b = a + w;
        const double q1 = a + 0.25 * w;
        const double q3 = a + 0.75 * w;
        est[p] = w / 12.0 * (f(a) + 4.0 * f(q1) + 2.0 * f(a + 0.5 * w) + 4.0 * f(q3) + f(b));
        coarse += std::abs(est[p]);
    }
    if (coarse == 0.0) return 0.0;
    const double eps = rel_tol * coarse / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        // Panels far below the bulk cannot move the result.
        if (std::abs(est[p]) < 1e-6 * eps) continue;
        const double a = lo + w * static_cast<double>(p);
        total += adaptive_simpson(f, a, a + w, eps);
    }
    return total;
}

struct PosteriorIntegralOptions {
    double width_sd = 40.0;       // support half-width in posterior standard deviations
    double panel_sd = 0.5;        // panel width in units of the smallest sd
    std::size_t max_panels = 4000;
    double rel_tol = 1e-9;
};

// P(top set is wrong) = integral of g(x) (1 - prod_{j in J} F_j(x)) dx, where g
// is the density of min_{i in I} of the posterior draws.
inline double posterior_prob_incorrect(const PosteriorState& post, const std::vector<std::size_t>& topset,
                                       const PosteriorIntegralOptions& opt = {}) {
    const std::size_t K = post.size();
    if (topset.empty() || topset.size() >= K) throw InvalidParameter("top set must be a proper nonempty subset");
    for (std::size_t a = 0; a < K; ++a) {
        if (!post.proper(a)) throw StateError("posterior of arm " + std::to_string(a) + " is improper");
    }
    std::vector<std::size_t> top = topset;
    std::sort(top.begin(), top.end());
    const auto bottom = complement(top, K);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double sd_min = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < K; ++a) {
        const double m = posterior_mean(post, a);
        const double s = posterior_sd(post, a);
        lo = std::min(lo, m - opt.width_sd * s);
        hi = std::max(hi, m + opt.width_sd * s);
        sd_min = std::min(sd_min, s);
    }
    if (post.family.kind == FamilyKind::Bernoulli) {
        lo = std::max(lo, 0.0);
        hi = std::min(hi, 1.0);
    } else if (post.family.kind == FamilyKind::Poisson) {
        lo = std::max(lo, 0.0);
    }
    const auto panels = static_cast<std::size_t>(
        std::clamp(std::ceil((hi - lo) / (opt.panel_sd * sd_min)), 8.0, static_cast<double>(opt.max_panels)));

    auto integrand = [&](double x) {
        // log survival of each top arm; g = sum_i f_i prod_{i' != i} S_{i'}.
        double log_surv_all = 0.0;
        double ratio_sum = 0.0;
        for (auto i : top) {
            const double s = posterior_sf(post, i, x);
            const double f = posterior_pdf(post, i, x);
            if (s <= 0.0) return 0.0;
            log_surv_all += std::log(s);
            ratio_sum += f / s;
        }
        const double g = std::exp(log_surv_all) * ratio_sum;
        if (g == 0.0 || !std::isfinite(g)) return 0.0;
        double log_cdf = 0.0;
        for (auto j : bottom) {
            const double F = posterior_cdf(post, j, x);
            log_cdf += F > 0.5 ? std::log1p(-posterior_sf(post, j, x)) : std::log(F);
        }
        return g * -std::expm1(log_cdf);
    };
    const double v = integrate_panels(integrand, lo, hi, panels, opt.rel_tol);
    return std::clamp(v, 0.0, 1.0);
}

inline double posterior_prob_correct(const PosteriorState& post, const std::vector<std::size_t>& topset,
                                     const PosteriorIntegralOptions& opt = {}) {
    return 1.0 - posterior_prob_incorrect(post, topset, opt);
}

}  // namespace topk
