#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "topk/expfam.hpp"
#include "topk/rng.hpp"

namespace {

using namespace topk;

const RewardFamily kGauss = RewardFamily::gaussian(1, 0.25);
const RewardFamily kBern = RewardFamily::bernoulli();
const RewardFamily kPois = RewardFamily::poisson();

// Poisson KL by direct summation of p1(y) log(p1(y)/p2(y)).
double poisson_kl_series(double l1, double l2) {
    double total = 0.0;
    double logp1 = -l1;  // log p1(0)
    for (int y = 0; y < 400; ++y) {
        if (y > 0) logp1 += std::log(l1) - std::log(static_cast<double>(y));
        const double log_ratio = -l1 + l2 + y * (std::log(l1) - std::log(l2));
        total += std::exp(logp1) * log_ratio;
    }
    return total;
}

double random_mean(const RewardFamily& f, std::mt19937_64& g) {
    switch (f.kind) {
        case FamilyKind::Gaussian: return std::uniform_real_distribution<double>(-2.0, 2.0)(g);
        case FamilyKind::Bernoulli: return std::uniform_real_distribution<double>(0.02, 0.98)(g);
        case FamilyKind::Poisson: return std::uniform_real_distribution<double>(0.1, 6.0)(g);
    }
    return 0.0;
}

TEST(Kl, GaussianClosedForm) { EXPECT_NEAR(kl(kGauss, 0, 0.5, 0.0), 0.5, 1e-15); }

TEST(Kl, ZeroOnDiagonal) {
    for (const auto* f : {&kGauss, &kBern, &kPois}) {
        EXPECT_EQ(kl(*f, 0, 0.3, 0.3), 0.0);
    }
    EXPECT_EQ(kl(kBern, 0, 0.0, 0.0), 0.0);
    EXPECT_EQ(kl(kBern, 0, 1.0, 1.0), 0.0);
}

TEST(Kl, BernoulliClosedFormAndLikelihoodRatio) {
    const double expected = 0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4);
    EXPECT_NEAR(kl(kBern, 0, 0.8, 0.6), expected, 1e-15);
    // Expected log-likelihood ratio over y in {0,1}, summed the other way round.
    const double llr = 0.8 * (std::log(0.8) - std::log(0.6)) + 0.2 * (std::log1p(-0.8) - std::log1p(-0.6));
    EXPECT_NEAR(kl(kBern, 0, 0.8, 0.6), llr, 1e-14);
}

TEST(Kl, BernoulliBoundaryConvention) {
    EXPECT_NEAR(kl(kBern, 0, 0.0, 0.5), std::log(2.0), 1e-15);
    EXPECT_NEAR(kl(kBern, 0, 1.0, 0.25), std::log(4.0), 1e-15);
    EXPECT_TRUE(std::isinf(kl(kBern, 0, 0.5, 0.0)));
}

TEST(Kl, PoissonAgainstSeries) {
    for (auto [a, b] : {std::pair{2.0, 1.0}, {0.5, 3.0}, {4.0, 4.5}}) {
        EXPECT_NEAR(kl(kPois, 0, a, b), poisson_kl_series(a, b), 1e-10);
    }
}

TEST(Kl, DomainErrors) {
    EXPECT_THROW(kl(kPois, 0, 0.0, 1.0), InvalidParameter);
    EXPECT_THROW(kl(kPois, 0, 1.0, -1.0), InvalidParameter);
    EXPECT_THROW(kl(kBern, 0, 1.2, 0.5), InvalidParameter);
}

TEST(KlProperty, PositiveOffDiagonal) {
    std::mt19937_64 g(1);
    for (const auto* f : {&kGauss, &kBern, &kPois}) {
        for (int n = 0; n < 200; ++n) {
            const double a = random_mean(*f, g);
            const double b = random_mean(*f, g);
            if (a == b) continue;
            EXPECT_GT(kl(*f, 0, a, b), 0.0);
        }
    }
}

TEST(KlProperty, BregmanIdentity) {
    std::mt19937_64 g(2);
    for (const auto* f : {&kGauss, &kBern, &kPois}) {
        for (int n = 0; n < 200; ++n) {
            const double t1 = random_mean(*f, g);
            const double t2 = random_mean(*f, g);
            const double e1 = nat_param(*f, 0, t1);
            const double e2 = nat_param(*f, 0, t2);
            const double bregman = log_partition(*f, 0, e2) - log_partition(*f, 0, e1) - t1 * (e2 - e1);
            EXPECT_NEAR(kl(*f, 0, t1, t2), bregman, 1e-10);
        }
    }
}

TEST(KlProperty, DerivativeInFirstArgument) {
    std::mt19937_64 g(3);
    const double h = 1e-5;
    for (const auto* f : {&kGauss, &kBern, &kPois}) {
        for (int n = 0; n < 100; ++n) {
            const double t1 = random_mean(*f, g);
            const double t2 = random_mean(*f, g);
            if (std::abs(t1 - t2) < 0.05) continue;
            const double fd = (kl(*f, 0, t1 + h, t2) - kl(*f, 0, t1 - h, t2)) / (2.0 * h);
            const double exact = nat_param(*f, 0, t1) - nat_param(*f, 0, t2);
            EXPECT_NEAR(fd, exact, 1e-6 * std::abs(exact));
        }
    }
}

TEST(NatParam, FixedPointsAndRoundTrip) {
    EXPECT_EQ(nat_param(kBern, 0, 0.5), 0.0);
    EXPECT_EQ(nat_param(kPois, 0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(nat_param(kGauss, 0, 0.5), 2.0);
    std::mt19937_64 g(4);
    for (const auto* f : {&kGauss, &kBern, &kPois}) {
        for (int n = 0; n < 100; ++n) {
            const double t = random_mean(*f, g);
            EXPECT_NEAR(mean_from_nat(*f, 0, nat_param(*f, 0, t)), t, 1e-12);
            const double eta = std::uniform_real_distribution<double>(-3.0, 3.0)(g);
            EXPECT_NEAR(nat_param(*f, 0, mean_from_nat(*f, 0, eta)), eta, 1e-12);
        }
    }
    EXPECT_THROW(nat_param(kBern, 0, 0.0), InvalidParameter);
    EXPECT_THROW(nat_param(kBern, 0, 1.0), InvalidParameter);
}

TEST(Clamp, PlugInMeans) {
    EXPECT_EQ(clamp_mean(kBern, 0.0), kMeanClamp);
    EXPECT_EQ(clamp_mean(kBern, 1.0), 1.0 - kMeanClamp);
    EXPECT_EQ(clamp_mean(kPois, 0.0), kMeanClamp);
    EXPECT_EQ(clamp_mean(kGauss, -5.0), -5.0);
}

TEST(Sampling, DegenerateBernoulli) {
    Rng rng(5);
    for (int n = 0; n < 1000; ++n) EXPECT_EQ(sample_reward(kBern, 0, 1.0, rng), 1.0);
}

TEST(Sampling, GaussianMean) {
    Rng rng(6);
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += sample_reward(kGauss, 0, 0.0, rng);
    EXPECT_LT(std::abs(sum / n), 0.002);
}

TEST(Sampling, PoissonMean) {
    Rng rng(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += sample_reward(kPois, 0, 2.5, rng);
    EXPECT_LT(std::abs(sum / n - 2.5), 4.0 * std::sqrt(2.5 / n));
}

TEST(Sampling, SameSeedSameSequence) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_reward(kGauss, 0, 0.1, a), sample_reward(kGauss, 0, 0.1, b));
    Rng c = make_stream(9, 1, 2), d = make_stream(9, 1, 2), e = make_stream(9, 1, 3);
    EXPECT_EQ(c(), d());
    EXPECT_NE(make_stream(9, 1, 2)(), e());
}

TEST(Posterior, ConjugateUpdates) {
    auto pb = posterior_update(make_posterior(kBern, 1), 0, 1.0);
    EXPECT_EQ(pb.arms[0], (ArmPosterior{2.0, 1.0}));
    auto pp = posterior_update(make_posterior(kPois, 1), 0, 2.0);
    EXPECT_EQ(pp.arms[0], (ArmPosterior{3.0, 2.0}));
    auto pg = make_posterior(kGauss, 1);
    EXPECT_FALSE(pg.proper(0));
    pg = posterior_update(pg, 0, 0.3);
    EXPECT_TRUE(pg.proper(0));
    EXPECT_DOUBLE_EQ(posterior_mean(pg, 0), 0.3);
    EXPECT_DOUBLE_EQ(posterior_sd(pg, 0), 0.5);
    EXPECT_THROW(posterior_update(make_posterior(kBern, 1), 0, 0.5), InvalidParameter);
}

TEST(Posterior, ImproperQueriesThrow) {
    const auto pg = make_posterior(kGauss, 1);
    Rng rng(1);
    EXPECT_THROW(posterior_cdf(pg, 0, 0.0), StateError);
    EXPECT_THROW(posterior_sample(pg, rng), StateError);
}

TEST(Posterior, CdfClosedForms) {
    auto pg = make_posterior(kGauss, 1);
    for (int i = 0; i < 4; ++i) pg.observe(0, i % 2 ? 0.25 : -0.25);
    EXPECT_NEAR(posterior_cdf(pg, 0, 0.0), 0.5, 1e-15);
    const auto pb = posterior_update(make_posterior(kBern, 1), 0, 1.0);  // Beta(2,1)
    EXPECT_NEAR(posterior_cdf(pb, 0, 0.5), 0.25, 1e-14);
    EXPECT_NEAR(posterior_sf(pb, 0, 0.5), 0.75, 1e-14);
}

TEST(Posterior, PdfIntegratesToOne) {
    auto pg = make_posterior(RewardFamily::gaussian(1, 0.25), 1);
    pg.observe(0, 0.7);
    pg.observe(0, 0.1);
    auto pb = make_posterior(kBern, 1, {2.0, 5.0});
    auto pp = make_posterior(kPois, 1, {3.5, 2.0});
    using boost::math::quadrature::gauss_kronrod;
    auto integrate = [](auto f, double a, double b) { return gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13); };
    EXPECT_NEAR(integrate([&](double x) { return posterior_pdf(pg, 0, x); }, -5.0, 6.0), 1.0, 1e-8);
    EXPECT_NEAR(integrate([&](double x) { return posterior_pdf(pb, 0, x); }, 0.0, 1.0), 1.0, 1e-8);
    EXPECT_NEAR(integrate([&](double x) { return posterior_pdf(pp, 0, x); }, 0.0, 40.0), 1.0, 1e-8);
}

TEST(Posterior, CdfMonotoneAndMatchesPdf) {
    auto pp = make_posterior(kPois, 1, {3.5, 2.0});
    double prev = 0.0;
    for (double x = 0.05; x < 8.0; x += 0.05) {
        const double c = posterior_cdf(pp, 0, x);
        EXPECT_GE(c, prev);
        prev = c;
        const double h = 1e-6;
        const double fd = (posterior_cdf(pp, 0, x + h) - posterior_cdf(pp, 0, x - h)) / (2.0 * h);
        EXPECT_NEAR(fd, posterior_pdf(pp, 0, x), 1e-6);
    }
}

// Kolmogorov distance between 1e5 posterior draws and the posterior cdf.
double ks_distance(const PosteriorState& post, Rng& rng) {
    const int n = 100000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = posterior_sample_arm(post, 0, rng);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        const double c = posterior_cdf(post, 0, xs[i]);
        d = std::max({d, std::abs(c - static_cast<double>(i) / n), std::abs(c - static_cast<double>(i + 1) / n)});
    }
    return d;
}

TEST(Posterior, DrawsFollowCdf) {
    Rng rng(11);
    auto pg = make_posterior(kGauss, 1);
    pg.observe(0, 0.4);
    EXPECT_LT(ks_distance(pg, rng), 0.01);
    EXPECT_LT(ks_distance(make_posterior(kBern, 1, {3.0, 2.0}), rng), 0.01);
    EXPECT_LT(ks_distance(make_posterior(kPois, 1, {4.0, 3.0}), rng), 0.01);
}

TEST(Family, Names) {
    EXPECT_EQ(family_from_string("poisson"), FamilyKind::Poisson);
    EXPECT_EQ(to_string(FamilyKind::Bernoulli), "bernoulli");
    EXPECT_THROW(family_from_string("cauchy"), InvalidParameter);
    EXPECT_THROW(RewardFamily::gaussian(2, 0.0), InvalidParameter);
}

}  // namespace
