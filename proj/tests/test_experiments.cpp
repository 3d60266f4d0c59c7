#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "topk/experiments.hpp"
#include "topk/posterior_probability.hpp"

namespace {

using namespace topk;

InstanceSpec five_arm() {
    return InstanceSpec::make(RewardFamily::gaussian(5, 0.25), {0.51, 0.5, 0.0, -0.01, -0.092}, 2);
}

PolicyParams params(PolicyKind kind) {
    PolicyParams p;
    p.kind = kind;
    return p;
}

// Monte Carlo estimate of P(top-k of a posterior draw == topset).
double mc_prob_correct(const PosteriorState& post, const std::vector<std::size_t>& topset, std::size_t draws,
                       std::uint64_t seed) {
    std::mt19937_64 g(seed);
    const std::size_t K = post.size();
    std::vector<double> x(K);
    std::vector<std::size_t> idx(K);
    std::size_t hits = 0;
    for (std::size_t d = 0; d < draws; ++d) {
        for (std::size_t a = 0; a < K; ++a) {
            const auto& p = post.arms[a];
            switch (post.family.kind) {
                case FamilyKind::Gaussian:
                    x[a] = std::normal_distribution<double>(p.b, std::sqrt(post.family.variance(a) / p.a))(g);
                    break;
                case FamilyKind::Bernoulli: {
                    const double u = std::gamma_distribution<double>(p.a, 1.0)(g);
                    const double v = std::gamma_distribution<double>(p.b, 1.0)(g);
                    x[a] = u / (u + v);
                    break;
                }
                case FamilyKind::Poisson:
                    x[a] = std::gamma_distribution<double>(p.a, 1.0 / p.b)(g);
                    break;
            }
        }
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(topset.size()), idx.end(),
                          [&](std::size_t i, std::size_t j) { return x[i] > x[j]; });
        std::vector<std::size_t> top(idx.begin(), idx.begin() + static_cast<long>(topset.size()));
        std::sort(top.begin(), top.end());
        if (top == topset) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(draws);
}

PosteriorState gaussian_posterior(const std::vector<double>& var, const std::vector<double>& means,
                                  const std::vector<double>& counts) {
    auto post = make_posterior(RewardFamily::gaussian(var), means.size());
    for (std::size_t a = 0; a < means.size(); ++a) post.arms[a] = {counts[a], means[a]};
    return post;
}

TEST(PosteriorQuadrature, IdenticalArmsAreExchangeable) {
    for (std::size_t K : {2u, 3u, 5u}) {
        const auto post = gaussian_posterior(std::vector<double>(K, 0.25), std::vector<double>(K, 0.3),
                                             std::vector<double>(K, 7.0));
        EXPECT_NEAR(posterior_prob_correct(post, {0}), 1.0 / static_cast<double>(K), 1e-8) << K;
    }
    // k = 2 of 4 identical arms: one of six subsets.
    const auto post = gaussian_posterior(std::vector<double>(4, 1.0), std::vector<double>(4, 0.0),
                                         std::vector<double>(4, 3.0));
    EXPECT_NEAR(posterior_prob_correct(post, {1, 3}), 1.0 / 6.0, 1e-8);

    auto beta = make_posterior(RewardFamily::bernoulli(), 2);
    beta.arms = {{3.0, 5.0}, {3.0, 5.0}};
    EXPECT_NEAR(posterior_prob_correct(beta, {1}), 0.5, 1e-8);
}

TEST(PosteriorQuadrature, TwoGaussianArmsClosedForm) {
    // P(X0 > X1) = Phi((m0 - m1) / sqrt(s0^2 + s1^2)).
    const auto post = gaussian_posterior({0.25, 1.0}, {0.4, 0.1}, {5.0, 9.0});
    const double s = std::sqrt(0.25 / 5.0 + 1.0 / 9.0);
    const double expected = 0.5 * std::erfc(-(0.3 / s) / std::sqrt(2.0));
    EXPECT_NEAR(posterior_prob_correct(post, {0}), expected, 1e-9);
    EXPECT_NEAR(posterior_prob_incorrect(post, {0}), 1.0 - expected, 1e-9);
}

TEST(PosteriorQuadrature, MatchesMonteCarloGaussian) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> mean(-0.5, 0.5), var(0.2, 2.0), cnt(2.0, 30.0);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> v(4), m(4), c(4);
        for (std::size_t a = 0; a < 4; ++a) {
            v[a] = var(g);
            m[a] = mean(g);
            c[a] = std::floor(cnt(g));
        }
        const auto post = gaussian_posterior(v, m, c);
        const std::vector<std::size_t> top = {0, 2};
        const double q = posterior_prob_correct(post, top);
        const double mc = mc_prob_correct(post, top, 1000000, 100 + static_cast<std::uint64_t>(trial));
        EXPECT_NEAR(q, mc, 0.002) << trial;
    }
}

TEST(PosteriorQuadrature, MatchesMonteCarloBernoulliAndPoisson) {
    auto beta = make_posterior(RewardFamily::bernoulli(), 4);
    beta.arms = {{9.0, 4.0}, {6.0, 6.0}, {7.0, 5.0}, {2.0, 9.0}};
    EXPECT_NEAR(posterior_prob_correct(beta, {0, 2}), mc_prob_correct(beta, {0, 2}, 1000000, 5), 0.002);

    auto gam = make_posterior(RewardFamily::poisson(), 3);
    gam.arms = {{30.0, 10.0}, {22.0, 9.0}, {12.0, 8.0}};
    EXPECT_NEAR(posterior_prob_correct(gam, {0}), mc_prob_correct(gam, {0}, 1000000, 6), 0.002);
}

TEST(PosteriorQuadrature, RejectsImproperOrDegenerateInput) {
    auto post = make_posterior(RewardFamily::gaussian(3, 1.0), 3);
    post.arms[0] = {2.0, 0.1};
    post.arms[1] = {2.0, 0.0};
    EXPECT_THROW(posterior_prob_correct(post, {0}), StateError);
    post.arms[2] = {1.0, 0.0};
    EXPECT_THROW(posterior_prob_correct(post, {}), InvalidParameter);
    EXPECT_THROW(posterior_prob_correct(post, {0, 1, 2}), InvalidParameter);
}

// ---------------------------------------------------------------------------
// Fixed confidence
// ---------------------------------------------------------------------------

ExperimentConfig confidence_config(InstanceSpec inst, std::vector<PolicyKind> kinds, std::size_t reps,
                                   std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.setting = Setting::FixedConfidence;
    cfg.instance = std::move(inst);
    for (auto k : kinds) cfg.policies.push_back(params(k));
    cfg.replications = reps;
    cfg.seed = seed;
    cfg.threads = 1;
    return cfg;
}

bool same(const ConfidenceRecord& a, const ConfidenceRecord& b) {
    return a.rep == b.rep && a.policy == b.policy && a.outcome.tau == b.outcome.tau &&
           a.outcome.correct == b.outcome.correct && a.outcome.capped == b.outcome.capped &&
           a.outcome.seed == b.outcome.seed;
}

TEST(FixedConfidence, ErrorRateWithinBinomialBand) {
    // Easy two-arm instance with the heuristic threshold.
    const auto inst = InstanceSpec::make(RewardFamily::gaussian(2, 0.25), {0.5, 0.0}, 1);
    auto cfg = confidence_config(inst, {PolicyKind::Uniform, PolicyKind::KktTs}, 1000, 3);
    const auto res = run_fixed_confidence(cfg);
    ASSERT_EQ(res.summaries.size(), 2u);
    const double band = 0.1 + 2.326 * std::sqrt(0.1 * 0.9 / 1000.0);
    for (const auto& s : res.summaries) {
        EXPECT_EQ(s.reps, 1000u);
        EXPECT_EQ(s.capped, 0u);
        EXPECT_LE(s.delta_hat, band) << to_string(s.policy);
        EXPECT_GT(s.mean_tau, 2.0);
    }
}

TEST(FixedConfidence, DeterministicAndThreadIndependent) {
    auto cfg = confidence_config(five_arm(), {PolicyKind::KktTs, PolicyKind::Uniform, PolicyKind::KlLucb}, 12, 77);
    cfg.cap = 20000;
    const auto a = run_fixed_confidence(cfg);
    const auto b = run_fixed_confidence(cfg);
    cfg.threads = 4;
    const auto c = run_fixed_confidence(cfg);
    ASSERT_EQ(a.records.size(), 36u);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_TRUE(same(a.records[i], b.records[i])) << i;
        EXPECT_TRUE(same(a.records[i], c.records[i])) << i;
    }
    cfg.seed = 78;
    const auto d = run_fixed_confidence(cfg);
    bool differs = false;
    for (std::size_t i = 0; i < a.records.size(); ++i) differs = differs || !same(a.records[i], d.records[i]);
    EXPECT_TRUE(differs);
}

TEST(FixedConfidence, SummaryMatchesRecordsAndIgnoresOrder) {
    auto cfg = confidence_config(five_arm(), {PolicyKind::Uniform}, 40, 5);
    const auto res = run_fixed_confidence(cfg);
    std::vector<double> taus;
    std::size_t wrong = 0;
    for (const auto& r : res.records) {
        if (r.outcome.capped) continue;
        taus.push_back(static_cast<double>(r.outcome.tau));
        wrong += r.outcome.correct ? 0 : 1;
    }
    ASSERT_FALSE(taus.empty());
    const double n = static_cast<double>(taus.size());
    const double mean = std::accumulate(taus.begin(), taus.end(), 0.0) / n;
    double ss = 0.0;
    for (double t : taus) ss += (t - mean) * (t - mean);
    const auto& s = res.summaries[0];
    EXPECT_DOUBLE_EQ(s.mean_tau, mean);
    EXPECT_NEAR(s.stderr_tau, std::sqrt(ss / (n - 1.0) / n), 1e-9 * s.stderr_tau);
    EXPECT_DOUBLE_EQ(s.delta_hat, static_cast<double>(wrong) / n);

    auto shuffled = res.records;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(9));
    const auto t = summarize_confidence(PolicyKind::Uniform, shuffled);
    EXPECT_EQ(t.reps, s.reps);
    EXPECT_EQ(t.capped, s.capped);
    EXPECT_DOUBLE_EQ(t.mean_tau, s.mean_tau);
    EXPECT_DOUBLE_EQ(t.stderr_tau, s.stderr_tau);
    EXPECT_DOUBLE_EQ(t.delta_hat, s.delta_hat);
}

TEST(FixedConfidence, CorrectRecordsReproduceTheRecommendation) {
    // Independent replay of the sampling loop from the recorded streams.
    const auto inst = five_arm();
    const StoppingConfig stop;
    for (auto kind : {PolicyKind::Uniform, PolicyKind::KktTs}) {
        for (std::uint64_t rep = 0; rep < 6; ++rep) {
            const auto streams = ReplicationStreams::make(21, 0, rep);
            const auto out = run_confidence_once(inst, params(kind), stop, streams);
            ASSERT_FALSE(out.capped);
            auto policy = make_policy(params(kind), inst.arms(), inst.k);
            auto st = streams;
            auto state = BanditState::make(inst.family, inst.arms());
            initialize(state, inst, policy->init_pulls(), st.env);
            while (!should_stop(state, inst.k, stop)) {
                const auto step = policy->step(state, st.policy);
                for (auto arm : step.arms) {
                    pull(state, inst, arm, st.env);
                    if (should_stop(state, inst.k, stop)) break;
                }
            }
            EXPECT_EQ(state.t, out.tau);
            EXPECT_EQ(empirical_top_k(state, inst.k) == inst.top, out.correct);
        }
    }
}

TEST(FixedConfidence, CappedRunsAreExcludedFromTheSummary) {
    // Nearly tied arms with a tiny cap never stop.
    const auto inst = InstanceSpec::make(RewardFamily::gaussian(3, 1.0), {0.01, 0.0, -0.01}, 1);
    auto cfg = confidence_config(inst, {PolicyKind::Uniform}, 5, 1);
    cfg.cap = 30;
    const auto res = run_fixed_confidence(cfg);
    for (const auto& r : res.records) {
        EXPECT_TRUE(r.outcome.capped);
        EXPECT_FALSE(r.outcome.correct);
        EXPECT_EQ(r.outcome.tau, 30u);
    }
    EXPECT_EQ(res.summaries[0].capped, 5u);
    EXPECT_EQ(res.summaries[0].mean_tau, 0.0);
}

TEST(FixedConfidence, OwnStoppingPoliciesTerminate) {
    const auto inst = InstanceSpec::make(RewardFamily::bernoulli(), {0.9, 0.5, 0.1}, 1);
    auto cfg = confidence_config(inst, {PolicyKind::KlLucb, PolicyKind::KlElimination, PolicyKind::UGapEConfidence}, 20, 4);
    const auto res = run_fixed_confidence(cfg);
    for (const auto& s : res.summaries) {
        EXPECT_EQ(s.capped, 0u) << to_string(s.policy);
        EXPECT_LE(s.delta_hat, 0.1) << to_string(s.policy);
    }
}

// ---------------------------------------------------------------------------
// Fixed budget
// ---------------------------------------------------------------------------

ExperimentConfig budget_config(InstanceSpec inst, std::vector<PolicyKind> kinds, std::vector<std::size_t> budgets,
                               std::size_t reps, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.setting = Setting::FixedBudget;
    cfg.instance = std::move(inst);
    for (auto k : kinds) cfg.policies.push_back(params(k));
    cfg.budgets = std::move(budgets);
    cfg.replications = reps;
    cfg.seed = seed;
    cfg.threads = 1;
    return cfg;
}

TEST(FixedBudget, SymmetricInstanceAtBudgetK) {
    // One pull per arm of identical Gaussians: every k-subset is equally likely.
    const auto inst = InstanceSpec::plug_in(RewardFamily::gaussian(4, 1.0), {0.0, 0.0, 0.0, 0.0}, 2);
    const auto rows = run_fixed_budget(budget_config(inst, {PolicyKind::Uniform}, {4}, 20000, 8));
    ASSERT_EQ(rows.size(), 1u);
    const double expected = 1.0 - 1.0 / 6.0;
    const double sd = std::sqrt(expected * (1.0 - expected) / 20000.0);
    EXPECT_NEAR(rows[0].pfs, expected, 4.0 * sd);
    for (double m : rows[0].mean_alloc) EXPECT_DOUBLE_EQ(m, 0.25);
}

TEST(FixedBudget, ErrorDecreasesWithBudget) {
    const auto rows = run_fixed_budget(
        budget_config(five_arm(), {PolicyKind::Uniform, PolicyKind::KktTs}, {50, 200, 800}, 1500, 12));
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        if (rows[i].policy != rows[i + 1].policy) continue;
        const double se = std::hypot(rows[i].stderr_pfs, rows[i + 1].stderr_pfs);
        EXPECT_LE(rows[i + 1].pfs, rows[i].pfs + 2.0 * se) << i;
    }
    for (const auto& r : rows) {
        EXPECT_NEAR(std::accumulate(r.mean_alloc.begin(), r.mean_alloc.end(), 0.0), 1.0, 1e-12);
        EXPECT_NEAR(r.stderr_pfs, std::sqrt(r.pfs * (1.0 - r.pfs) / 1499.0), 1e-15);
    }
}

TEST(FixedBudget, ThreadIndependentAcrossBlocks) {
    // More replications than one block so blocks are scheduled separately.
    auto cfg = budget_config(five_arm(), {PolicyKind::Uniform, PolicyKind::Sar}, {20, 60}, 2100, 3);
    const auto a = run_fixed_budget(cfg);
    cfg.threads = 3;
    const auto b = run_fixed_budget(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].pfs, b[i].pfs);
        EXPECT_EQ(a[i].mean_alloc, b[i].mean_alloc);
        EXPECT_EQ(a[i].budget, b[i].budget);
    }
}

TEST(FixedBudget, BudgetDependentPoliciesUseTheirOwnBudget) {
    // SAR plans its phases for the checkpoint budget and never exceeds it.
    const auto inst = five_arm();
    const auto rows = run_fixed_budget(budget_config(inst, {PolicyKind::Sar}, {25, 100}, 50, 2));
    for (const auto& r : rows) {
        EXPECT_LE(std::accumulate(r.mean_alloc.begin(), r.mean_alloc.end(), 0.0), 1.0 + 1e-12);
    }
    const auto once = run_budget_once(inst, params(PolicyKind::Sar), {25}, ReplicationStreams::make(2, 0, 0));
    const auto sched = sar_schedule(inst.arms(), 25);
    // An arm removed after phase p holds n_p pulls; the last two hold n_{K-1}.
    // Phases skipped once the sets are decided only lower the total.
    std::size_t planned = 0;
    for (std::size_t p = 0; p < sched.size(); ++p) planned += std::max<std::size_t>(sched[p], 1);
    planned += std::max<std::size_t>(sched.back(), 1);
    EXPECT_LE(planned, 25u);
    EXPECT_LE(std::accumulate(once.counts[0].begin(), once.counts[0].end(), std::size_t{0}), planned);
}

// ---------------------------------------------------------------------------
// Posterior level
// ---------------------------------------------------------------------------

// Per-round P(correct) of an independent replay, then the checkpoint rule:
// dense up to 1000, every 10 rounds after with a refinement back to the
// previous checkpoint.
std::size_t replay_first_crossing(const InstanceSpec& inst, PolicyKind kind, double level, std::size_t cap,
                                  ReplicationStreams st, std::size_t* true_first) {
    auto policy = make_policy(params(kind), inst.arms(), inst.k);
    auto state = BanditState::make(inst.family, inst.arms());
    initialize(state, inst, policy->init_pulls(), st.env);
    std::vector<double> prob(cap + 1, 0.0);
    prob[state.t] = posterior_prob_correct(state.posterior, inst.top);
    std::vector<std::size_t> queue;
    std::size_t pos = 0;
    const std::size_t start = state.t;
    while (state.t < cap) {
        if (pos >= queue.size()) {
            queue = policy->step(state, st.policy).arms;
            pos = 0;
        }
        pull(state, inst, queue[pos++], st.env);
        prob[state.t] = 1.0 - posterior_prob_incorrect(state.posterior, inst.top);
    }
    *true_first = 0;
    for (std::size_t t = start; t <= cap && *true_first == 0; ++t) {
        if (prob[t] >= level) *true_first = t;
    }
    std::size_t prev = start;
    for (std::size_t t = start; t <= cap; ++t) {
        if (!level_checkpoint(t)) continue;
        if (prob[t] >= level) {
            if (t <= 1000) return t;
            for (std::size_t u = prev + 1; u <= t; ++u) {
                if (prob[u] >= level) return u;
            }
        }
        prev = t;
    }
    return 0;
}

TEST(PosteriorLevel, IdenticalArmsHitHalfImmediately) {
    const auto inst = InstanceSpec::plug_in(RewardFamily::gaussian(2, 1.0), {0.0, 0.0}, 1);
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        const auto streams = ReplicationStreams::make(4, 0, rep);
        const auto out = run_posterior_once(inst, params(PolicyKind::Uniform), {0.5}, 1000, 0, streams);
        std::size_t first = 0;
        const auto expected = replay_first_crossing(inst, PolicyKind::Uniform, 0.5, 1000, streams, &first);
        EXPECT_EQ(out.hits[0], expected) << rep;
        EXPECT_EQ(out.hits[0], first) << rep;
        EXPECT_EQ(out.capped[0], out.hits[0] == 0);
    }
}

TEST(PosteriorLevel, SparseCheckpointsRefineLateCrossings) {
    const auto inst = InstanceSpec::make(RewardFamily::gaussian(2, 1.0), {0.06, 0.0}, 1);
    std::size_t late = 0;
    for (std::uint64_t rep = 0; rep < 4; ++rep) {
        const auto streams = ReplicationStreams::make(17, 0, rep);
        const std::size_t cap = 12000;
        const auto out = run_posterior_once(inst, params(PolicyKind::Uniform), {0.99}, cap, 0, streams);
        std::size_t first = 0;
        const auto expected = replay_first_crossing(inst, PolicyKind::Uniform, 0.99, cap, streams, &first);
        EXPECT_EQ(out.hits[0], expected) << rep;
        if (expected != 0) {
            EXPECT_GE(out.hits[0], first);
        }
        if (out.hits[0] > 1000) ++late;
    }
    EXPECT_GE(late, 1u);
}

TEST(PosteriorLevel, ThompsonTrackingReachesHighLevelsNoLaterThanUniform) {
    ExperimentConfig cfg;
    cfg.setting = Setting::PosteriorLevel;
    cfg.instance = InstanceSpec::make(RewardFamily::gaussian(5, 0.25), {0.5, 0.4, 0.3, 0.2, 0.1}, 1);
    cfg.policies = {params(PolicyKind::KktTs), params(PolicyKind::Uniform)};
    cfg.levels = {0.99};
    cfg.replications = 9;
    cfg.cap = 100000;
    cfg.seed = 31;
    cfg.threads = 1;
    const auto res = run_posterior_level(cfg);
    std::vector<double> kkt, uni;
    for (const auto& r : res.records) {
        ASSERT_FALSE(r.capped);
        (r.policy == PolicyKind::KktTs ? kkt : uni).push_back(static_cast<double>(r.hit));
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    EXPECT_LE(median(kkt), median(uni));
}

TEST(PosteriorLevel, RecordsPerLevelAndTraceToHorizon) {
    ExperimentConfig cfg;
    cfg.setting = Setting::PosteriorLevel;
    cfg.instance = InstanceSpec::make(RewardFamily::gaussian(3, 0.25), {0.5, 0.2, 0.0}, 1);
    cfg.policies = {params(PolicyKind::KktTs), params(PolicyKind::Uniform)};
    cfg.levels = {0.5, 0.9, 0.99};
    cfg.replications = 3;
    cfg.cap = 600;
    cfg.trace_stride = 50;
    cfg.seed = 2;
    cfg.threads = 2;
    const auto res = run_posterior_level(cfg);
    ASSERT_EQ(res.records.size(), 2u * 3u * 3u);
    for (std::size_t i = 0; i < res.records.size(); i += 3) {
        // Hits are non-decreasing in the level.
        const auto& a = res.records[i];
        const auto& b = res.records[i + 1];
        const auto& c = res.records[i + 2];
        EXPECT_EQ(a.seed, c.seed);
        if (!b.capped) {
            EXPECT_LE(a.hit, b.hit);
        }
        if (!c.capped) {
            EXPECT_LE(b.hit, c.hit);
        }
        for (const auto* r : {&a, &b, &c}) EXPECT_EQ(r->capped, r->hit == 0);
    }
    // 12 trace points per replication: t = 50, 100, ..., 600.
    ASSERT_EQ(res.trace.size(), 2u * 3u * 12u);
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        EXPECT_EQ(res.trace[i].t, 50u * (i % 12 + 1));
        EXPECT_GE(res.trace[i].neg_log_error, 0.0);
    }
    cfg.threads = 1;
    const auto again = run_posterior_level(cfg);
    for (std::size_t i = 0; i < res.records.size(); ++i) EXPECT_EQ(res.records[i].hit, again.records[i].hit);
}

// ---------------------------------------------------------------------------
// Allocation convergence
// ---------------------------------------------------------------------------

ExperimentConfig convergence_config(InstanceSpec inst, std::vector<SolverKind> solvers,
                                    std::vector<std::size_t> iters) {
    ExperimentConfig cfg;
    cfg.setting = Setting::AllocationConvergence;
    cfg.instance = std::move(inst);
    cfg.solvers = std::move(solvers);
    cfg.iters_list = std::move(iters);
    cfg.threads = 1;
    return cfg;
}

TEST(AllocationConvergence, GapIsNonNegativeAndShrinks) {
    const auto cfg = convergence_config(five_arm(), {SolverKind::Fwga, SolverKind::Kkt}, {100, 10000});
    const auto rows = run_allocation_convergence(cfg);
    ASSERT_EQ(rows.size(), 4u);  // stride defaults to n: one point per run
    for (const auto& r : rows) {
        EXPECT_GE(r.gap, -1e-6);
        EXPECT_EQ(r.iter, r.n);
    }
    EXPECT_LT(rows[1].gap, rows[0].gap / 5.0);
    EXPECT_LT(rows[3].gap, rows[2].gap);
}

TEST(AllocationConvergence, BothSolversAgreeOnTenBernoulliArms) {
    const auto inst =
        InstanceSpec::make(RewardFamily::bernoulli(), {0.8, 0.6, 0.6, 0.4, 0.4, 0.4, 0.2, 0.2, 0.2, 0.2}, 3);
    const auto ref = reference_solution(inst);
    auto cfg = convergence_config(inst, {SolverKind::Fwga, SolverKind::Kkt}, {100000});
    cfg.stride = 25000;
    const auto rows = run_allocation_convergence(cfg, &ref);
    ASSERT_EQ(rows.size(), 8u);
    const auto& f = rows[3];
    const auto& k = rows[7];
    EXPECT_EQ(f.solver, SolverKind::Fwga);
    EXPECT_EQ(k.solver, SolverKind::Kkt);
    EXPECT_NEAR(f.gamma, k.gamma, 0.01 * k.gamma);
    EXPECT_NEAR(f.gamma, ref.gamma, 0.01 * ref.gamma);
}

TEST(AllocationConvergence, RejectsGridOracle) {
    const auto cfg = convergence_config(five_arm(), {SolverKind::Grid}, {100});
    EXPECT_THROW(run_allocation_convergence(cfg), InvalidParameter);
}

// ---------------------------------------------------------------------------
// Configuration and threading
// ---------------------------------------------------------------------------

TEST(ExperimentConfig, ValidationErrors) {
    auto cfg = budget_config(five_arm(), {PolicyKind::Uniform}, {4}, 10, 1);
    EXPECT_THROW(cfg.validate(), InvalidParameter);  // below K
    cfg.budgets = {10, 10};
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg.budgets = {};
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg.budgets = {5, 10};
    EXPECT_NO_THROW(cfg.validate());
    cfg.replications = 0;
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg.replications = 1;
    cfg.policies.clear();
    EXPECT_THROW(cfg.validate(), InvalidParameter);

    cfg = confidence_config(five_arm(), {PolicyKind::Uniform}, 1, 1);
    cfg.setting = Setting::PosteriorLevel;
    cfg.levels = {0.5, 1.0};
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg.levels = {};
    EXPECT_THROW(cfg.validate(), InvalidParameter);

    cfg = convergence_config(five_arm(), {SolverKind::Fwga}, {0});
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg.iters_list = {10};
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Threads, ResolutionOrder) {
    EXPECT_EQ(resolve_threads(3), 3u);
    ::setenv("PURE_EXPLORE_THREADS", "5", 1);
    EXPECT_EQ(resolve_threads(0), 5u);
    EXPECT_EQ(resolve_threads(2), 2u);
    ::setenv("PURE_EXPLORE_THREADS", "junk", 1);
    EXPECT_GE(resolve_threads(0), 1u);
    ::unsetenv("PURE_EXPLORE_THREADS");
}

TEST(Threads, ParallelForCoversEveryIndexAndRethrows) {
    std::vector<int> hit(101, 0);
    parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

}  // namespace
