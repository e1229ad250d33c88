#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "heatinv/error.hpp"
#include "heatinv/inference.hpp"

using namespace heatinv;
namespace fs = std::filesystem;

namespace {

PosteriorTarget make_target(std::size_t N, double sigma = 0.05) {
    const Grid g = Grid::build(1, 17, 17, 1.0);
    PriorSpec ps;
    ps.J = 1;
    GaussianPrior prior(ps, CutoffSpec{}, g);
    const BoundaryData bd = BoundaryData::decaying(g, 1.0);
    DataConfig dc;
    dc.N = N;
    dc.sigma = sigma;
    dc.seed = 5;
    const SpatialField F0 = prior.field(std::vector<double>{0.8, -0.5, 0.3});
    Dataset data = generate_data(link_phi_field(F0, LinkSpec{}), bd, SchemeConfig{}, dc);
    return PosteriorTarget(prior, data, LinkSpec{}, bd);
}

ChainConfig small_chain(std::size_t n, std::size_t burn, std::size_t thin) {
    ChainConfig c;
    c.n_steps = n;
    c.burn_in = burn;
    c.thinning = thin;
    c.seed = 21;
    return c;
}

}  // namespace

TEST(Pcn, FlatLikelihoodAlwaysAccepts) {
    const PosteriorTarget t = make_target(0);
    Rng rng = make_rng(1);
    std::vector<double> w{0.1, 0.2, 0.3};
    for (int i = 0; i < 50; ++i) {
        const StepOutcome o = pcn_step(w, 0.0, t, 0.7, rng);
        EXPECT_TRUE(o.accepted);
        w = o.state;
    }
}

TEST(Pcn, TinyStepKeepsStateAndAccepts) {
    const PosteriorTarget t = make_target(30);
    const std::vector<double> w{0.5, -0.2, 0.1};
    const double ll = t.log_likelihood(w);
    Rng rng = make_rng(2);
    const StepOutcome o = pcn_step(w, ll, t, 1e-9, rng);
    EXPECT_TRUE(o.accepted);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(o.state[i], w[i], 1e-8);
}

TEST(Pcn, RejectsInvalidStepSize) {
    const PosteriorTarget t = make_target(0);
    Rng rng = make_rng(1);
    const std::vector<double> w{0, 0, 0};
    EXPECT_THROW(pcn_step(w, 0.0, t, 0.0, rng), Error);
    EXPECT_THROW(pcn_step(w, 0.0, t, 1.5, rng), Error);
}

TEST(Chain, TraceLengthAndAcceptanceBounds) {
    const PosteriorTarget t = make_target(40);
    const ChainResult r = run_chain(small_chain(300, 100, 4), t);
    EXPECT_EQ(r.states.size(), (300u - 100u) / 4u);
    EXPECT_EQ(r.log_likelihoods.size(), r.states.size());
    EXPECT_EQ(r.step_sizes.size(), 300u);
    EXPECT_GE(r.acceptance_rate, 0.0);
    EXPECT_LE(r.acceptance_rate, 1.0);
    for (double s : r.step_sizes) {
        EXPECT_GT(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
    // Adaptation stops after burn-in.
    for (std::size_t i = 101; i < r.step_sizes.size(); ++i) EXPECT_EQ(r.step_sizes[i], r.step_sizes[100]);
}

TEST(Chain, ResumeReproducesUninterruptedChain) {
    const PosteriorTarget t = make_target(40);
    const ChainResult full = run_chain(small_chain(400, 100, 3), t);
    ChainConfig half = small_chain(400, 100, 3);
    half.n_steps = 170;
    const ChainResult part = run_chain(half, t);
    const ChainResult resumed = resume_chain(part, 400, t);
    ASSERT_EQ(resumed.states.size(), full.states.size());
    for (std::size_t i = 0; i < full.states.size(); ++i) EXPECT_EQ(resumed.states[i], full.states[i]);
    EXPECT_EQ(resumed.step_sizes, full.step_sizes);
    EXPECT_EQ(resumed.accepted, full.accepted);
}

TEST(Chain, SaveLoadRoundTrip) {
    const PosteriorTarget t = make_target(20);
    const ChainResult r = run_chain(small_chain(60, 20, 2), t);
    const fs::path dir = fs::temp_directory_path() / "heatinv_unit_chain";
    fs::remove_all(dir);
    save_chain(dir, r);
    const ChainResult back = load_chain(dir);
    EXPECT_EQ(back.states, r.states);
    EXPECT_EQ(back.log_likelihoods, r.log_likelihoods);
    EXPECT_EQ(back.final_state, r.final_state);
    EXPECT_EQ(back.log_step, r.log_step);
    EXPECT_EQ(back.steps_done, r.steps_done);
    EXPECT_EQ(back.config.seed, r.config.seed);
}

TEST(Chain, ConfigJsonIsStrict) {
    const ChainConfig c = small_chain(10, 2, 1);
    const ChainConfig back = chain_config_from_json(to_json(c));
    EXPECT_EQ(back.n_steps, 10u);
    auto j = to_json(c);
    j["stepsize"] = 0.1;
    EXPECT_THROW(chain_config_from_json(j), Error);
    ChainConfig bad = c;
    bad.burn_in = 20;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Chain, NoiselessLimitRejectsAnyMove) {
    const PosteriorTarget t = make_target(20, 0.0);
    const std::vector<double> truth{0.8, -0.5, 0.3};
    EXPECT_EQ(t.log_likelihood(truth), 0.0);
    EXPECT_TRUE(std::isinf(t.log_likelihood(std::vector<double>{0.0, 0.0, 0.0})));
    ChainConfig c = small_chain(30, 0, 1);
    c.adapt = false;
    const ChainResult r = run_chain(c, t, truth);
    EXPECT_EQ(r.accepted, 0u);
}

TEST(Estimators, PosteriorMeanAndPushForward) {
    const PosteriorTarget t = make_target(40);
    const ChainResult r = run_chain(small_chain(200, 50, 1), t);
    const SpatialField mean = posterior_mean(r, t.prior());
    std::vector<double> wbar(t.dimension(), 0.0);
    for (const auto& s : r.states)
        for (std::size_t i = 0; i < s.size(); ++i) wbar[i] += s[i] / r.states.size();
    const SpatialField expect = t.prior().field(wbar);
    for (std::size_t s = 0; s < mean.size(); ++s) EXPECT_NEAR(mean[s], expect[s], 1e-12);
    // Phi is convex, so E[Phi(F)] >= Phi(E[F]) nodally.
    const AbsorptionField plug = push_forward(mean, t.link());
    const AbsorptionField pf = push_forward_mean(r, t.prior(), t.link());
    for (std::size_t s = 0; s < mean.size(); ++s) EXPECT_GE(pf[s], plug[s] - 1e-12);
}

TEST(Ess, IidAndConstantSeries) {
    Rng rng = make_rng(4);
    std::vector<double> iid(5000);
    for (double& v : iid) v = standard_normal(rng);
    const double ess = effective_sample_size(iid);
    EXPECT_GT(ess, 4000.0);
    EXPECT_LE(ess, 6500.0);
    EXPECT_EQ(effective_sample_size(std::vector<double>(100, 3.0)), 1.0);
}

TEST(Ess, Ar1MatchesIntegratedAutocorrelation) {
    // AR(1) with coefficient rho: ESS = n (1 - rho) / (1 + rho).
    const double rho = 0.8;
    const std::size_t n = 40000;
    Rng rng = make_rng(6);
    std::vector<double> x(n);
    x[0] = standard_normal(rng) / std::sqrt(1 - rho * rho);
    for (std::size_t i = 1; i < n; ++i) x[i] = rho * x[i - 1] + standard_normal(rng);
    const double expect = n * (1 - rho) / (1 + rho);
    EXPECT_NEAR(effective_sample_size(x) / expect, 1.0, 0.2);
}

TEST(Diagnostics, ExceedanceFractionsAreMonotone) {
    const PosteriorTarget t = make_target(40);
    const ChainResult r = run_chain(small_chain(200, 50, 1), t);
    const ChainDiagnostics d = diagnostics(r, t.prior(), {0.1, 1.0, 10.0, 1e6});
    ASSERT_EQ(d.c2_exceedance.size(), 4u);
    for (std::size_t i = 1; i < 4; ++i) {
        EXPECT_LE(d.c2_exceedance[i], d.c2_exceedance[i - 1]);
        EXPECT_LE(d.sobolev_exceedance[i], d.sobolev_exceedance[i - 1]);
    }
    EXPECT_EQ(d.c2_exceedance.back(), 0.0);
    EXPECT_GE(d.ess_log_likelihood, 1.0);
}
