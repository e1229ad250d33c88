#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatinv/measurement.hpp"
#include "heatinv/prior.hpp"
#include "heatinv/random.hpp"

namespace heatinv {

struct ChainConfig {
    std::size_t n_steps = 2000;
    std::size_t burn_in = 500;
    std::size_t thinning = 1;
    double step_size = 0.2;  // s in (0, 1]
    bool adapt = true;       // Robbins-Monro on log s, burn-in only
    double adapt_target = 0.3;
    std::uint64_t seed = 1;
    bool start_from_prior_draw = false;

    void validate() const;
    std::size_t kept_count() const noexcept { return (n_steps - burn_in) / thinning; }
};

nlohmann::json to_json(const ChainConfig& c);
ChainConfig chain_config_from_json(const nlohmann::json& j);

/// Prior, data and forward model bundled into ell^N as a function of the
/// prior's white-noise coordinates.
class PosteriorTarget {
public:
    PosteriorTarget(GaussianPrior prior, Dataset data, LinkSpec link, BoundaryData bd, SchemeConfig scheme = {});

    const GaussianPrior& prior() const noexcept { return prior_; }
    const Dataset& data() const noexcept { return data_; }
    const LinkSpec& link() const noexcept { return link_; }
    const BoundaryData& boundary() const noexcept { return bd_; }
    const SchemeConfig& scheme() const noexcept { return scheme_; }
    std::size_t dimension() const noexcept { return prior_.dimension(); }

    /// One forward solve, or none when the dataset is empty. Noiseless data
    /// give the sigma -> 0 limit: 0 on exact fit, -infinity otherwise.
    double log_likelihood(std::span<const double> white) const;
    SpatialField field(std::span<const double> white) const { return prior_.field(white); }

private:
    GaussianPrior prior_;
    Dataset data_;
    LinkSpec link_;
    BoundaryData bd_;
    SchemeConfig scheme_;
};

struct StepOutcome {
    std::vector<double> state;
    double log_likelihood = 0.0;
    bool accepted = false;
};

/// Proposal sqrt(1 - s^2) w + s xi with xi ~ N(0, I) in white coordinates,
/// i.e. a fresh prior draw (rescaling included) after synthesis. Accepted
/// with probability min(1, exp(ell(w*) - ell(w))). `current` is never
/// modified.
StepOutcome pcn_step(std::span<const double> current, double current_ll, const PosteriorTarget& target, double s,
                     Rng& rng);

struct ChainResult {
    ChainConfig config;
    std::vector<std::vector<double>> states;  // kept white states
    std::vector<double> log_likelihoods;      // for kept states
    std::vector<double> step_sizes;           // s in force at each executed step
    std::size_t accepted = 0;
    std::size_t steps_done = 0;
    double acceptance_rate = 0.0;
    // Everything needed to continue the chain.
    std::vector<double> final_state;
    double final_log_likelihood = 0.0;
    double log_step = 0.0;
};

/// Step i draws from stream i of the chain seed, so a chain resumed from a
/// saved result reproduces the uninterrupted chain bit for bit.
ChainResult run_chain(const ChainConfig& cfg, const PosteriorTarget& target, std::vector<double> initial = {});

/// Continues `prev` until `n_steps` total steps have been executed.
ChainResult resume_chain(const ChainResult& prev, std::size_t n_steps, const PosteriorTarget& target);

/// Chain average of the kept states, synthesized to a field.
SpatialField posterior_mean(const ChainResult& result, const GaussianPrior& prior);

/// Phi o Fbar: the plug-in estimator of f.
AbsorptionField push_forward(const SpatialField& F_bar, const LinkSpec& link);

/// Chain average of Phi o F: the mean of the push-forward posterior.
AbsorptionField push_forward_mean(const ChainResult& result, const GaussianPrior& prior, const LinkSpec& link);

/// Effective sample size by Geyer's initial monotone sequence estimator,
/// floored at 1. A constant series has ESS 1.
double effective_sample_size(std::span<const double> series);

struct ChainDiagnostics {
    double acceptance_rate = 0.0;
    double ess_log_likelihood = 1.0;
    double final_step_size = 0.0;
    std::vector<double> thresholds;
    std::vector<double> c2_exceedance;       // fraction with ||F||_C2 > M
    std::vector<double> sobolev_exceedance;  // fraction with ||F||_H^alpha > M

    nlohmann::json to_json() const;
};

ChainDiagnostics diagnostics(const ChainResult& result, const GaussianPrior& prior,
                             const std::vector<double>& thresholds);

/// Writes states.csv, loglik.csv and chain.json into `dir`.
void save_chain(const std::filesystem::path& dir, const ChainResult& result);
ChainResult load_chain(const std::filesystem::path& dir);

}  // namespace heatinv
