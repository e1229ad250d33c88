#include "heatinv/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "heatinv/error.hpp"

namespace heatinv {

using nlohmann::json;

namespace {
// Stream reserved for the optional prior-draw start; steps use streams 0..n-1.
constexpr std::uint64_t kInitialStream = std::numeric_limits<std::uint64_t>::max();
constexpr double kMinStep = 1e-4;
}  // namespace

void ChainConfig::validate() const {
    require(burn_in < n_steps, ErrorCategory::InvalidArgument, "chain: burn_in must be < n_steps");
    require(thinning >= 1, ErrorCategory::InvalidArgument, "chain: thinning must be >= 1");
    require(step_size > 0.0 && step_size <= 1.0, ErrorCategory::InvalidArgument, "chain: step_size must lie in (0, 1]");
    require(adapt_target > 0.0 && adapt_target < 1.0, ErrorCategory::InvalidArgument,
            "chain: adapt_target must lie in (0, 1)");
}

json to_json(const ChainConfig& c) {
    return {{"n_steps", c.n_steps},   {"burn_in", c.burn_in},           {"thinning", c.thinning},
            {"step_size", c.step_size}, {"adapt", c.adapt},             {"adapt_target", c.adapt_target},
            {"seed", c.seed},         {"start_from_prior_draw", c.start_from_prior_draw}};
}

ChainConfig chain_config_from_json(const json& j) {
    ChainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "n_steps") c.n_steps = value.get<std::size_t>();
            else if (key == "burn_in") c.burn_in = value.get<std::size_t>();
            else if (key == "thinning") c.thinning = value.get<std::size_t>();
            else if (key == "step_size") c.step_size = value.get<double>();
            else if (key == "adapt") c.adapt = value.get<bool>();
            else if (key == "adapt_target") c.adapt_target = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "start_from_prior_draw") c.start_from_prior_draw = value.get<bool>();
            else fail(ErrorCategory::Schema, "chain: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("chain: ") + e.what());
    }
    c.validate();
    return c;
}

// -- target -----------------------------------------------------------------

PosteriorTarget::PosteriorTarget(GaussianPrior prior, Dataset data, LinkSpec link, BoundaryData bd,
                                 SchemeConfig scheme)
    : prior_(std::move(prior)), data_(std::move(data)), link_(link), bd_(std::move(bd)), scheme_(scheme) {
    link_.validate();
    require(prior_.grid() == bd_.grid(), ErrorCategory::InvalidArgument, "posterior: prior and data grids differ");
    require(data_.sigma >= 0.0, ErrorCategory::InvalidArgument, "posterior: dataset sigma must be >= 0");
    require(data_.dim == prior_.grid().dim(), ErrorCategory::InvalidArgument, "posterior: dataset dimension mismatch");
}

double PosteriorTarget::log_likelihood(std::span<const double> white) const {
    if (data_.size() == 0) return 0.0;
    if (!data_.noiseless()) return heatinv::log_likelihood(prior_.field(white), data_, link_, bd_, scheme_);
    const SpaceTimeField u = forward_map(prior_.field(white), link_, bd_, scheme_);
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (data_.observations[i] != interpolate(u, data_.points[i])) return -std::numeric_limits<double>::infinity();
    return 0.0;
}

// -- sampler ----------------------------------------------------------------

StepOutcome pcn_step(std::span<const double> current, double current_ll, const PosteriorTarget& target, double s,
                     Rng& rng) {
    require(s > 0.0 && s <= 1.0, ErrorCategory::InvalidArgument, "pcn_step: s must lie in (0, 1]");
    require(current.size() == target.dimension(), ErrorCategory::InvalidArgument, "pcn_step: state has wrong size");
    const double keep = std::sqrt(1.0 - s * s);
    StepOutcome out;
    out.state.resize(current.size());
    for (std::size_t i = 0; i < current.size(); ++i) out.state[i] = keep * current[i] + s * standard_normal(rng);
    const double proposed_ll = target.log_likelihood(out.state);
    const double log_u = std::log(uniform_open01(rng));
    if (log_u < proposed_ll - current_ll) {
        out.log_likelihood = proposed_ll;
        out.accepted = true;
    } else {
        out.state.assign(current.begin(), current.end());
        out.log_likelihood = current_ll;
        out.accepted = false;
    }
    return out;
}

namespace {

void advance(ChainResult& r, std::size_t n_steps, const PosteriorTarget& target) {
    const ChainConfig& cfg = r.config;
    for (std::size_t i = r.steps_done; i < n_steps; ++i) {
        const double s = std::exp(r.log_step);
        r.step_sizes.push_back(s);
        Rng rng = make_rng(cfg.seed, i);
        StepOutcome o = pcn_step(r.final_state, r.final_log_likelihood, target, s, rng);
        r.final_state = std::move(o.state);
        r.final_log_likelihood = o.log_likelihood;
        if (o.accepted) ++r.accepted;
        if (i < cfg.burn_in && cfg.adapt) {
            const double gain = 1.0 / std::pow(static_cast<double>(i) + 1.0, 0.6);
            r.log_step += gain * ((o.accepted ? 1.0 : 0.0) - cfg.adapt_target);
            r.log_step = std::clamp(r.log_step, std::log(kMinStep), 0.0);
        }
        if (i >= cfg.burn_in && (i - cfg.burn_in + 1) % cfg.thinning == 0) {
            r.states.push_back(r.final_state);
            r.log_likelihoods.push_back(r.final_log_likelihood);
        }
        r.steps_done = i + 1;
    }
    r.acceptance_rate = r.steps_done > 0 ? static_cast<double>(r.accepted) / static_cast<double>(r.steps_done) : 0.0;
}

}  // namespace

ChainResult run_chain(const ChainConfig& cfg, const PosteriorTarget& target, std::vector<double> initial) {
    cfg.validate();
    ChainResult r;
    r.config = cfg;
    if (initial.empty()) {
        if (cfg.start_from_prior_draw) {
            Rng rng = make_rng(cfg.seed, kInitialStream);
            initial = target.prior().draw_white(rng);
        } else {
            initial.assign(target.dimension(), 0.0);
        }
    }
    require(initial.size() == target.dimension(), ErrorCategory::InvalidArgument,
            "run_chain: initial state has wrong size");
    r.final_state = std::move(initial);
    r.final_log_likelihood = target.log_likelihood(r.final_state);
    r.log_step = std::log(cfg.step_size);
    r.states.reserve(cfg.kept_count());
    advance(r, cfg.n_steps, target);
    return r;
}

ChainResult resume_chain(const ChainResult& prev, std::size_t n_steps, const PosteriorTarget& target) {
    require(n_steps >= prev.steps_done, ErrorCategory::InvalidArgument, "resume_chain: cannot shorten a chain");
    require(prev.final_state.size() == target.dimension(), ErrorCategory::InvalidArgument,
            "resume_chain: saved state does not match the target");
    ChainResult r = prev;
    r.config.n_steps = n_steps;
    advance(r, n_steps, target);
    return r;
}

// -- estimators -------------------------------------------------------------

SpatialField posterior_mean(const ChainResult& result, const GaussianPrior& prior) {
    require(!result.states.empty(), ErrorCategory::InvalidArgument, "posterior_mean: chain has no kept states");
    std::vector<double> mean(result.states.front().size(), 0.0);
    for (const auto& s : result.states)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s[i];
    for (double& m : mean) m /= static_cast<double>(result.states.size());
    return prior.field(mean);
}

AbsorptionField push_forward(const SpatialField& F_bar, const LinkSpec& link) { return link_phi_field(F_bar, link); }

AbsorptionField push_forward_mean(const ChainResult& result, const GaussianPrior& prior, const LinkSpec& link) {
    require(!result.states.empty(), ErrorCategory::InvalidArgument, "push_forward_mean: chain has no kept states");
    std::vector<double> acc(prior.grid().n_space(), 0.0);
    for (const auto& s : result.states) {
        const SpatialField F = prior.field(s);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += link_phi(F[i], link);
    }
    for (double& a : acc) a /= static_cast<double>(result.states.size());
    return AbsorptionField(SpatialField(prior.grid(), std::move(acc)), link.f_min);
}

double effective_sample_size(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) return 1.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - mean) * (x[i + lag] - mean);
        return acc / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 1e-300)) return 1.0;
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return std::max(1.0, static_cast<double>(n) / tau);
}

json ChainDiagnostics::to_json() const {
    return {{"acceptance_rate", acceptance_rate},
            {"ess_log_likelihood", ess_log_likelihood},
            {"final_step_size", final_step_size},
            {"thresholds", thresholds},
            {"c2_exceedance", c2_exceedance},
            {"sobolev_exceedance", sobolev_exceedance}};
}

ChainDiagnostics diagnostics(const ChainResult& result, const GaussianPrior& prior,
                             const std::vector<double>& thresholds) {
    ChainDiagnostics d;
    d.acceptance_rate = result.acceptance_rate;
    d.ess_log_likelihood = effective_sample_size(result.log_likelihoods);
    d.final_step_size = std::exp(result.log_step);
    d.thresholds = thresholds;
    std::vector<double> c2;
    std::vector<double> sob;
    for (const auto& s : result.states) {
        const SpatialField F = prior.field(s);
        c2.push_back(norm_c2(F));
        sob.push_back(sobolev_norm_discrete(F, prior.spec().alpha));
    }
    const double n = std::max<double>(1.0, static_cast<double>(result.states.size()));
    for (double M : thresholds) {
        const auto above = [M](double v) { return v > M; };
        d.c2_exceedance.push_back(static_cast<double>(std::count_if(c2.begin(), c2.end(), above)) / n);
        d.sobolev_exceedance.push_back(static_cast<double>(std::count_if(sob.begin(), sob.end(), above)) / n);
    }
    return d;
}

// -- persistence ------------------------------------------------------------

namespace {

void write_rows(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
    os << header << '\n';
    char buf[40];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            os << (i ? "," : "") << buf;
        }
        os << '\n';
    }
    require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path, std::size_t cols) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCategory::Io, "cannot read " + path.string());
    std::string line;
    std::getline(is, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::logic_error&) {
                fail(ErrorCategory::Schema, "chain csv: unparsable value '" + cell + "'");
            }
        }
        require(row.size() == cols, ErrorCategory::Schema, "chain csv: wrong column count in " + path.string());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void save_chain(const std::filesystem::path& dir, const ChainResult& r) {
    std::filesystem::create_directories(dir);
    const std::size_t dim = r.final_state.size();
    std::string header;
    for (std::size_t i = 0; i < dim; ++i) header += (i ? ",w" : "w") + std::to_string(i);
    write_rows(dir / "states.csv", header, r.states);
    std::vector<std::vector<double>> ll;
    for (double v : r.log_likelihoods) ll.push_back({v});
    write_rows(dir / "loglik.csv", "log_likelihood", ll);
    std::vector<std::vector<double>> steps;
    for (double v : r.step_sizes) steps.push_back({v});
    write_rows(dir / "step_sizes.csv", "step_size", steps);

    json j = {{"config", to_json(r.config)},
              {"dimension", dim},
              {"accepted", r.accepted},
              {"steps_done", r.steps_done},
              {"acceptance_rate", r.acceptance_rate},
              {"kept", r.states.size()},
              {"final_state", r.final_state},
              {"final_log_likelihood", r.final_log_likelihood},
              {"log_step", r.log_step}};
    std::ofstream os(dir / "chain.json");
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + (dir / "chain.json").string());
    os << j.dump(2) << '\n';
}

ChainResult load_chain(const std::filesystem::path& dir) {
    std::ifstream is(dir / "chain.json");
    require(static_cast<bool>(is), ErrorCategory::Io, "cannot read " + (dir / "chain.json").string());
    ChainResult r;
    std::size_t dim = 0;
    std::size_t kept = 0;
    try {
        json j;
        is >> j;
        r.config = chain_config_from_json(j.at("config"));
        dim = j.at("dimension").get<std::size_t>();
        r.accepted = j.at("accepted").get<std::size_t>();
        r.steps_done = j.at("steps_done").get<std::size_t>();
        r.acceptance_rate = j.at("acceptance_rate").get<double>();
        kept = j.at("kept").get<std::size_t>();
        r.final_state = j.at("final_state").get<std::vector<double>>();
        r.final_log_likelihood = j.at("final_log_likelihood").get<double>();
        r.log_step = j.at("log_step").get<double>();
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("chain.json: ") + e.what());
    }
    require(r.final_state.size() == dim, ErrorCategory::Schema, "chain.json: final_state size mismatch");
    r.states = read_rows(dir / "states.csv", dim);
    for (const auto& row : read_rows(dir / "loglik.csv", 1)) r.log_likelihoods.push_back(row[0]);
    for (const auto& row : read_rows(dir / "step_sizes.csv", 1)) r.step_sizes.push_back(row[0]);
    require(r.states.size() == kept && r.log_likelihoods.size() == kept, ErrorCategory::Schema,
            "chain: kept-state count mismatch");
    require(r.step_sizes.size() == r.steps_done, ErrorCategory::Schema, "chain: step trace length mismatch");
    return r;
}

}  // namespace heatinv
