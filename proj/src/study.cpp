#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

namespace heatinv {

using nlohmann::json;

SlopeFit fit_log_slope(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [N, err] : pairs) {
        require(N > 0.0, ErrorCategory::InvalidArgument, "fit_log_slope: N must be positive");
        require(err > 0.0 && std::isfinite(err), ErrorCategory::InvalidArgument,
                "fit_log_slope: errors must be positive and finite");
        xs.push_back(std::log(N));
        ys.push_back(std::log(err));
    }
    auto distinct = xs;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    require(distinct.size() >= 3, ErrorCategory::InvalidArgument, "fit_log_slope: need at least 3 distinct N");

    const auto n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    SlopeFit fit;
    fit.n = xs.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - fit.intercept - fit.slope * xs[i];
        rss += r * r;
    }
    fit.stderr_ = xs.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    return fit;
}

bool nonincreasing_with_one_inversion(const std::vector<double>& v) {
    int inversions = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1]) ++inversions;
    return inversions <= 1;
}

namespace {

double median(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

SlopeFit try_fit(const std::vector<std::size_t>& Ns, const std::vector<double>& medians) {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < Ns.size(); ++i)
        if (std::isfinite(medians[i])) pairs.emplace_back(static_cast<double>(Ns[i]), medians[i]);
    try {
        return fit_log_slope(pairs);
    } catch (const Error&) {
        return SlopeFit{};  // n = 0 marks "no fit"
    }
}

struct StudyContext {
    const StudyConfig& cfg;
    Grid grid;
    BoundaryData bd;
    SpatialField F0;
    AbsorptionField f0;
    SpaceTimeField u0;
};

ReportRecord run_cell(const StudyContext& ctx, std::size_t n_index, int rep) {
    const StudyConfig& cfg = ctx.cfg;
    const std::size_t N = cfg.study.N_grid[n_index];
    const auto cell = static_cast<std::uint64_t>(n_index) * static_cast<std::uint64_t>(cfg.study.replicates) +
                      static_cast<std::uint64_t>(rep);
    ReportRecord r;
    r.scenario = std::string(cfg.prior.kind == PriorKind::TruncatedSeries ? "series" : "matern") + "_d" +
                 std::to_string(cfg.d) + "_a" + std::to_string(cfg.prior.alpha);
    r.N = N;
    r.replicate = rep;
    r.data_seed = derive_seed(cfg.study.seed, 2 * cell);
    r.chain_seed = derive_seed(cfg.study.seed, 2 * cell + 1);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    try {
        const PriorSpec ps = cfg.prior_for(N);
        r.J = ps.J;
        GaussianPrior prior(ps, cfg.cutoff, ctx.grid);
        DataConfig dc = cfg.data;
        dc.N = N;
        dc.seed = r.data_seed;
        dc.truth = {{"kind", "series"}, {"J", cfg.truth.J}, {"coefficients", cfg.truth.coefficients}};
        PosteriorTarget target(prior, generate_data(ctx.f0, ctx.bd, cfg.scheme, dc), cfg.link, ctx.bd, cfg.scheme);
        ChainConfig cc = cfg.chain;
        cc.seed = r.chain_seed;
        const ChainResult res = run_chain(cc, target);
        const SpatialField F_bar = posterior_mean(res, prior);
        r.err_forward = norm_l2_spacetime(forward_map(F_bar, cfg.link, ctx.bd, cfg.scheme) - ctx.u0);
        r.err_f = norm_l2_space(push_forward(F_bar, cfg.link).field() - ctx.f0.field());
        r.err_f_pf = norm_l2_space(push_forward_mean(res, prior, cfg.link).field() - ctx.f0.field());
        r.acceptance = res.acceptance_rate;
        r.ess = effective_sample_size(res.log_likelihoods);
        r.step_size = std::exp(res.log_step);
    } catch (const Error& e) {
        r.status = std::string(category_name(e.category())) + ": " + e.what();
        r.err_forward = r.err_f = r.err_f_pf = nan;
    }
    return r;
}

}  // namespace

RateStudyResult run_rate_study(const StudyConfig& cfg) {
    cfg.validate();
    require(cfg.study.N_grid.size() >= 1, ErrorCategory::InvalidArgument, "rates: empty N grid");
    const Grid grid = cfg.grid();
    const BoundaryData bd = cfg.boundary.build(grid);
    const SpatialField F0 = cfg.truth.field(cfg.prior.alpha, cfg.cutoff, grid);
    const AbsorptionField f0 = link_phi_field(F0, cfg.link);
    const StudyContext ctx{cfg, grid, bd, F0, f0, solve_forward(f0, bd, cfg.scheme)};

    const std::size_t n_N = cfg.study.N_grid.size();
    const auto R = static_cast<std::size_t>(cfg.study.replicates);
    const std::size_t n_cells = n_N * R;
    RateStudyResult out;
    out.records.resize(n_cells);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t c = next++; c < n_cells; c = next++)
            out.records[c] = run_cell(ctx, c / R, static_cast<int>(c % R));
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.study.workers, static_cast<unsigned>(n_cells)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    out.N_grid = cfg.study.N_grid;
    std::vector<std::vector<double>> fwd(n_N);
    std::vector<std::vector<double>> ff(n_N);
    std::vector<std::vector<double>> fpf(n_N);
    for (std::size_t c = 0; c < n_cells; ++c) {
        fwd[c / R].push_back(out.records[c].err_forward);
        ff[c / R].push_back(out.records[c].err_f);
        fpf[c / R].push_back(out.records[c].err_f_pf);
    }
    for (std::size_t i = 0; i < n_N; ++i) {
        out.median_forward.push_back(median(fwd[i]));
        out.median_f.push_back(median(ff[i]));
        out.median_f_pf.push_back(median(fpf[i]));
    }
    out.forward = try_fit(out.N_grid, out.median_forward);
    out.f = try_fit(out.N_grid, out.median_f);
    out.f_pf = try_fit(out.N_grid, out.median_f_pf);
    out.forward_monotone = nonincreasing_with_one_inversion(out.median_forward);

    const double denom = 2.0 * cfg.prior.alpha + 4.0 + cfg.d;
    out.theory_forward = -(cfg.prior.alpha + 2.0) / denom;
    out.theory_f = -cfg.prior.alpha / denom;

    // Bootstrap over replicates within each N.
    if (cfg.study.bootstrap > 0 && out.forward.n > 0) {
        Rng rng = make_rng(cfg.study.seed, 1ull << 40);
        std::size_t neg_fwd = 0;
        std::size_t neg_f = 0;
        std::size_t used = 0;
        for (std::size_t b = 0; b < cfg.study.bootstrap; ++b) {
            std::vector<double> mf(n_N);
            std::vector<double> mff(n_N);
            for (std::size_t i = 0; i < n_N; ++i) {
                std::vector<double> sf(R);
                std::vector<double> sff(R);
                for (std::size_t k = 0; k < R; ++k) {
                    const auto pick = std::min<std::size_t>(R - 1, static_cast<std::size_t>(uniform01(rng) * R));
                    sf[k] = fwd[i][pick];
                    sff[k] = ff[i][pick];
                }
                mf[i] = median(sf);
                mff[i] = median(sff);
            }
            const SlopeFit a = try_fit(out.N_grid, mf);
            const SlopeFit c = try_fit(out.N_grid, mff);
            if (a.n == 0) continue;
            ++used;
            if (a.slope < 0.0) ++neg_fwd;
            if (c.n > 0 && c.slope < 0.0) ++neg_f;
        }
        if (used > 0) {
            out.bootstrap_negative_forward = static_cast<double>(neg_fwd) / static_cast<double>(used);
            out.bootstrap_negative_f = static_cast<double>(neg_f) / static_cast<double>(used);
        }
    }
    return out;
}

namespace {

json fit_json(const SlopeFit& f) {
    if (f.n == 0) return nullptr;
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_}, {"n", f.n}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json RateStudyResult::slopes_json() const {
    json med_fwd = json::array();
    json med_f = json::array();
    json med_pf = json::array();
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
        med_fwd.push_back(finite_or_null(median_forward[i]));
        med_f.push_back(finite_or_null(median_f[i]));
        med_pf.push_back(finite_or_null(median_f_pf[i]));
    }
    std::size_t failed = 0;
    for (const auto& r : records)
        if (r.status != "ok") ++failed;
    return {{"N_grid", N_grid},
            {"median_err_forward", med_fwd},
            {"median_err_f", med_f},
            {"median_err_f_pf", med_pf},
            {"fit_forward", fit_json(forward)},
            {"fit_f", fit_json(f)},
            {"fit_f_pf", fit_json(f_pf)},
            {"theory_slope_forward", theory_forward},
            {"theory_slope_f", theory_f},
            {"bootstrap_fraction_negative_forward", bootstrap_negative_forward},
            {"bootstrap_fraction_negative_f", bootstrap_negative_f},
            {"forward_median_monotone", forward_monotone},
            {"failed_cells", failed}};
}

void RateStudyResult::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
    os << "scenario,N,replicate,J,err_forward,err_f,err_f_pf,acceptance,ess,step_size,data_seed,chain_seed,status\n";
    char buf[512];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%llu,", r.scenario.c_str(),
                      r.N, r.replicate, r.J, r.err_forward, r.err_f, r.err_f_pf, r.acceptance, r.ess, r.step_size,
                      static_cast<unsigned long long>(r.data_seed), static_cast<unsigned long long>(r.chain_seed));
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        os << buf << status << '\n';
    }
    require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
}

void RateStudyResult::write_long_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
    os << "scenario,N,replicate,loss,error\n";
    char buf[256];
    for (const auto& r : records) {
        const std::pair<const char*, double> losses[] = {
            {"forward", r.err_forward}, {"f_plugin", r.err_f}, {"f_pushforward_mean", r.err_f_pf}};
        for (const auto& [name, v] : losses) {
            std::snprintf(buf, sizeof buf, "%s,%zu,%d,%s,%.17g\n", r.scenario.c_str(), r.N, r.replicate, name, v);
            os << buf;
        }
    }
    require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
}

std::vector<Point> default_oracle_points(const Grid& grid) {
    std::vector<Point> pts;
    for (int i = 0; i < 10; ++i) {
        Point p;
        p.x[0] = 0.05 + 0.09 * i;
        if (grid.dim() == 2) p.x[1] = 0.5 + 0.3 * std::sin(1.7 * i);
        p.t = grid.t_end() * (0.1 + 0.09 * i);
        pts.push_back(p);
    }
    return pts;
}

}  // namespace heatinv
