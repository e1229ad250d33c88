// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Artifacts of the long runs go under --out.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "heatinv/cli.hpp"
#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

using namespace heatinv;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

BoundaryData sine_data(const Grid& g) {
    return BoundaryData::from_functions(
        g, [](std::array<double, 2>, double) { return 0.0; },
        [](std::array<double, 2> x) { return std::sin(kPi * x[0]); });
}

double closed_form_sup_error(int n) {
    const Grid g = Grid::build(1, n, n, 1.0);
    const SpaceTimeField u = solve_forward(AbsorptionField::constant(g, 1.0), sine_data(g));
    double err = 0.0;
    for (int k = 0; k < g.n_t(); ++k)
        for (std::size_t s = 0; s < g.n_space(); ++s) {
            const double exact = std::exp(-(1.0 + kPi * kPi / 2.0) * g.time(k)) * std::sin(kPi * g.position(s)[0]);
            err = std::max(err, std::abs(u.at(s, k) - exact));
        }
    return err;
}

// 1 -------------------------------------------------------------------------
Outcome solver_correctness() {
    const double e65 = closed_form_sup_error(65);
    const double e129 = closed_form_sup_error(129);
    const double order = std::log2(e65 / e129);
    return {e129 <= 1e-3 && order >= 1.8, fmt("sup error %.3e at n=129 (<= 1e-3), order %.3f (>= 1.8)", e129, order)};
}

// 2 -------------------------------------------------------------------------
Outcome oracle_agreement(const fs::path& out) {
    const Grid g = Grid::build(1, 129, 129, 1.0);
    const auto f = AbsorptionField::constant(g, 1.0);
    const BoundaryData bd = sine_data(g);
    PathConfig cfg;
    cfg.n_paths = 10000;
    cfg.seed = 2;
    const auto pts = default_oracle_points(g);
    const SpaceTimeField u = solve_forward(f, bd);
    const ValidationReport rep = validate_solution(u, f, bd, pts, cfg);
    rep.write_csv(out / "oracle.csv");

    std::vector<double> corrupted(u.values().begin(), u.values().end());
    for (double& v : corrupted) v *= 1.1;
    const ValidationReport neg = validate_solution(SpaceTimeField(g, corrupted), f, bd, pts, cfg);
    neg.write_csv(out / "oracle_corrupted.csv");
    return {rep.passed && !neg.passed,
            fmt("%.0f%% of |z| <= 4 (>= 95%%); corrupted x1.1 solver %.0f%% -> %s", 100 * rep.pass_fraction,
                100 * neg.pass_fraction, neg.passed ? "not detected" : "rejected")};
}

// 3 -------------------------------------------------------------------------
Outcome maximum_principle() {
    const SchemeConfig be = SchemeConfig::backward_euler();
    std::size_t violations = 0;
    std::size_t nodes = 0;
    double min_u = std::numeric_limits<double>::infinity();
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        Rng rng = make_rng(31, trial);
        const int d = trial % 5 == 4 ? 2 : 1;
        const Grid g = Grid::build(d, d == 1 ? 65 : 17, 33, 1.0);
        // f >= 0 from a random smooth profile, g > 0 varying in space and
        // time, u0 > 0 matching g at t = 0 on the boundary.
        const double fa = 5.0 * uniform01(rng), fb = uniform01(rng), fk = 1 + 4 * uniform01(rng);
        const double ga = 0.1 + uniform01(rng), gb = 0.9 * uniform01(rng), gr = 3 * uniform01(rng);
        const double ua = 2.0 * uniform01(rng), uk = 1 + std::floor(3 * uniform01(rng));
        auto g_fn = [&](std::array<double, 2> x, double t) {
            return ga * (1 + gb * std::sin(2 * kPi * (x[0] + x[1]) + gr * t)) * std::exp(-gr * t / 3);
        };
        auto u0_fn = [&](std::array<double, 2> x) {
            double bump = std::sin(uk * kPi * x[0]);
            if (d == 2) bump *= std::sin(uk * kPi * x[1]);
            return g_fn(x, 0.0) + ua * bump * bump;
        };
        const auto f = AbsorptionField(SpatialField::sample(g, [&](std::array<double, 2> x) {
            return fa * (1 + fb * std::cos(fk * kPi * x[0]) * std::cos(fk * x[1]));
        }));
        const BoundaryData bd = BoundaryData::from_functions(g, g_fn, u0_fn);
        const SpaceTimeField u = solve_forward(f, bd, be);
        const double bound = bd.u0_sup() + bd.g_sup();
        for (double v : u.values()) {
            ++nodes;
            min_u = std::min(min_u, v);
            if (!(v > 0.0 && v <= bound)) ++violations;
        }
    }
    return {violations == 0, fmt("%zu violations over %zu nodes of 50 solves (min u %.3e)", violations, nodes, min_u)};
}

// 4 -------------------------------------------------------------------------
Outcome ratio_identity() {
    const Grid g = Grid::build(1, 129, 129, 1.0);
    const BoundaryData bd = BoundaryData::decaying(g, 1.0);
    const LinkSpec link;
    const std::vector<std::vector<double>> family{
        {1.5, -2.0, 1.5}, {-1.0, 0.5, 2.0}, {2.0, 1.0, -1.0}, {0.0, -3.0, 0.0}, {-2.0, 0.0, 0.0}};
    double worst = 0.0;
    for (const auto& coeffs : family) {
        const AbsorptionField f = link_phi_field(synthesize_series(CoefficientVector(1, 1, coeffs), 3, CutoffSpec{}, g), link);
        const SpaceTimeField u = solve_forward(f, bd);
        for (int k : {32, 64, 96}) {
            const SpatialField rec = recover_absorption(u, k);
            double num = 0.0, den = 0.0;
            for (std::size_t s = 0; s < g.n_space(); ++s) {
                if (g.on_boundary(s)) continue;
                num += g.space_weight(s) * (rec[s] - f[s]) * (rec[s] - f[s]);
                den += g.space_weight(s) * f[s] * f[s];
            }
            worst = std::max(worst, std::sqrt(num / den));
        }
    }
    return {worst <= 5e-2, fmt("max relative L2 error %.3e over 5 fields x 3 time levels (<= 5e-2)", worst)};
}

// 5 -------------------------------------------------------------------------
Outcome prior_invariance() {
    const Grid g = Grid::build(1, 65, 9, 1.0);
    PriorSpec ps;
    ps.kind = PriorKind::MaternGrid;
    const GaussianPrior prior(ps, CutoffSpec{}, g);
    Dataset empty;
    PosteriorTarget target(prior, empty, LinkSpec{}, BoundaryData::decaying(g, 1.0));
    ChainConfig cc;
    cc.n_steps = 20000;
    cc.burn_in = 2000;
    cc.seed = 17;
    const ChainResult chain = run_chain(cc, target);

    std::vector<std::vector<double>> weights;
    auto nodal = [&](double x) {
        std::vector<double> w(g.n_space(), 0.0);
        w[static_cast<std::size_t>(std::lround(x / g.h()))] = 1.0;
        return w;
    };
    weights.push_back(nodal(0.5));
    weights.push_back(nodal(0.25));
    std::vector<double> integral(g.n_space());
    std::vector<double> diff(g.n_space(), 0.0);
    std::vector<double> wave(g.n_space());
    for (std::size_t s = 0; s < g.n_space(); ++s) {
        integral[s] = g.space_weight(s);
        wave[s] = g.space_weight(s) * std::sin(3 * kPi * g.position(s)[0]);
    }
    diff[20] = 1.0;
    diff[44] = -1.0;
    weights.push_back(integral);
    weights.push_back(diff);
    weights.push_back(wave);

    std::string detail;
    bool ok = true;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = prior.functional_variance(weights[i]);
        std::vector<double> vals;
        for (const auto& state : chain.states) {
            const SpatialField F = prior.field(state);
            double v = 0.0;
            for (std::size_t s = 0; s < g.n_space(); ++s) v += weights[i][s] * F[s];
            vals.push_back(v);
        }
        double mean = 0.0;
        for (double v : vals) mean += v / vals.size();
        std::vector<double> sq;
        for (double v : vals) sq.push_back((v - mean) * (v - mean));
        double var = 0.0;
        for (double v : sq) var += v / sq.size();
        double spread = 0.0;
        for (double v : sq) spread += (v - var) * (v - var) / (sq.size() - 1);
        const double se = std::sqrt(spread / effective_sample_size(sq));
        const double z = (var - exact) / se;
        ok = ok && std::abs(z) <= 3.0;
        detail += fmt("%s%.2f", i ? ", " : "", z);
    }
    return {ok, fmt("acceptance %.3f; variance z-scores [%s] (|z| <= 3)", chain.acceptance_rate, detail.c_str())};
}

// 6 -------------------------------------------------------------------------
Outcome rescaling() {
    double worst_factor = 0.0;
    for (std::size_t N = 1; N <= (std::size_t{1} << 20); N *= 2) {
        const double ref = std::pow(static_cast<double>(N), -1.0 / 22.0);
        worst_factor = std::max(worst_factor, std::abs(rescale_factor(N, 3, 1) - ref) / ref);
    }
    double worst_norm = 0.0;
    Rng rng = make_rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        CoefficientVector c(3, 1);
        for (double& v : c.entries()) v = standard_normal(rng);
        for (std::size_t N : {128u, 4096u}) {
            const double lhs = rkhs_norm(rescale_prior(c, N, 3, 1), 3);
            const double rhs = rescale_factor(N, 3, 1) * rkhs_norm(c, 3);
            worst_norm = std::max(worst_norm, std::abs(lhs - rhs) / rhs);
        }
    }
    const double eps = std::numeric_limits<double>::epsilon();
    return {worst_factor <= 2 * eps && worst_norm <= 4 * eps,
            fmt("factor rel. error %.2e, RKHS multiplicativity rel. error %.2e (machine eps %.2e)", worst_factor,
                worst_norm, eps)};
}

// 7, 8 ----------------------------------------------------------------------
struct RateOutcomes {
    Outcome forward;
    Outcome recovery;
};

RateOutcomes rate_trends(const fs::path& out) {
    const StudyConfig cfg;  // d = 1, alpha = 3, N 128..4096, R = 5, truncation rule on
    const RateStudyResult r = run_rate_study(cfg);
    r.write_csv(out / "rates.csv");
    r.write_long_csv(out / "rates_long.csv");
    std::ofstream(out / "slopes.json") << r.slopes_json().dump(2) << '\n';
    const bool fwd_ok = r.forward.n > 0 && r.forward.slope < 0.0 && r.forward.slope >= -0.75 &&
                        r.forward.slope <= -0.15 && r.median_forward.back() < r.median_forward.front();
    const bool f_ok = r.f.n > 0 && r.f.slope < 0.0 && r.median_f.back() < r.median_f.front();
    return {{fwd_ok, fmt("slope %.3f +- %.3f in [-0.75, -0.15] (theory %.3f); median err_forward %.3e -> %.3e",
                         r.forward.slope, r.forward.stderr_, r.theory_forward, r.median_forward.front(),
                         r.median_forward.back())},
            {f_ok, fmt("slope %.3f +- %.3f < 0 (theory %.3f); median err_f %.3e -> %.3e", r.f.slope, r.f.stderr_,
                       r.theory_f, r.median_f.front(), r.median_f.back())}};
}

// 9 -------------------------------------------------------------------------
Outcome lower_bound(const fs::path& out) {
    const LowerBoundReport r = run_lower_bound(StudyConfig{});
    std::ofstream(out / "lowerbound.json") << r.to_json().dump(2) << '\n';
    return {r.passed(), fmt("j=%d M=%zu kappa=%.3g: %zu separation violations, epsilon %.3f (<= 1)", r.j, r.M, r.kappa,
                            r.separation_violations, r.epsilon)};
}

// 10 ------------------------------------------------------------------------
Outcome inequality_suites(const fs::path& out) {
    const StudyConfig cfg;
    nlohmann::json reports = nlohmann::json::array();
    bool ok = true;
    std::string detail;
    for (auto fn : {check_forward_lipschitz, check_stability, check_norm_bound, check_interpolation}) {
        const CheckReport r = fn(cfg);
        ok = ok && r.passed;
        reports.push_back(r.to_json());
        detail += fmt("%s%s %.1f%%%s", detail.empty() ? "" : ", ", r.name.c_str(), 100 * r.relative_change,
                      r.identity_value == 0.0 ? "" : " (identity nonzero)");
    }
    std::ofstream(out / "checks.json") << reports.dump(2) << '\n';
    return {ok, "change under refinement: " + detail + " (<= 30%, identities exactly 0)"};
}

// 11 ------------------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream is(e.path(), std::ios::binary);
        files[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(is), {});
    }
    return files;
}

Outcome reproducibility(const fs::path& out) {
    const fs::path root = out / "replay";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream cfg(root / "small.json");
        cfg << R"({
  "grid": {"n_x": 33, "n_t": 33},
  "data": {"N": 128},
  "chain": {"n_steps": 400, "burn_in": 100},
  "study": {"N_grid": [64, 128, 256], "replicates": 2, "bootstrap": 100},
  "oracle": {"n_paths": 500, "dt_path": 0.001},
  "lowerbound": {"N": 256},
  "checks": {"n_draws": 4}
})";
    }
    const std::string cfg = (root / "small.json").string();
    std::ostringstream sink;
    auto run = [&](std::vector<std::string> args) { return run_cli(args, sink, sink); };

    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"forward_csv", {"forward", "-c", cfg}},
        {"forward_bin", {"forward", "-c", cfg, "--format", "binary"}},
        {"oracle", {"oracle-check", "-c", cfg}},
        {"simulate", {"simulate", "-c", cfg}},
        {"sample_data", {"sample", "-c", cfg, "--data", (root / "simulate" / "dataset.csv").string()}},
        {"sample", {"sample", "-c", cfg}},
        {"sample_resume", {"sample", "-c", cfg, "--resume", (root / "sample").string()}},
        {"rates", {"rates", "-c", cfg}},
        {"lowerbound", {"lowerbound", "-c", cfg}},
        {"checks", {"checks", "-c", cfg}},
    };
    std::size_t identical = 0;
    std::string bad;
    for (const auto& [name, args] : runs) {
        std::vector<std::string> a = args;
        a.insert(a.end(), {"-o", (root / name).string()});
        const int code = run(a);
        const int replay = run({"replay", (root / name / "manifest.json").string(), "-o", (root / (name + "_replay")).string()});
        const bool same = code == replay && (code == kExitOk || code == kExitCheckFailed) &&
                          snapshot(root / name) == snapshot(root / (name + "_replay"));
        if (same)
            ++identical;
        else
            bad += " " + name;
    }
    return {identical == runs.size(),
            fmt("%zu of %zu CLI runs replayed byte-identically from their manifests%s", identical, runs.size(),
                bad.empty() ? "" : (" (differs:" + bad + ")").c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heatinv acceptance suite", "heatinv_acceptance"};
    std::string out = "acceptance_out";
    std::vector<int> only;
    app.add_option("--out", out, "directory for run artifacts")->capture_default_str();
    app.add_option("--only", only, "run only these criteria (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(out);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail
                  << fmt(" (%.1f s)", secs) << std::endl;
    };
    auto timed = [](double budget, std::function<Outcome()> fn) {
        return [budget, fn] {
            const auto t0 = std::chrono::steady_clock::now();
            Outcome o = fn();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (secs > budget) {
                o.pass = false;
                o.detail += fmt("; runtime %.1f s over the %.0f s budget", secs, budget);
            }
            return o;
        };
    };

    const fs::path dir(out);
    report(1, "solver correctness", timed(10, solver_correctness));
    report(2, "oracle agreement", timed(120, [&] { return oracle_agreement(dir); }));
    report(3, "maximum principle and positivity", maximum_principle);
    report(4, "ratio-identity round trip", ratio_identity);
    report(5, "prior invariance of the sampler", prior_invariance);
    report(6, "rescaling exactness", rescaling);
    if (wanted(7) || wanted(8)) {
        const auto t0 = std::chrono::steady_clock::now();
        RateOutcomes r;
        try {
            r = rate_trends(dir);
        } catch (const std::exception& e) {
            r.forward = r.recovery = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > 7200) r.forward = {false, r.forward.detail + "; over the 2 h budget"};
        report(7, "rate trend", [&] { return r.forward; });
        report(8, "recovery trend", [&] { return r.recovery; });
        std::cout << fmt("      rate study wall time %.1f s", secs) << std::endl;
    }
    report(9, "lower-bound construction", timed(600, [&] { return lower_bound(dir); }));
    report(10, "inequality suites", [&] { return inequality_suites(dir); });
    report(11, "reproducibility", [&] { return reproducibility(dir); });

    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : fmt("%d CRITERIA FAILED", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
