#include "heatinv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

namespace heatinv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// One resolved invocation: everything needed to rerun it.
struct Invocation {
    std::string command;
    StudyConfig config;
    std::string format = "csv";  // forward
    std::string data_path;       // sample; empty: simulate from config
    std::string resume_path;     // sample; previous output directory
};

json invocation_json(const Invocation& inv) {
    return {{"command", inv.command},
            {"format", inv.format},
            {"data", inv.data_path},
            {"resume", inv.resume_path}};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
    os << j.dump(2) << '\n';
    require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
}

void write_spatial_csv(const fs::path& path, const std::vector<std::pair<std::string, const SpatialField*>>& cols) {
    const Grid& g = cols.front().second->grid();
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
    os << (g.dim() == 1 ? "x1" : "x1,x2");
    for (const auto& c : cols) os << ',' << c.first;
    os << '\n';
    char buf[40];
    for (std::size_t s = 0; s < g.n_space(); ++s) {
        const auto x = g.position(s);
        std::snprintf(buf, sizeof buf, "%.17g", x[0]);
        os << buf;
        if (g.dim() == 2) {
            std::snprintf(buf, sizeof buf, "%.17g", x[1]);
            os << ',' << buf;
        }
        for (const auto& c : cols) {
            std::snprintf(buf, sizeof buf, "%.17g", (*c.second)[s]);
            os << ',' << buf;
        }
        os << '\n';
    }
    require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
}

AbsorptionField truth_absorption(const StudyConfig& cfg, const Grid& grid) {
    return link_phi_field(cfg.truth.field(cfg.prior.alpha, cfg.cutoff, grid), cfg.link);
}

json truth_descriptor(const StudyConfig& cfg) {
    return {{"kind", "series"}, {"J", cfg.truth.J}, {"coefficients", cfg.truth.coefficients}};
}

Dataset simulate(const StudyConfig& cfg) {
    const Grid grid = cfg.grid();
    DataConfig dc = cfg.data;
    dc.truth = truth_descriptor(cfg);
    return generate_data(truth_absorption(cfg, grid), cfg.boundary.build(grid), cfg.scheme, dc);
}

/// Executes `inv` into `dir`; returns the exit code and fills `outputs`.
int execute(const Invocation& inv, const fs::path& dir, std::vector<std::string>& outputs, std::ostream& out) {
    const StudyConfig& cfg = inv.config;
    const Grid grid = cfg.grid();
    fs::create_directories(dir);
    auto emit = [&](const std::string& name) { outputs.push_back(name); };
    int code = kExitOk;

    if (inv.command == "forward") {
        require(inv.format == "csv" || inv.format == "binary", ErrorCategory::InvalidArgument,
                "forward: --format must be csv or binary");
        const AbsorptionField f = truth_absorption(cfg, grid);
        const SpaceTimeField u = solve_forward(f, cfg.boundary.build(grid), cfg.scheme);
        const std::string name = inv.format == "csv" ? "solution.csv" : "solution.bin";
        save_field(dir / name, u, inv.format == "csv" ? FieldFormat::Csv : FieldFormat::Binary);
        emit(name);
        emit("solution.json");
        write_spatial_csv(dir / "absorption.csv", {{"f", &f.field()}});
        emit("absorption.csv");
        out << "forward: " << grid.n_spacetime() << " values written to " << (dir / name).string() << '\n';
    } else if (inv.command == "oracle-check") {
        const std::vector<Point> pts = cfg.oracle.points.empty() ? default_oracle_points(grid) : cfg.oracle.points;
        const ValidationReport rep = validate_solver(truth_absorption(cfg, grid), cfg.boundary.build(grid), pts,
                                                     cfg.oracle.paths, cfg.scheme);
        rep.write_csv(dir / "oracle.csv");
        write_json(dir / "oracle_summary.json", rep.summary());
        emit("oracle.csv");
        emit("oracle_summary.json");
        out << "oracle-check: pass fraction " << rep.pass_fraction << (rep.passed ? " (pass)" : " (FAIL)") << '\n';
        if (!rep.passed) code = kExitCheckFailed;
    } else if (inv.command == "simulate") {
        const Dataset data = simulate(cfg);
        save_dataset(dir / "dataset.csv", data);
        emit("dataset.csv");
        emit("dataset.json");
        out << "simulate: " << data.size() << " observations\n";
    } else if (inv.command == "sample") {
        const Dataset data = inv.data_path.empty() ? simulate(cfg) : load_dataset(inv.data_path);
        const PriorSpec ps = cfg.prior_for(std::max<std::size_t>(data.size(), 1));
        GaussianPrior prior(ps, cfg.cutoff, grid);
        PosteriorTarget target(prior, data, cfg.link, cfg.boundary.build(grid), cfg.scheme);
        ChainResult res;
        if (inv.resume_path.empty()) {
            res = run_chain(cfg.chain, target);
        } else {
            ChainResult prev = load_chain(fs::path(inv.resume_path) / "chain");
            require(prev.config.seed == cfg.chain.seed && prev.config.burn_in == cfg.chain.burn_in &&
                        prev.config.thinning == cfg.chain.thinning,
                    ErrorCategory::InvalidArgument, "sample: resumed chain was run with a different chain config");
            res = resume_chain(prev, cfg.chain.n_steps, target);
        }
        save_chain(dir / "chain", res);
        for (const char* n : {"chain/states.csv", "chain/loglik.csv", "chain/step_sizes.csv", "chain/chain.json"})
            emit(n);
        if (!res.states.empty()) {
            const SpatialField F_bar = posterior_mean(res, prior);
            const AbsorptionField plug = push_forward(F_bar, cfg.link);
            const AbsorptionField pf = push_forward_mean(res, prior, cfg.link);
            write_spatial_csv(dir / "posterior_mean.csv",
                              {{"F_mean", &F_bar}, {"f_plugin", &plug.field()}, {"f_pushforward_mean", &pf.field()}});
            emit("posterior_mean.csv");
        }
        json diag = diagnostics(res, prior, cfg.study.thresholds).to_json();
        diag["prior"] = {{"kind", ps.kind == PriorKind::TruncatedSeries ? "series" : "matern"},
                         {"alpha", ps.alpha},
                         {"J", ps.J},
                         {"rescale", ps.rescale},
                         {"rescale_factor", prior.scale()},
                         {"dimension", prior.dimension()}};
        write_json(dir / "diagnostics.json", diag);
        emit("diagnostics.json");
        out << "sample: " << res.steps_done << " steps, acceptance " << res.acceptance_rate << ", kept "
            << res.states.size() << '\n';
    } else if (inv.command == "rates") {
        const RateStudyResult res = run_rate_study(cfg);
        res.write_csv(dir / "rates.csv");
        res.write_long_csv(dir / "rates_long.csv");
        write_json(dir / "slopes.json", res.slopes_json());
        emit("rates.csv");
        emit("rates_long.csv");
        emit("slopes.json");
        out << "rates: forward slope " << res.forward.slope << " (theory " << res.theory_forward << "), f slope "
            << res.f.slope << " (theory " << res.theory_f << ")\n";
    } else if (inv.command == "lowerbound") {
        const LowerBoundReport rep = run_lower_bound(cfg);
        write_json(dir / "lowerbound.json", rep.to_json());
        emit("lowerbound.json");
        out << "lowerbound: M = " << rep.M << ", epsilon = " << rep.epsilon << ", separation violations "
            << rep.separation_violations << '\n';
        if (!rep.passed()) code = kExitCheckFailed;
    } else if (inv.command == "checks") {
        json reports = json::array();
        bool all = true;
        for (auto fn : {check_forward_lipschitz, check_stability, check_norm_bound, check_interpolation}) {
            const CheckReport r = fn(cfg);
            all = all && r.passed;
            reports.push_back(r.to_json());
            out << "checks: " << r.name << " max ratio " << r.max_ratio << " -> " << r.max_ratio_refined
                << (r.passed ? " (pass)" : " (FAIL)") << '\n';
        }
        write_json(dir / "checks.json", {{"reports", reports}, {"passed", all}});
        emit("checks.json");
        if (!all) code = kExitCheckFailed;
    } else {
        fail(ErrorCategory::InvalidArgument, "unknown command '" + inv.command + "'");
    }

    std::sort(outputs.begin(), outputs.end());
    json manifest = {{"tool", "heatinv"},
                     {"version", kVersion},
                     {"invocation", invocation_json(inv)},
                     {"config", to_json(cfg)},
                     {"outputs", outputs},
                     {"exit_code", code}};
    write_json(dir / "manifest.json", manifest);
    return code;
}

int exit_code_for(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::InvalidArgument: return kExitInvalidArgument;
        case ErrorCategory::DomainViolation: return kExitDomainViolation;
        case ErrorCategory::NumericalFailure: return kExitNumericalFailure;
        case ErrorCategory::Io: return kExitIo;
        case ErrorCategory::Schema: return kExitSchema;
    }
    return kExitInvalidArgument;
}

Invocation invocation_from_manifest(const fs::path& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCategory::Io, "cannot read manifest " + path.string());
    Invocation inv;
    try {
        json m;
        is >> m;
        const auto& i = m.at("invocation");
        inv.command = i.at("command").get<std::string>();
        inv.format = i.at("format").get<std::string>();
        inv.data_path = i.at("data").get<std::string>();
        inv.resume_path = i.at("resume").get<std::string>();
        inv.config = config_from_json(m.at("config"));
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("manifest: ") + e.what());
    }
    return inv;
}

std::string absolute_or_empty(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian recovery of the absorption term in a parabolic equation", "heatinv"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path;
    std::string out_dir = "out";
    std::string format = "csv";
    std::string data_path;
    std::string resume_path;
    std::string manifest_path;

    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {{"forward", "solve the forward problem for the configured truth and dump u"},
                        {"oracle-check", "compare the solver against the Feynman-Kac Monte Carlo oracle"},
                        {"simulate", "generate a noisy dataset"},
                        {"sample", "run the posterior sampler"},
                        {"rates", "run the convergence-rate study"},
                        {"lowerbound", "build the hypercube alternatives and their KL report"},
                        {"checks", "run the inequality check suites"}};
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("-c,--config", config_path, "JSON configuration file (defaults apply when omitted)")
            ->check(CLI::ExistingFile);
        sub->add_option("-o,--out", out_dir, "output directory")->capture_default_str();
        if (std::string(s.name) == "forward")
            sub->add_option("--format", format, "solution file format")->check(CLI::IsMember({"csv", "binary"}));
        if (std::string(s.name) == "sample") {
            sub->add_option("--data", data_path, "dataset CSV (simulated from the config when omitted)")
                ->check(CLI::ExistingFile);
            sub->add_option("--resume", resume_path, "output directory of an earlier sample run to continue")
                ->check(CLI::ExistingDirectory);
        }
    }
    CLI::App* replay = app.add_subcommand("replay", "re-run the invocation recorded in a manifest");
    replay->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
    replay->add_option("-o,--out", out_dir, "output directory")->capture_default_str();

    std::vector<std::string> argv_store{"heatinv"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        Invocation inv;
        if (replay->parsed()) {
            inv = invocation_from_manifest(manifest_path);
        } else {
            inv.command = app.get_subcommands().front()->get_name();
            inv.config = config_path.empty() ? StudyConfig{} : load_config(config_path);
            inv.format = format;
            inv.data_path = absolute_or_empty(data_path);
            inv.resume_path = absolute_or_empty(resume_path);
        }
        inv.config.validate();
        std::vector<std::string> outputs;
        return execute(inv, out_dir, outputs, out);
    } catch (const Error& e) {
        err << json{{"error", {{"category", category_name(e.category())}, {"message", e.what()}}}}.dump() << '\n';
        return exit_code_for(e.category());
    } catch (const fs::filesystem_error& e) {
        err << json{{"error", {{"category", "io"}, {"message", e.what()}}}}.dump() << '\n';
        return kExitIo;
    }
}

}  // namespace heatinv
