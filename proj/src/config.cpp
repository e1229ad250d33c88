#include <fstream>
#include <set>

#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

namespace heatinv {

using nlohmann::json;

BoundaryData BoundarySpec::build(const Grid& grid) const {
    switch (kind) {
        case BoundaryKind::Constant: return BoundaryData::constant(grid, c);
        case BoundaryKind::Decaying: return BoundaryData::decaying(grid, c);
        case BoundaryKind::Bump: return BoundaryData::bump(grid, c, amplitude);
    }
    fail(ErrorCategory::InvalidArgument, "boundary: unknown kind");
}

SpatialField TruthSpec::field(int alpha, const CutoffSpec& cutoff, const Grid& grid) const {
    return synthesize_series(CoefficientVector(J, grid.dim(), coefficients), alpha, cutoff, grid);
}

StudyConfig::StudyConfig() {
    prior.rescale = true;
    chain.n_steps = 20000;
    chain.burn_in = 5000;
    data.N = 512;
}

PriorSpec StudyConfig::prior_for(std::size_t N) const {
    PriorSpec p = prior;
    p.d = d;
    p.n_for_rescale = std::max<std::size_t>(N, 1);
    if (study.truncation_rule && p.kind == PriorKind::TruncatedSeries)
        p.J = PriorSpec::truncation_level(std::max<std::size_t>(N, 1), p.alpha, d);
    return p;
}

void StudyConfig::validate() const {
    (void)grid();
    scheme.validate();
    link.validate();
    cutoff.validate();
    require(prior.d == d, ErrorCategory::InvalidArgument, "config: prior dimension differs from grid dimension");
    prior.validate();
    require(truth.coefficients.size() == series_modes(truth.J, d).size(), ErrorCategory::InvalidArgument,
            "config: truth coefficient count does not match truth.J");
    chain.validate();
    require(data.sigma >= 0.0, ErrorCategory::InvalidArgument, "config: data.sigma must be >= 0");
    require(study.replicates >= 1, ErrorCategory::InvalidArgument, "config: study.replicates must be >= 1");
    for (std::size_t i = 1; i < study.N_grid.size(); ++i)
        require(study.N_grid[i] > study.N_grid[i - 1], ErrorCategory::InvalidArgument,
                "config: study.N_grid must be strictly increasing");
    require(lowerbound.kappa >= 0.0 && lowerbound.sigma > 0.0, ErrorCategory::InvalidArgument,
            "config: lowerbound needs kappa >= 0 and sigma > 0");
    require(checks.n_draws >= 1, ErrorCategory::InvalidArgument, "config: checks.n_draws must be >= 1");
}

namespace {

void check_keys(const json& section, const std::string& name, std::initializer_list<const char*> allowed) {
    require(section.is_object(), ErrorCategory::Schema, "config: section '" + name + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : section.items())
        require(ok.count(key) == 1, ErrorCategory::Schema, "config: unknown key '" + name + "." + key + "'");
}

template <class T>
void read(const json& section, const char* key, T& out) {
    if (section.contains(key)) out = section.at(key).get<T>();
}

std::string positivity_name(PositivityPolicy p) {
    switch (p) {
        case PositivityPolicy::Ignore: return "ignore";
        case PositivityPolicy::Warn: return "warn";
        case PositivityPolicy::Error: return "error";
    }
    return "ignore";
}

PositivityPolicy positivity_from(const std::string& s) {
    if (s == "ignore") return PositivityPolicy::Ignore;
    if (s == "warn") return PositivityPolicy::Warn;
    if (s == "error") return PositivityPolicy::Error;
    fail(ErrorCategory::Schema, "config: scheme.positivity must be ignore, warn or error");
}

std::string boundary_name(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::Constant: return "constant";
        case BoundaryKind::Decaying: return "decaying";
        case BoundaryKind::Bump: return "bump";
    }
    return "decaying";
}

BoundaryKind boundary_from(const std::string& s) {
    if (s == "constant") return BoundaryKind::Constant;
    if (s == "decaying") return BoundaryKind::Decaying;
    if (s == "bump") return BoundaryKind::Bump;
    fail(ErrorCategory::Schema, "config: boundary.kind must be constant, decaying or bump");
}

json point_to_json(const Point& p, int d) {
    return d == 1 ? json{p.x[0], p.t} : json{p.x[0], p.x[1], p.t};
}

Point point_from_json(const json& j, int d) {
    require(j.is_array() && j.size() == static_cast<std::size_t>(d + 1), ErrorCategory::Schema,
            "config: oracle point must list d coordinates and a time");
    Point p;
    for (int a = 0; a < d; ++a) p.x[a] = j.at(a).get<double>();
    p.t = j.at(d).get<double>();
    return p;
}

}  // namespace

StudyConfig config_from_json(const json& j) {
    StudyConfig c;
    try {
        check_keys(j, "root",
                   {"grid", "scheme", "boundary", "link", "prior", "cutoff", "truth", "data", "chain", "study",
                    "oracle", "lowerbound", "checks"});
        if (j.contains("grid")) {
            const auto& s = j.at("grid");
            check_keys(s, "grid", {"d", "n_x", "n_t", "t_end"});
            read(s, "d", c.d);
            read(s, "n_x", c.n_x);
            read(s, "n_t", c.n_t);
            read(s, "t_end", c.t_end);
        }
        c.prior.d = c.d;
        if (j.contains("scheme")) {
            const auto& s = j.at("scheme");
            check_keys(s, "scheme", {"theta", "startup_implicit_steps", "startup_substeps", "tolerance", "max_iterations", "positivity"});
            read(s, "theta", c.scheme.theta);
            read(s, "startup_implicit_steps", c.scheme.startup_implicit_steps);
            read(s, "startup_substeps", c.scheme.startup_substeps);
            read(s, "tolerance", c.scheme.tolerance);
            read(s, "max_iterations", c.scheme.max_iterations);
            if (s.contains("positivity")) c.scheme.positivity = positivity_from(s.at("positivity").get<std::string>());
        }
        if (j.contains("boundary")) {
            const auto& s = j.at("boundary");
            check_keys(s, "boundary", {"kind", "c", "amplitude"});
            if (s.contains("kind")) c.boundary.kind = boundary_from(s.at("kind").get<std::string>());
            read(s, "c", c.boundary.c);
            read(s, "amplitude", c.boundary.amplitude);
        }
        if (j.contains("link")) {
            const auto& s = j.at("link");
            check_keys(s, "link", {"f_min"});
            read(s, "f_min", c.link.f_min);
        }
        if (j.contains("prior")) {
            const auto& s = j.at("prior");
            check_keys(s, "prior", {"kind", "alpha", "J", "rescale", "lengthscale", "variance", "jitter"});
            if (s.contains("kind")) {
                const auto k = s.at("kind").get<std::string>();
                require(k == "series" || k == "matern", ErrorCategory::Schema,
                        "config: prior.kind must be series or matern");
                c.prior.kind = k == "series" ? PriorKind::TruncatedSeries : PriorKind::MaternGrid;
            }
            read(s, "alpha", c.prior.alpha);
            read(s, "J", c.prior.J);
            read(s, "rescale", c.prior.rescale);
            read(s, "lengthscale", c.prior.lengthscale);
            read(s, "variance", c.prior.variance);
            read(s, "jitter", c.prior.jitter);
        }
        if (j.contains("cutoff")) {
            const auto& s = j.at("cutoff");
            check_keys(s, "cutoff", {"r_inner", "r_outer"});
            read(s, "r_inner", c.cutoff.r_inner);
            read(s, "r_outer", c.cutoff.r_outer);
        }
        if (j.contains("truth")) {
            const auto& s = j.at("truth");
            check_keys(s, "truth", {"J", "coefficients"});
            read(s, "J", c.truth.J);
            read(s, "coefficients", c.truth.coefficients);
        }
        if (j.contains("data")) {
            const auto& s = j.at("data");
            check_keys(s, "data", {"N", "sigma", "seed", "refine_truth"});
            read(s, "N", c.data.N);
            read(s, "sigma", c.data.sigma);
            read(s, "seed", c.data.seed);
            read(s, "refine_truth", c.data.refine_truth);
        }
        if (j.contains("chain")) {
            const auto& s = j.at("chain");
            require(s.is_object(), ErrorCategory::Schema, "config: section 'chain' must be an object");
            json merged = to_json(c.chain);
            for (const auto& [key, value] : s.items()) merged[key] = value;
            c.chain = chain_config_from_json(merged);
        }
        if (j.contains("study")) {
            const auto& s = j.at("study");
            check_keys(s, "study",
                       {"N_grid", "replicates", "truncation_rule", "seed", "bootstrap", "workers", "thresholds"});
            read(s, "N_grid", c.study.N_grid);
            read(s, "replicates", c.study.replicates);
            read(s, "truncation_rule", c.study.truncation_rule);
            read(s, "seed", c.study.seed);
            read(s, "bootstrap", c.study.bootstrap);
            read(s, "workers", c.study.workers);
            read(s, "thresholds", c.study.thresholds);
        }
        if (j.contains("oracle")) {
            const auto& s = j.at("oracle");
            check_keys(s, "oracle",
                       {"n_paths", "dt_path", "seed", "bridge_correction", "convention", "block_size", "workers",
                        "points"});
            auto& p = c.oracle.paths;
            read(s, "n_paths", p.n_paths);
            read(s, "dt_path", p.dt_path);
            read(s, "seed", p.seed);
            read(s, "bridge_correction", p.bridge_correction);
            read(s, "block_size", p.block_size);
            read(s, "workers", p.workers);
            if (s.contains("convention")) {
                const auto k = s.at("convention").get<std::string>();
                require(k == "as_written" || k == "backward", ErrorCategory::Schema,
                        "config: oracle.convention must be as_written or backward");
                p.convention = k == "as_written" ? ExitTimeConvention::AsWritten : ExitTimeConvention::Backward;
            }
            if (s.contains("points"))
                for (const auto& pt : s.at("points")) c.oracle.points.push_back(point_from_json(pt, c.d));
        }
        if (j.contains("lowerbound")) {
            const auto& s = j.at("lowerbound");
            check_keys(s, "lowerbound",
                       {"j", "kappa", "c", "M", "separation_fraction", "sigma", "N", "alpha", "seed", "budget"});
            auto& h = c.lowerbound;
            read(s, "j", h.j);
            read(s, "kappa", h.kappa);
            read(s, "c", h.c);
            read(s, "M", h.M);
            read(s, "separation_fraction", h.separation_fraction);
            read(s, "sigma", h.sigma);
            read(s, "N", h.N);
            read(s, "alpha", h.alpha);
            read(s, "seed", h.seed);
            read(s, "budget", h.budget);
        }
        if (j.contains("checks")) {
            const auto& s = j.at("checks");
            check_keys(s, "checks", {"n_draws", "seed", "J", "c_stability", "max_change"});
            read(s, "n_draws", c.checks.n_draws);
            read(s, "seed", c.checks.seed);
            read(s, "J", c.checks.J);
            read(s, "c_stability", c.checks.c_stability);
            read(s, "max_change", c.checks.max_change);
        }
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const StudyConfig& c) {
    json oracle = {{"n_paths", c.oracle.paths.n_paths},
                   {"dt_path", c.oracle.paths.dt_path},
                   {"seed", c.oracle.paths.seed},
                   {"bridge_correction", c.oracle.paths.bridge_correction},
                   {"convention",
                    c.oracle.paths.convention == ExitTimeConvention::AsWritten ? "as_written" : "backward"},
                   {"block_size", c.oracle.paths.block_size},
                   {"workers", c.oracle.paths.workers},
                   {"points", json::array()}};
    for (const auto& p : c.oracle.points) oracle["points"].push_back(point_to_json(p, c.d));
    return {
        {"grid", {{"d", c.d}, {"n_x", c.n_x}, {"n_t", c.n_t}, {"t_end", c.t_end}}},
        {"scheme",
         {{"theta", c.scheme.theta},
          {"startup_implicit_steps", c.scheme.startup_implicit_steps},
          {"startup_substeps", c.scheme.startup_substeps},
          {"tolerance", c.scheme.tolerance},
          {"max_iterations", c.scheme.max_iterations},
          {"positivity", positivity_name(c.scheme.positivity)}}},
        {"boundary", {{"kind", boundary_name(c.boundary.kind)}, {"c", c.boundary.c}, {"amplitude", c.boundary.amplitude}}},
        {"link", {{"f_min", c.link.f_min}}},
        {"prior",
         {{"kind", c.prior.kind == PriorKind::TruncatedSeries ? "series" : "matern"},
          {"alpha", c.prior.alpha},
          {"J", c.prior.J},
          {"rescale", c.prior.rescale},
          {"lengthscale", c.prior.lengthscale},
          {"variance", c.prior.variance},
          {"jitter", c.prior.jitter}}},
        {"cutoff", {{"r_inner", c.cutoff.r_inner}, {"r_outer", c.cutoff.r_outer}}},
        {"truth", {{"J", c.truth.J}, {"coefficients", c.truth.coefficients}}},
        {"data", {{"N", c.data.N}, {"sigma", c.data.sigma}, {"seed", c.data.seed}, {"refine_truth", c.data.refine_truth}}},
        {"chain", to_json(c.chain)},
        {"study",
         {{"N_grid", c.study.N_grid},
          {"replicates", c.study.replicates},
          {"truncation_rule", c.study.truncation_rule},
          {"seed", c.study.seed},
          {"bootstrap", c.study.bootstrap},
          {"workers", c.study.workers},
          {"thresholds", c.study.thresholds}}},
        {"oracle", oracle},
        {"lowerbound",
         {{"j", c.lowerbound.j},
          {"kappa", c.lowerbound.kappa},
          {"c", c.lowerbound.c},
          {"M", c.lowerbound.M},
          {"separation_fraction", c.lowerbound.separation_fraction},
          {"sigma", c.lowerbound.sigma},
          {"N", c.lowerbound.N},
          {"alpha", c.lowerbound.alpha},
          {"seed", c.lowerbound.seed},
          {"budget", c.lowerbound.budget}}},
        {"checks",
         {{"n_draws", c.checks.n_draws},
          {"seed", c.checks.seed},
          {"J", c.checks.J},
          {"c_stability", c.checks.c_stability},
          {"max_change", c.checks.max_change}}},
    };
}

StudyConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCategory::Io, "cannot read config " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace heatinv
