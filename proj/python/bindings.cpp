#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "heatinv/cli.hpp"
#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

namespace py = pybind11;
using namespace heatinv;

namespace {

// Config dicts and report objects cross the boundary as JSON text.
StudyConfig config_of(const py::object& cfg) {
    if (cfg.is_none()) return StudyConfig{};
    const std::string text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
    return config_from_json(nlohmann::json::parse(text));
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::array_t<double> spatial_array(const SpatialField& w) {
    const Grid& g = w.grid();
    std::vector<py::ssize_t> shape{g.n_x()};
    if (g.dim() == 2) shape = {g.n_x(), g.n_x()};
    py::array_t<double> a(shape);
    std::copy(w.values().begin(), w.values().end(), a.mutable_data());
    return a;
}

py::array_t<double> spacetime_array(const SpaceTimeField& u) {
    const Grid& g = u.grid();
    std::vector<py::ssize_t> shape{g.n_t(), g.n_x()};
    if (g.dim() == 2) shape = {g.n_t(), g.n_x(), g.n_x()};
    py::array_t<double> a(shape);
    std::copy(u.values().begin(), u.values().end(), a.mutable_data());
    return a;
}

SpatialField field_of(const Grid& g, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    require(static_cast<std::size_t>(a.size()) == g.n_space(), ErrorCategory::InvalidArgument,
            "array has " + std::to_string(a.size()) + " entries, grid has " + std::to_string(g.n_space()) + " nodes");
    return SpatialField(g, std::vector<double>(a.data(), a.data() + a.size()));
}

AbsorptionField absorption_of(const StudyConfig& cfg, const Grid& g, const py::object& f) {
    if (f.is_none()) return link_phi_field(cfg.truth.field(cfg.prior.alpha, cfg.cutoff, g), cfg.link);
    return AbsorptionField(field_of(g, f.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>()));
}

py::dict chain_dict(const ChainResult& r, const GaussianPrior& prior, const LinkSpec& link) {
    py::dict d;
    const std::size_t n = r.states.size(), k = prior.dimension();
    py::array_t<double> states({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(k)});
    for (std::size_t i = 0; i < n; ++i) std::copy(r.states[i].begin(), r.states[i].end(), states.mutable_data() + i * k);
    d["states"] = states;
    d["log_likelihoods"] = py::array_t<double>(r.log_likelihoods.size(), r.log_likelihoods.data());
    d["step_sizes"] = py::array_t<double>(r.step_sizes.size(), r.step_sizes.data());
    d["acceptance_rate"] = r.acceptance_rate;
    d["steps_done"] = r.steps_done;
    if (n > 0) {
        const SpatialField F_bar = posterior_mean(r, prior);
        d["posterior_mean"] = spatial_array(F_bar);
        d["f_plugin"] = spatial_array(push_forward(F_bar, link).field());
        d["f_pushforward_mean"] = spatial_array(push_forward_mean(r, prior, link).field());
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Absorption-coefficient inference for the heat equation";
    m.attr("__version__") = kVersion;

    static py::exception<Error> error(m, "HeatinvError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            error((std::string(category_name(e.category())) + ": " + e.what()).c_str());
        }
    });

    m.def("default_config", [] { return to_python(to_json(StudyConfig{})); });
    m.def("normalize_config", [](const py::object& cfg) { return to_python(to_json(config_of(cfg))); },
          py::arg("config"), "Fill defaults and validate a partial config.");

    m.def(
        "solve_forward",
        [](const py::object& cfg_obj, const py::object& f) {
            const StudyConfig cfg = config_of(cfg_obj);
            const Grid g = cfg.grid();
            const AbsorptionField af = absorption_of(cfg, g, f);
            return spacetime_array(solve_forward(af, cfg.boundary.build(g), cfg.scheme));
        },
        py::arg("config") = py::none(), py::arg("f") = py::none(),
        "Solution on the space-time grid, shape (n_t, n_x[, n_x]). f defaults to the configured truth.");

    m.def(
        "estimate_point",
        [](const py::object& cfg_obj, std::vector<double> x, double t, const py::object& f) {
            const StudyConfig cfg = config_of(cfg_obj);
            const Grid g = cfg.grid();
            require(x.size() == static_cast<std::size_t>(g.dim()), ErrorCategory::InvalidArgument,
                    "x must have one entry per dimension");
            Point z;
            std::copy(x.begin(), x.end(), z.x.begin());
            z.t = t;
            const PointEstimate e = estimate_point(absorption_of(cfg, g, f), cfg.boundary.build(g), z, cfg.oracle.paths);
            py::dict d;
            d["mean"] = e.mean;
            d["stderr"] = e.stderr_;
            d["n_exited"] = e.n_exited;
            d["n_paths"] = e.n_paths;
            return d;
        },
        py::arg("config"), py::arg("x"), py::arg("t"), py::arg("f") = py::none(),
        "Feynman-Kac Monte Carlo estimate of u(x, t).");

    m.def(
        "sample_prior",
        [](const py::object& cfg_obj, std::uint64_t seed, std::size_t N) {
            const StudyConfig cfg = config_of(cfg_obj);
            const GaussianPrior prior(cfg.prior_for(N), cfg.cutoff, cfg.grid());
            Rng rng = make_rng(seed);
            return spatial_array(prior.field(prior.draw_white(rng)));
        },
        py::arg("config") = py::none(), py::arg("seed") = 1, py::arg("N") = 1,
        "One draw of F from the prior used with N observations.");

    m.def(
        "simulate",
        [](const py::object& cfg_obj) {
            const StudyConfig cfg = config_of(cfg_obj);
            const Grid g = cfg.grid();
            DataConfig dc = cfg.data;
            const Dataset data = generate_data(absorption_of(cfg, g, py::none()), cfg.boundary.build(g), cfg.scheme, dc);
            py::array_t<double> pts({static_cast<py::ssize_t>(data.size()), static_cast<py::ssize_t>(g.dim() + 1)});
            double* p = pts.mutable_data();
            for (const Point& z : data.points) {
                for (int i = 0; i < g.dim(); ++i) *p++ = z.x[i];
                *p++ = z.t;
            }
            py::dict d;
            d["points"] = pts;
            d["observations"] = py::array_t<double>(data.observations.size(), data.observations.data());
            d["sigma"] = data.sigma;
            return d;
        },
        py::arg("config") = py::none(), "Noisy point data from the configured truth; points are rows (x..., t).");

    m.def(
        "run_chain",
        [](const py::object& cfg_obj) {
            const StudyConfig cfg = config_of(cfg_obj);
            const Grid g = cfg.grid();
            const BoundaryData bd = cfg.boundary.build(g);
            const Dataset data = generate_data(absorption_of(cfg, g, py::none()), bd, cfg.scheme, cfg.data);
            const GaussianPrior prior(cfg.prior_for(std::max<std::size_t>(data.size(), 1)), cfg.cutoff, g);
            const PosteriorTarget target(prior, data, cfg.link, bd, cfg.scheme);
            ChainResult r;
            {
                py::gil_scoped_release release;
                r = run_chain(cfg.chain, target);
            }
            return chain_dict(r, prior, cfg.link);
        },
        py::arg("config") = py::none(), "Simulate data, then run the pCN chain on it.");

    m.def(
        "rate_study",
        [](const py::object& cfg_obj) {
            const StudyConfig cfg = config_of(cfg_obj);
            nlohmann::json j;
            {
                py::gil_scoped_release release;
                j = run_rate_study(cfg).slopes_json();
            }
            return to_python(j);
        },
        py::arg("config") = py::none());

    m.def(
        "lower_bound",
        [](const py::object& cfg_obj) {
            const StudyConfig cfg = config_of(cfg_obj);
            nlohmann::json j;
            {
                py::gil_scoped_release release;
                const LowerBoundReport r = run_lower_bound(cfg);
                j = r.to_json();
                j["passed"] = r.passed();
            }
            return to_python(j);
        },
        py::arg("config") = py::none());

    m.def(
        "checks",
        [](const py::object& cfg_obj) {
            const StudyConfig cfg = config_of(cfg_obj);
            nlohmann::json out = nlohmann::json::array();
            {
                py::gil_scoped_release release;
                for (auto fn : {check_forward_lipschitz, check_stability, check_norm_bound, check_interpolation})
                    out.push_back(fn(cfg).to_json());
            }
            return to_python(out);
        },
        py::arg("config") = py::none());

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
