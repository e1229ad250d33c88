#include "heatinv/measurement.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "heatinv/error.hpp"
#include "heatinv/random.hpp"

namespace heatinv {

using nlohmann::json;

void Dataset::validate() const {
    require(dim == 1 || dim == 2, ErrorCategory::Schema, "dataset: dim must be 1 or 2");
    require(points.size() == observations.size(), ErrorCategory::Schema,
            "dataset: points and observations differ in length");
    require(sigma >= 0.0 && std::isfinite(sigma), ErrorCategory::Schema, "dataset: sigma must be >= 0");
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(std::isfinite(observations[i]), ErrorCategory::Schema, "dataset: non-finite observation");
        for (int a = 0; a < dim; ++a)
            require(points[i].x[a] > 0.0 && points[i].x[a] < 1.0, ErrorCategory::Schema,
                    "dataset: point outside the open domain");
        require(points[i].t > 0.0, ErrorCategory::Schema, "dataset: point outside the open time interval");
    }
}

bool operator==(const Dataset& a, const Dataset& b) {
    if (a.dim != b.dim || a.sigma != b.sigma || a.observations != b.observations || a.metadata != b.metadata ||
        a.points.size() != b.points.size())
        return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].x != b.points[i].x || a.points[i].t != b.points[i].t) return false;
    return true;
}

std::vector<Point> sample_design(std::size_t N, const Grid& grid, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    std::vector<Point> pts(N);
    for (auto& p : pts) {
        for (int a = 0; a < grid.dim(); ++a) p.x[a] = uniform_open01(rng);
        p.t = grid.t_end() * uniform_open01(rng);
    }
    return pts;
}

Dataset generate_data(const AbsorptionField& f0, const BoundaryData& bd, const SchemeConfig& scheme,
                      const DataConfig& cfg) {
    require(cfg.sigma >= 0.0 && std::isfinite(cfg.sigma), ErrorCategory::InvalidArgument,
            "generate_data: sigma must be >= 0");
    const Grid& grid = f0.grid();
    Dataset data;
    data.dim = grid.dim();
    data.sigma = cfg.sigma;
    data.points = sample_design(cfg.N, grid, cfg.seed);
    data.observations.resize(cfg.N);

    if (cfg.N > 0) {
        SpaceTimeField u(grid);
        if (cfg.refine_truth) {
            const Grid fine = grid.refined();
            const AbsorptionField f_fine(resample(f0.field(), fine), f0.f_min());
            u = solve_forward(f_fine, bd.resampled(fine), scheme);
        } else {
            u = solve_forward(f0, bd, scheme);
        }
        Rng noise = make_rng(cfg.seed, 1);
        for (std::size_t i = 0; i < cfg.N; ++i)
            data.observations[i] = interpolate(u, data.points[i]) + cfg.sigma * standard_normal(noise);
    }

    data.metadata = {{"grid", to_json(grid)},
                     {"seed", cfg.seed},
                     {"N", cfg.N},
                     {"sigma", cfg.sigma},
                     {"noiseless", cfg.sigma == 0.0},
                     {"refine_truth", cfg.refine_truth},
                     {"truth", cfg.truth},
                     {"design", "iid uniform on the open cylinder, stream 0; noise stream 1"}};
    return data;
}

double log_likelihood_of_solution(const SpaceTimeField& u, const Dataset& data) {
    require(data.sigma > 0.0, ErrorCategory::InvalidArgument, "log_likelihood: sigma must be > 0");
    double rss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = data.observations[i] - interpolate(u, data.points[i]);
        rss += r * r;
    }
    return -rss / (2.0 * data.sigma * data.sigma);
}

double log_likelihood(const SpatialField& F, const Dataset& data, const LinkSpec& link, const BoundaryData& bd,
                      const SchemeConfig& scheme) {
    require(data.sigma > 0.0, ErrorCategory::InvalidArgument, "log_likelihood: sigma must be > 0");
    if (data.size() == 0) return 0.0;
    return log_likelihood_of_solution(forward_map(F, link, bd, scheme), data);
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    data.validate();
    {
        std::ofstream os(path);
        require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
        os << (data.dim == 1 ? "x1,t,y\n" : "x1,x2,t,y\n");
        char buf[128];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& p = data.points[i];
            if (data.dim == 1)
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x[0], p.t, data.observations[i]);
            else
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x[0], p.x[1], p.t,
                              data.observations[i]);
            os << buf;
        }
        require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
    }
    json side = {{"dim", data.dim}, {"N", data.size()}, {"sigma", data.sigma}, {"metadata", data.metadata}};
    std::ofstream hs(sidecar_path(path));
    require(static_cast<bool>(hs), ErrorCategory::Io, "cannot write " + sidecar_path(path).string());
    hs << side.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
    Dataset data;
    std::size_t expected_n = 0;
    {
        std::ifstream hs(sidecar_path(path));
        require(static_cast<bool>(hs), ErrorCategory::Io, "cannot read " + sidecar_path(path).string());
        try {
            json side;
            hs >> side;
            data.dim = side.at("dim").get<int>();
            data.sigma = side.at("sigma").get<double>();
            expected_n = side.at("N").get<std::size_t>();
            data.metadata = side.value("metadata", json::object());
        } catch (const json::exception& e) {
            fail(ErrorCategory::Schema, std::string("dataset sidecar: ") + e.what());
        }
    }
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCategory::Io, "cannot read " + path.string());
    std::string line;
    std::getline(is, line);
    const std::string header = data.dim == 1 ? "x1,t,y" : "x1,x2,t,y";
    require(line == header, ErrorCategory::Schema, "dataset csv: expected header '" + header + "'");
    const std::size_t cols = data.dim == 1 ? 3 : 4;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
                require(used == cell.size(), ErrorCategory::Schema, "dataset csv: trailing characters");
            } catch (const std::logic_error&) {
                fail(ErrorCategory::Schema, "dataset csv: unparsable value '" + cell + "'");
            }
        }
        require(v.size() == cols, ErrorCategory::Schema, "dataset csv: wrong column count");
        Point p;
        p.x[0] = v[0];
        if (data.dim == 2) p.x[1] = v[1];
        p.t = v[cols - 2];
        data.points.push_back(p);
        data.observations.push_back(v[cols - 1]);
    }
    require(data.size() == expected_n, ErrorCategory::Schema, "dataset: row count does not match sidecar N");
    data.validate();
    return data;
}

}  // namespace heatinv
