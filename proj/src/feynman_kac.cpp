#include "heatinv/feynman_kac.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "heatinv/error.hpp"
#include "heatinv/random.hpp"

namespace heatinv {

void PathConfig::validate(const Grid& grid) const {
    require(n_paths >= 100, ErrorCategory::InvalidArgument, "oracle: n_paths must be >= 100");
    const double step = step_for(grid);
    require(step > 0.0 && step <= grid.dt() * (1.0 + 1e-12), ErrorCategory::InvalidArgument,
            "oracle: dt_path must lie in (0, grid dt]");
    require(block_size >= 1, ErrorCategory::InvalidArgument, "oracle: block_size must be >= 1");
}

namespace {

struct BlockSums {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t exited = 0;
};

// Unchecked multilinear interpolation of nodal f; x is inside [0,1]^d.
double f_at(const AbsorptionField& f, const std::array<double, 2>& x) {
    const Grid& g = f.grid();
    const int n = g.n_x();
    auto bracket = [&](double c, int& lo, double& w) {
        const double r = std::clamp(c / g.h(), 0.0, static_cast<double>(n - 1));
        lo = std::min(static_cast<int>(r), n - 2);
        w = r - lo;
    };
    int i = 0;
    double wx = 0.0;
    bracket(x[0], i, wx);
    if (g.dim() == 1) return (1.0 - wx) * f[g.flat(i)] + wx * f[g.flat(i + 1)];
    int j = 0;
    double wy = 0.0;
    bracket(x[1], j, wy);
    return (1.0 - wy) * ((1.0 - wx) * f[g.flat(i, j)] + wx * f[g.flat(i + 1, j)]) +
           wy * ((1.0 - wx) * f[g.flat(i, j + 1)] + wx * f[g.flat(i + 1, j + 1)]);
}

class PathSimulator {
public:
    PathSimulator(const AbsorptionField& f, const BoundaryData& bd, const Point& z, const PathConfig& cfg)
        : f_(f), bd_(bd), z_(z), cfg_(cfg), d_(f.grid().dim()) {
        n_steps_ = std::max<long>(1, std::lround(std::ceil(z.t / cfg.step_for(f.grid()) - 1e-9)));
        dt_ = z.t / static_cast<double>(n_steps_);
        sqrt_dt_ = std::sqrt(dt_);
    }

    BlockSums run_block(std::size_t block, std::size_t count) const {
        Rng rng = make_rng(cfg_.seed, block);
        BlockSums s;
        for (std::size_t p = 0; p < count; ++p) {
            bool exited = false;
            const double v = path(rng, exited);
            s.sum += v;
            s.sum_sq += v * v;
            s.exited += exited ? 1 : 0;
        }
        return s;
    }

private:
    double score_exit(const std::array<double, 2>& x, double tau, double integral) const {
        const double t_g = cfg_.convention == ExitTimeConvention::AsWritten ? tau : z_.t - tau;
        const double g = interpolate(bd_.g(), Point{x, std::clamp(t_g, 0.0, bd_.grid().t_end())});
        return g * std::exp(-integral);
    }

    double path(Rng& rng, bool& exited) const {
        std::array<double, 2> x = z_.x;
        double integral = 0.0;
        for (long k = 0; k < n_steps_; ++k) {
            const double fx = f_at(f_, x);
            std::array<double, 2> next = x;
            for (int a = 0; a < d_; ++a) next[a] += sqrt_dt_ * standard_normal(rng);

            // Discrete crossing: first axis leaving [0,1], exit time by linear
            // interpolation of the crossing.
            double frac = 2.0;
            int axis = -1;
            double wall = 0.0;
            for (int a = 0; a < d_; ++a) {
                if (next[a] <= 0.0 || next[a] >= 1.0) {
                    const double w = next[a] <= 0.0 ? 0.0 : 1.0;
                    const double fr = (x[a] - w) / (x[a] - next[a]);
                    if (fr < frac) {
                        frac = fr;
                        axis = a;
                        wall = w;
                    }
                }
            }
            if (axis < 0 && cfg_.bridge_correction) {
                for (int a = 0; a < d_ && axis < 0; ++a) {
                    const double p0 = std::exp(-2.0 * x[a] * next[a] / dt_);
                    const double p1 = std::exp(-2.0 * (1.0 - x[a]) * (1.0 - next[a]) / dt_);
                    const double u = uniform01(rng);
                    if (u < p0) {
                        axis = a;
                        wall = 0.0;
                    } else if (u < p0 + p1) {
                        axis = a;
                        wall = 1.0;
                    }
                    frac = 0.5;
                }
            }
            if (axis >= 0) {
                std::array<double, 2> xe{};
                for (int a = 0; a < d_; ++a) xe[a] = std::clamp(x[a] + frac * (next[a] - x[a]), 0.0, 1.0);
                xe[axis] = wall;
                integral += fx * frac * dt_;
                exited = true;
                return score_exit(xe, (static_cast<double>(k) + frac) * dt_, integral);
            }
            integral += fx * dt_;
            x = next;
        }
        exited = false;
        return interpolate(bd_.u0(), x) * std::exp(-integral);
    }

    const AbsorptionField& f_;
    const BoundaryData& bd_;
    Point z_;
    const PathConfig& cfg_;
    int d_;
    long n_steps_;
    double dt_;
    double sqrt_dt_;
};

bool interior(const Grid& g, const Point& z) {
    for (int a = 0; a < g.dim(); ++a)
        if (!(z.x[a] > 0.0 && z.x[a] < 1.0)) return false;
    return z.t > 0.0 && z.t <= g.t_end();
}

}  // namespace

PointEstimate estimate_point(const AbsorptionField& f, const BoundaryData& bd, const Point& z, const PathConfig& cfg) {
    require(f.grid() == bd.grid(), ErrorCategory::InvalidArgument, "oracle: f and data live on different grids");
    cfg.validate(f.grid());
    require(interior(f.grid(), z), ErrorCategory::DomainViolation, "oracle: point must lie in the open cylinder");

    const PathSimulator sim(f, bd, z, cfg);
    const std::size_t n_blocks = (cfg.n_paths + cfg.block_size - 1) / cfg.block_size;
    std::vector<BlockSums> blocks(n_blocks);
    auto block_count = [&](std::size_t b) { return std::min(cfg.block_size, cfg.n_paths - b * cfg.block_size); };

    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(n_blocks)));
    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) blocks[b] = sim.run_block(b, block_count(b));
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < n_blocks; b += workers) blocks[b] = sim.run_block(b, block_count(b));
            });
        for (auto& t : pool) t.join();
    }

    BlockSums total;
    for (const auto& b : blocks) {
        total.sum += b.sum;
        total.sum_sq += b.sum_sq;
        total.exited += b.exited;
    }
    const auto n = static_cast<double>(cfg.n_paths);
    PointEstimate e;
    e.n_paths = cfg.n_paths;
    e.n_exited = total.exited;
    e.mean = total.sum / n;
    const double var = std::max(0.0, (total.sum_sq - n * e.mean * e.mean) / (n - 1.0));
    e.stderr_ = std::sqrt(var / n);
    return e;
}

double zscore(double pde_value, const PointEstimate& e) {
    const double diff = pde_value - e.mean;
    if (e.stderr_ > 0.0) return diff / e.stderr_;
    return std::abs(diff) <= 1e-10 ? 0.0 : std::numeric_limits<double>::infinity();
}

ValidationReport validate_solution(const SpaceTimeField& u, const AbsorptionField& f, const BoundaryData& bd,
                                   const std::vector<Point>& points, const PathConfig& cfg) {
    require(!points.empty(), ErrorCategory::InvalidArgument, "oracle: no validation points");
    ValidationReport rep;
    std::size_t good = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        PathConfig pc = cfg;
        pc.seed = derive_seed(cfg.seed, i);
        const PointEstimate e = estimate_point(f, bd, points[i], pc);
        ValidationRecord r;
        r.point = points[i];
        r.pde_value = interpolate(u, points[i]);
        r.fk_mean = e.mean;
        r.fk_stderr = e.stderr_;
        r.zscore = zscore(r.pde_value, e);
        if (std::abs(r.zscore) <= rep.z_threshold) ++good;
        rep.records.push_back(r);
    }
    rep.pass_fraction = static_cast<double>(good) / static_cast<double>(points.size());
    rep.passed = rep.pass_fraction >= rep.required_fraction;
    return rep;
}

ValidationReport validate_solver(const AbsorptionField& f, const BoundaryData& bd, const std::vector<Point>& points,
                                 const PathConfig& cfg, const SchemeConfig& scheme) {
    return validate_solution(solve_forward(f, bd, scheme), f, bd, points, cfg);
}

nlohmann::json ValidationReport::summary() const {
    double max_abs_z = 0.0;
    for (const auto& r : records) max_abs_z = std::max(max_abs_z, std::abs(r.zscore));
    return {{"n_points", records.size()},
            {"z_threshold", z_threshold},
            {"required_fraction", required_fraction},
            {"pass_fraction", pass_fraction},
            {"max_abs_z", std::isfinite(max_abs_z) ? nlohmann::json(max_abs_z) : nlohmann::json("inf")},
            {"passed", passed}};
}

void ValidationReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCategory::Io, "cannot open " + path.string());
    os << "point,x1,x2,t,pde_value,fk_mean,fk_stderr,zscore\n";
    char buf[512];
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, r.point.x[0],
                      r.point.x[1], r.point.t, r.pde_value, r.fk_mean, r.fk_stderr, r.zscore);
        os << buf;
    }
    require(static_cast<bool>(os), ErrorCategory::Io, "write failed: " + path.string());
}

}  // namespace heatinv
