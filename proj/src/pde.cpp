#include "heatinv/pde.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <optional>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "heatinv/error.hpp"

namespace heatinv {

namespace {
std::atomic<std::uint64_t> g_forward_solves{0};
std::atomic<bool> g_positivity_warned{false};

double smooth_bump(double r) {
    // exp(1 - 1/(1 - r^2)) on |r| < 1, C-infinity, peak 1 at r = 0.
    if (std::abs(r) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

// Discrete Laplacian at an interior node of one time level.
double laplacian(const Grid& g, std::span<const double> v, std::size_t s) {
    const double inv_h2 = 1.0 / (g.h() * g.h());
    double acc = (v[s + 1] + v[s - 1] - 2.0 * v[s]) * inv_h2;
    if (g.dim() == 2) {
        const auto n = static_cast<std::size_t>(g.n_x());
        acc += (v[s + n] + v[s - n] - 2.0 * v[s]) * inv_h2;
    }
    return acc;
}
}  // namespace

// -- AbsorptionField --------------------------------------------------------

AbsorptionField::AbsorptionField(SpatialField values, double f_min) : values_(std::move(values)), f_min_(f_min) {
    require(std::isfinite(f_min) && f_min >= 0.0, ErrorCategory::InvalidArgument,
            "absorption field: f_min must be >= 0");
    for (double v : values_.values())
        require(v >= f_min_, ErrorCategory::DomainViolation, "absorption field: value below f_min");
}

bool AbsorptionField::in_parameter_space(double tol) const noexcept {
    if (!(f_min_ > 0.0)) return false;
    const Grid& g = grid();
    for (std::size_t s = 0; s < values_.size(); ++s) {
        if (!(values_[s] > f_min_)) return false;
        if (g.on_boundary(s) && std::abs(values_[s] - 1.0) > tol) return false;
    }
    return true;
}

// -- BoundaryData -----------------------------------------------------------

BoundaryData::BoundaryData(SpaceTimeField g, SpatialField u0) : g_(std::move(g)), u0_(std::move(u0)) {
    const Grid& grid = u0_.grid();
    require(g_.grid() == grid, ErrorCategory::InvalidArgument, "boundary data: g and u0 on different grids");
    g_min_ = std::numeric_limits<double>::infinity();
    g_sup_ = 0.0;
    for (int k = 0; k < grid.n_t(); ++k)
        for (std::size_t s = 0; s < grid.n_space(); ++s)
            if (grid.on_boundary(s)) {
                g_min_ = std::min(g_min_, g_.at(s, k));
                g_sup_ = std::max(g_sup_, std::abs(g_.at(s, k)));
            }
    u0_min_ = std::numeric_limits<double>::infinity();
    for (double v : u0_.values()) u0_min_ = std::min(u0_min_, v);
    const double scale = std::max({1.0, g_sup_, norm_sup(u0_.values())});
    for (std::size_t s = 0; s < grid.n_space(); ++s)
        if (grid.on_boundary(s))
            require(std::abs(g_.at(s, 0) - u0_[s]) <= 1e-12 * scale, ErrorCategory::DomainViolation,
                    "boundary data: g(., 0) must equal u0 on boundary nodes");
}

BoundaryData BoundaryData::from_functions(const Grid& grid,
                                          const std::function<double(std::array<double, 2>, double)>& g,
                                          const std::function<double(std::array<double, 2>)>& u0) {
    return BoundaryData(SpaceTimeField::sample(grid, g), SpatialField::sample(grid, u0));
}

BoundaryData BoundaryData::constant(const Grid& grid, double c) {
    return BoundaryData(SpaceTimeField(grid, c), SpatialField(grid, c));
}

BoundaryData BoundaryData::decaying(const Grid& grid, double c) {
    return from_functions(
        grid, [c](std::array<double, 2>, double t) { return c * std::exp(-t); },
        [c](std::array<double, 2>) { return c; });
}

BoundaryData BoundaryData::bump(const Grid& grid, double c, double amplitude) {
    const int d = grid.dim();
    return from_functions(
        grid, [c](std::array<double, 2>, double t) { return c * std::exp(-t); },
        [c, amplitude, d](std::array<double, 2> x) {
            double b = smooth_bump(4.0 * (x[0] - 0.5));
            if (d == 2) b *= smooth_bump(4.0 * (x[1] - 0.5));
            return c * (1.0 + amplitude * b);
        });
}

BoundaryData BoundaryData::resampled(const Grid& target) const {
    return BoundaryData(resample(g_, target), resample(u0_, target));
}

// -- SchemeConfig -----------------------------------------------------------

void SchemeConfig::validate() const {
    require(theta >= 0.5 && theta <= 1.0, ErrorCategory::InvalidArgument, "scheme: theta must lie in [1/2, 1]");
    require(tolerance > 0.0, ErrorCategory::InvalidArgument, "scheme: tolerance must be positive");
    require(startup_implicit_steps >= 0, ErrorCategory::InvalidArgument, "scheme: startup steps must be >= 0");
    require(startup_substeps >= 1, ErrorCategory::InvalidArgument, "scheme: startup_substeps must be >= 1");
    require(max_iterations >= 0, ErrorCategory::InvalidArgument, "scheme: max_iterations must be >= 0");
}

bool satisfies_positivity_restriction(const Grid& grid, double f_sup, const SchemeConfig& cfg) noexcept {
    const double diag = grid.dim() / (grid.h() * grid.h()) + f_sup;
    return 1.0 - (1.0 - cfg.theta) * grid.dt() * diag >= 0.0;
}

// -- ForwardSolver ----------------------------------------------------------

struct ForwardSolver::Impl {
    using SpMat = Eigen::SparseMatrix<double>;
    using Factor = Eigen::SimplicialLDLT<SpMat>;

    Grid grid;
    SchemeConfig cfg;
    std::vector<std::size_t> interior;      // spatial node of each unknown
    std::vector<std::vector<std::size_t>> boundary_neighbors;
    SpMat op;                               // -1/2 Lap + f on interior nodes
    std::optional<Factor> implicit_factor;  // I + dt/q * op, q startup sub-steps
    std::optional<Factor> theta_factor;     // I + theta * dt * op
    SpMat implicit_lhs;
    SpMat theta_lhs;

    Impl(const AbsorptionField& f, const SchemeConfig& c) : grid(f.grid()), cfg(c) {
        const std::size_t n_space = grid.n_space();
        std::vector<long> index(n_space, -1);
        for (std::size_t s = 0; s < n_space; ++s)
            if (!grid.on_boundary(s)) {
                index[s] = static_cast<long>(interior.size());
                interior.push_back(s);
            }
        const double half_inv_h2 = 0.5 / (grid.h() * grid.h());
        std::vector<std::size_t> strides{1};
        if (grid.dim() == 2) strides.push_back(static_cast<std::size_t>(grid.n_x()));

        std::vector<Eigen::Triplet<double>> trip;
        boundary_neighbors.resize(interior.size());
        for (std::size_t r = 0; r < interior.size(); ++r) {
            const std::size_t s = interior[r];
            trip.emplace_back(r, r, 2.0 * grid.dim() * half_inv_h2 + f[s]);
            for (std::size_t stride : strides)
                for (std::size_t nb : {s - stride, s + stride}) {
                    if (index[nb] >= 0)
                        trip.emplace_back(r, index[nb], -half_inv_h2);
                    else
                        boundary_neighbors[r].push_back(nb);
                }
        }
        const auto m = static_cast<Eigen::Index>(interior.size());
        op.resize(m, m);
        op.setFromTriplets(trip.begin(), trip.end());

        SpMat id(m, m);
        id.setIdentity();
        if (cfg.startup_implicit_steps > 0 && grid.n_t() > 1) {
            implicit_lhs = id + (grid.dt() / cfg.startup_substeps) * op;
            implicit_factor.emplace(implicit_lhs);
            require(implicit_factor->info() == Eigen::Success, ErrorCategory::NumericalFailure,
                    "forward solver: factorization failed");
        }
        theta_lhs = id + cfg.theta * grid.dt() * op;
        theta_factor.emplace(theta_lhs);
        require(theta_factor->info() == Eigen::Success, ErrorCategory::NumericalFailure,
                "forward solver: factorization failed");
    }

    Eigen::VectorXd boundary_term(const SpaceTimeField& g, int k) const {
        const double half_inv_h2 = 0.5 / (grid.h() * grid.h());
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(interior.size()));
        for (std::size_t r = 0; r < interior.size(); ++r)
            for (std::size_t nb : boundary_neighbors[r]) b[r] += half_inv_h2 * g.at(nb, k);
        return b;
    }
};

ForwardSolver::ForwardSolver(const AbsorptionField& f, const SchemeConfig& cfg) {
    cfg.validate();
    if (cfg.positivity != PositivityPolicy::Ignore && !satisfies_positivity_restriction(f.grid(), f.sup(), cfg)) {
        require(cfg.positivity != PositivityPolicy::Error, ErrorCategory::NumericalFailure,
                "forward solver: time step violates the maximum-principle restriction");
        if (!g_positivity_warned.exchange(true))
            std::clog << "heatinv: warning: time step violates the maximum-principle restriction\n";
    }
    impl_ = std::make_unique<Impl>(f, cfg);
}

ForwardSolver::~ForwardSolver() = default;
ForwardSolver::ForwardSolver(ForwardSolver&&) noexcept = default;
ForwardSolver& ForwardSolver::operator=(ForwardSolver&&) noexcept = default;

SpaceTimeField ForwardSolver::solve(const BoundaryData& bd) const {
    const Impl& im = *impl_;
    const Grid& grid = im.grid;
    require(bd.grid() == grid, ErrorCategory::InvalidArgument, "forward solver: data on a different grid");
    g_forward_solves.fetch_add(1, std::memory_order_relaxed);

    const double dt = grid.dt();
    const auto m = static_cast<Eigen::Index>(im.interior.size());
    SpaceTimeField u(grid);
    auto lev0 = u.level(0);
    for (std::size_t s = 0; s < grid.n_space(); ++s) lev0[s] = bd.u0()[s];

    Eigen::VectorXd cur(m);
    for (Eigen::Index r = 0; r < m; ++r) cur[r] = lev0[im.interior[r]];
    Eigen::VectorXd b_prev = im.boundary_term(bd.g(), 0);

    // Residual-checked solve of lhs * next = rhs.
    auto solve_step = [&](const Impl::Factor& factor, const Impl::SpMat& lhs, const Eigen::VectorXd& rhs, double step_dt) {
        Eigen::VectorXd next = factor.solve(rhs);
        const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
        Eigen::VectorXd res = rhs - lhs * next;
        int it = 0;
        while (res.cwiseAbs().maxCoeff() / step_dt > im.cfg.tolerance * scale && it < im.cfg.max_iterations) {
            next += factor.solve(res);
            res = rhs - lhs * next;
            ++it;
        }
        require(res.cwiseAbs().maxCoeff() / step_dt <= im.cfg.tolerance * scale, ErrorCategory::NumericalFailure,
                "forward solver: residual above tolerance after refinement");
        require(next.allFinite(), ErrorCategory::NumericalFailure, "forward solver: non-finite solution");
        return next;
    };

    for (int step = 0; step + 1 < grid.n_t(); ++step) {
        Eigen::VectorXd b_next = im.boundary_term(bd.g(), step + 1);
        Eigen::VectorXd next;
        if (im.implicit_factor && step < im.cfg.startup_implicit_steps) {
            const int q = im.cfg.startup_substeps;
            const double sub = dt / q;
            next = cur;
            for (int j = 1; j <= q; ++j) {
                const double w = static_cast<double>(j) / q;
                const Eigen::VectorXd rhs = next + sub * ((1.0 - w) * b_prev + w * b_next);
                next = solve_step(*im.implicit_factor, im.implicit_lhs, rhs, sub);
            }
        } else {
            const double theta = im.cfg.theta;
            Eigen::VectorXd rhs = cur + dt * (theta * b_next + (1.0 - theta) * b_prev);
            if (theta < 1.0) rhs -= (1.0 - theta) * dt * (im.op * cur);
            next = solve_step(*im.theta_factor, im.theta_lhs, rhs, dt);
        }

        auto lev = u.level(step + 1);
        for (std::size_t s = 0; s < grid.n_space(); ++s)
            if (grid.on_boundary(s)) lev[s] = bd.g().at(s, step + 1);
        for (Eigen::Index r = 0; r < m; ++r) lev[im.interior[r]] = next[r];
        cur = std::move(next);
        b_prev = std::move(b_next);
    }
    return u;
}

SpaceTimeField solve_forward(const AbsorptionField& f, const BoundaryData& bd, const SchemeConfig& cfg) {
    require(f.grid() == bd.grid(), ErrorCategory::InvalidArgument, "solve_forward: f and data on different grids");
    return ForwardSolver(f, cfg).solve(bd);
}

std::uint64_t forward_solve_count() noexcept { return g_forward_solves.load(std::memory_order_relaxed); }

// -- operator and ratio identity --------------------------------------------

SpaceTimeField apply_operator(const AbsorptionField& f, const SpaceTimeField& u, const SchemeConfig& cfg) {
    const Grid& g = u.grid();
    require(f.grid() == g, ErrorCategory::InvalidArgument, "apply_operator: grids differ");
    const double dt = g.dt();
    SpaceTimeField out(g);
    auto spatial = [&](int k, std::size_t s) { return -0.5 * laplacian(g, u.level(k), s) + f[s] * u.at(s, k); };
    for (std::size_t s = 0; s < g.n_space(); ++s) {
        if (g.on_boundary(s)) continue;
        out.at(s, 0) = (u.at(s, 1) - u.at(s, 0)) / dt + spatial(0, s);
        for (int k = 1; k < g.n_t(); ++k) {
            const double theta = cfg.theta_at(k - 1);
            out.at(s, k) = (u.at(s, k) - u.at(s, k - 1)) / dt + theta * spatial(k, s) +
                           (1.0 - theta) * spatial(k - 1, s);
        }
    }
    return out;
}

SpatialField recover_absorption(const SpaceTimeField& u, int t_index) {
    const Grid& g = u.grid();
    require(t_index >= 1 && t_index <= g.n_t() - 2, ErrorCategory::InvalidArgument,
            "recover_absorption: time index outside the central-stencil range");
    auto lev = u.level(t_index);
    for (double v : lev)
        require(v > 0.0, ErrorCategory::DomainViolation, "recover_absorption: u must be positive at every node");
    SpatialField f(g);
    for (std::size_t s = 0; s < g.n_space(); ++s) {
        if (g.on_boundary(s)) continue;
        const double dtu = (u.at(s, t_index + 1) - u.at(s, t_index - 1)) / (2.0 * g.dt());
        f[s] = (0.5 * laplacian(g, lev, s) - dtu) / lev[s];
    }
    return f;
}

}  // namespace heatinv
