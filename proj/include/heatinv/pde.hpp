#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include "heatinv/grid.hpp"

namespace heatinv {

/// Absorption coefficient f on the spatial grid with its lower bound f_min.
///
/// Construction only checks f >= f_min >= 0, which is all the solver needs.
/// Membership in the parameter space (f > f_min everywhere, f = 1 on the
/// boundary) is a separate query because several diagnostics (f = 0, the
/// F -> -infinity limit) deliberately leave it.
class AbsorptionField {
public:
    explicit AbsorptionField(SpatialField values, double f_min = 0.0);

    static AbsorptionField constant(const Grid& grid, double value, double f_min = 0.0) {
        return AbsorptionField(SpatialField(grid, value), f_min);
    }

    const SpatialField& field() const noexcept { return values_; }
    const Grid& grid() const noexcept { return values_.grid(); }
    double f_min() const noexcept { return f_min_; }
    double operator[](std::size_t s) const noexcept { return values_[s]; }
    double sup() const noexcept { return norm_sup(values_.values()); }

    bool in_parameter_space(double tol = 1e-12) const noexcept;

private:
    SpatialField values_;
    double f_min_;
};

/// Dirichlet data g on the lateral boundary and initial value u0.
///
/// g is carried as a full space-time field of which only boundary nodes are
/// read. Corner compatibility g(x, 0) = u0(x) on boundary nodes is enforced
/// at construction.
class BoundaryData {
public:
    BoundaryData(SpaceTimeField g, SpatialField u0);

    /// g = c, u0 = c.
    static BoundaryData constant(const Grid& grid, double c);
    /// g = c * exp(-t), u0 = c. Compatible to every order with the equation
    /// wherever f = 1 near the boundary, which holds for every f = Phi(F)
    /// with F vanishing near the boundary.
    static BoundaryData decaying(const Grid& grid, double c);
    /// g = c * exp(-t), u0 = c * (1 + amplitude * bump) with a smooth bump
    /// supported in [0.25, 0.75]^d.
    static BoundaryData bump(const Grid& grid, double c, double amplitude);
    static BoundaryData from_functions(const Grid& grid,
                                       const std::function<double(std::array<double, 2>, double)>& g,
                                       const std::function<double(std::array<double, 2>)>& u0);

    const Grid& grid() const noexcept { return u0_.grid(); }
    const SpaceTimeField& g() const noexcept { return g_; }
    const SpatialField& u0() const noexcept { return u0_; }

    double g_min() const noexcept { return g_min_; }
    double g_sup() const noexcept { return g_sup_; }
    double u0_min() const noexcept { return u0_min_; }
    double u0_sup() const noexcept { return norm_sup(u0_.values()); }

    /// Same data sampled on another grid over the same domain.
    BoundaryData resampled(const Grid& target) const;

private:
    SpaceTimeField g_;
    SpatialField u0_;
    double g_min_;
    double g_sup_;
    double u0_min_;
};

enum class PositivityPolicy { Ignore, Warn, Error };

struct SchemeConfig {
    double theta = 0.5;  // 1/2 Crank-Nicolson, 1 backward Euler
    // Leading backward-Euler steps that damp the non-decaying high-frequency
    // modes Crank-Nicolson leaves behind incompatible corner data.
    int startup_implicit_steps = 2;
    int startup_substeps = 4;  // backward-Euler sub-steps per startup step
    double tolerance = 1e-9;  // bound on the scheme residual, in units of L_f u
    int max_iterations = 3;   // iterative-refinement sweeps per step
    PositivityPolicy positivity = PositivityPolicy::Ignore;

    static SchemeConfig crank_nicolson() { return {}; }
    static SchemeConfig backward_euler() {
        SchemeConfig c;
        c.theta = 1.0;
        c.startup_implicit_steps = 0;
        return c;
    }
    double theta_at(int step) const noexcept { return step < startup_implicit_steps ? 1.0 : theta; }
    void validate() const;
};

/// True when the explicit half of the theta-scheme has a nonnegative
/// diagonal, the sufficient condition for the discrete maximum principle.
bool satisfies_positivity_restriction(const Grid& grid, double f_sup, const SchemeConfig& cfg) noexcept;

/// Solver for one absorption field. The factorizations are built once at
/// construction; `solve` is const and may be called concurrently.
class ForwardSolver {
public:
    ForwardSolver(const AbsorptionField& f, const SchemeConfig& cfg);
    ~ForwardSolver();
    ForwardSolver(ForwardSolver&&) noexcept;
    ForwardSolver& operator=(ForwardSolver&&) noexcept;

    SpaceTimeField solve(const BoundaryData& bd) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// u = G(f): theta-scheme solution of dt u - 1/2 Lap u + f u = 0 with
/// u = g on the lateral boundary and u(., 0) = u0.
SpaceTimeField solve_forward(const AbsorptionField& f, const BoundaryData& bd, const SchemeConfig& cfg = {});

/// Number of forward solves performed by this process.
std::uint64_t forward_solve_count() noexcept;

/// Discrete L_f u = dt u - 1/2 Lap u + f u with the solver's stencils.
/// Level k >= 1 holds the residual of the step k-1 -> k (theta-weighted as in
/// `cfg`); level 0 holds the explicit forward-difference value. Startup
/// levels hold the single-step backward-Euler residual, which the sub-stepped
/// solver leaves at O(dt). Boundary nodes carry no equation and are set to 0.
SpaceTimeField apply_operator(const AbsorptionField& f, const SpaceTimeField& u, const SchemeConfig& cfg = {});

/// Ratio identity f = (1/2 Lap u - dt u) / u at time level t_index with a
/// central time difference. Boundary nodes are set to 0.
SpatialField recover_absorption(const SpaceTimeField& u, int t_index);

}  // namespace heatinv
