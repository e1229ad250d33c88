#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatinv/grid.hpp"
#include "heatinv/pde.hpp"

namespace heatinv {

/// Which time argument g receives when a path leaves the domain at path time
/// tau. AsWritten evaluates g(X_tau, tau); Backward evaluates g(X_tau, t - tau),
/// the physical time at which the backward path reaches the boundary. The
/// two agree whenever g does not depend on time; only Backward matches the
/// solver for time-dependent g.
enum class ExitTimeConvention { AsWritten, Backward };

struct PathConfig {
    std::size_t n_paths = 10000;
    double dt_path = 0.0;  // 0 selects 1e-4 * T_end
    std::uint64_t seed = 1;
    // Adds the probability that the Brownian bridge between two inside
    // positions touched a wall; removes the O(sqrt(dt_path)) exit bias.
    bool bridge_correction = true;
    ExitTimeConvention convention = ExitTimeConvention::Backward;
    std::size_t block_size = 1000;  // paths per independently seeded block
    unsigned workers = 1;

    double step_for(const Grid& grid) const noexcept { return dt_path > 0.0 ? dt_path : 1e-4 * grid.t_end(); }
    void validate(const Grid& grid) const;
};

struct PointEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_exited = 0;
    std::size_t n_paths = 0;
};

/// Monte Carlo estimate of u_f(z) from the Feynman-Kac representation of
/// dt u - 1/2 Lap u + f u = 0: Brownian paths of unit diffusion started at
/// z.x run for time z.t, weighted by exp(-int f), scored by u0 at the final
/// position or by g at the exit point. The result does not depend on the
/// worker count.
PointEstimate estimate_point(const AbsorptionField& f, const BoundaryData& bd, const Point& z, const PathConfig& cfg);

struct ValidationRecord {
    Point point;
    double pde_value = 0.0;
    double fk_mean = 0.0;
    double fk_stderr = 0.0;
    double zscore = 0.0;
};

struct ValidationReport {
    std::vector<ValidationRecord> records;
    double z_threshold = 4.0;
    double required_fraction = 0.95;
    double pass_fraction = 0.0;
    bool passed = false;

    nlohmann::json summary() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// z = (pde - fk) / stderr; with stderr = 0 the score is 0 when the values
/// agree to 1e-10 and infinite otherwise.
double zscore(double pde_value, const PointEstimate& e);

/// Compares a given solution field against the oracle at `points`.
ValidationReport validate_solution(const SpaceTimeField& u, const AbsorptionField& f, const BoundaryData& bd,
                                   const std::vector<Point>& points, const PathConfig& cfg);

ValidationReport validate_solver(const AbsorptionField& f, const BoundaryData& bd, const std::vector<Point>& points,
                                 const PathConfig& cfg, const SchemeConfig& scheme = {});

}  // namespace heatinv
