#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace heatinv {

/// Tensor discretization of Q = (0,1)^d x (0,T).
///
/// Spatial nodes are x_i = i*h for i = 0..n_x-1 along every axis, time levels
/// are t_k = k*dt for k = 0..n_t-1. In d = 2 the flat spatial index of node
/// (i, j) is i + n_x*j. Space-time values are stored level by level.
class Grid {
public:
    static Grid build(int d, int n_x, int n_t, double t_end);

    int dim() const noexcept { return d_; }
    int n_x() const noexcept { return n_x_; }
    int n_t() const noexcept { return n_t_; }
    double t_end() const noexcept { return t_end_; }
    double h() const noexcept { return h_; }
    double dt() const noexcept { return dt_; }

    std::size_t n_space() const noexcept { return n_space_; }
    std::size_t n_spacetime() const noexcept { return n_space_ * static_cast<std::size_t>(n_t_); }

    double coord(int i) const noexcept { return i * h_; }
    double time(int k) const noexcept { return k * dt_; }

    /// Axis indices of a flat spatial index; the second entry is 0 when d = 1.
    std::array<int, 2> axes(std::size_t s) const noexcept {
        const auto n = static_cast<std::size_t>(n_x_);
        return {static_cast<int>(s % n), static_cast<int>(s / n)};
    }
    std::size_t flat(int i, int j = 0) const noexcept {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n_x_) * static_cast<std::size_t>(j);
    }
    std::array<double, 2> position(std::size_t s) const noexcept {
        auto a = axes(s);
        return {coord(a[0]), d_ == 2 ? coord(a[1]) : 0.0};
    }
    bool on_boundary(std::size_t s) const noexcept;

    /// Trapezoid weight of a spatial node (product of 1-D weights).
    double space_weight(std::size_t s) const noexcept;
    double time_weight(int k) const noexcept;

    /// The same domain refined by halving both h and dt.
    Grid refined() const { return build(d_, 2 * n_x_ - 1, 2 * n_t_ - 1, t_end_); }

    double volume() const noexcept { return t_end_; }

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.d_ == b.d_ && a.n_x_ == b.n_x_ && a.n_t_ == b.n_t_ && a.t_end_ == b.t_end_;
    }

private:
    Grid(int d, int n_x, int n_t, double t_end);

    int d_;
    int n_x_;
    int n_t_;
    double t_end_;
    double h_;
    double dt_;
    std::size_t n_space_;
};

nlohmann::json to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);

/// Point of the closed cylinder; x[1] is ignored when d = 1.
struct Point {
    std::array<double, 2> x{0.0, 0.0};
    double t = 0.0;
};

/// Nodal values on the spatial grid. Entries are finite.
class SpatialField {
public:
    explicit SpatialField(const Grid& grid, double value = 0.0);
    SpatialField(const Grid& grid, std::vector<double> values);

    template <class Fn>
    static SpatialField sample(const Grid& grid, Fn&& fn) {
        std::vector<double> v(grid.n_space());
        for (std::size_t s = 0; s < v.size(); ++s) v[s] = fn(grid.position(s));
        return SpatialField(grid, std::move(v));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    double operator[](std::size_t s) const noexcept { return values_[s]; }
    double& operator[](std::size_t s) noexcept { return values_[s]; }
    std::size_t size() const noexcept { return values_.size(); }

private:
    Grid grid_;
    std::vector<double> values_;
};

SpatialField operator-(const SpatialField& a, const SpatialField& b);
SpatialField operator+(const SpatialField& a, const SpatialField& b);
SpatialField operator*(double c, const SpatialField& a);

/// Nodal values on the space-time grid, level k occupying
/// [k*n_space, (k+1)*n_space).
class SpaceTimeField {
public:
    explicit SpaceTimeField(const Grid& grid, double value = 0.0);
    SpaceTimeField(const Grid& grid, std::vector<double> values);

    template <class Fn>
    static SpaceTimeField sample(const Grid& grid, Fn&& fn) {
        std::vector<double> v(grid.n_spacetime());
        for (int k = 0; k < grid.n_t(); ++k)
            for (std::size_t s = 0; s < grid.n_space(); ++s)
                v[k * grid.n_space() + s] = fn(grid.position(s), grid.time(k));
        return SpaceTimeField(grid, std::move(v));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    double at(std::size_t s, int k) const noexcept { return values_[k * grid_.n_space() + s]; }
    double& at(std::size_t s, int k) noexcept { return values_[k * grid_.n_space() + s]; }
    std::span<const double> level(int k) const noexcept {
        return std::span<const double>(values_).subspan(k * grid_.n_space(), grid_.n_space());
    }
    std::span<double> level(int k) noexcept {
        return std::span<double>(values_).subspan(k * grid_.n_space(), grid_.n_space());
    }
    SpatialField level_field(int k) const;
    std::size_t size() const noexcept { return values_.size(); }

private:
    Grid grid_;
    std::vector<double> values_;
};

SpaceTimeField operator-(const SpaceTimeField& a, const SpaceTimeField& b);

// -- interpolation ----------------------------------------------------------

/// Multilinear interpolation in (x, t). Throws DomainViolation outside the
/// closed cylinder.
double interpolate(const SpaceTimeField& u, const Point& z);

/// Multilinear interpolation in x of a spatial field.
double interpolate(const SpatialField& w, std::array<double, 2> x);

/// Samples `w` on another grid over the same domain by interpolation.
SpatialField resample(const SpatialField& w, const Grid& target);
SpaceTimeField resample(const SpaceTimeField& u, const Grid& target);

// -- norms ------------------------------------------------------------------

double norm_l2_space(const SpatialField& w);
double norm_l2_spacetime(const SpaceTimeField& u);
double norm_sup(std::span<const double> v);

/// Discrete parabolic Sobolev norm H^{s,s/2}(Q), s in {2, 4}: all spatial
/// derivatives of order <= s plus time derivatives of order 1..s/2, each
/// measured in trapezoid L^2(Q).
double norm_parabolic_sobolev(const SpaceTimeField& u, int s);

/// Discrete C^2 norm of a spatial field: sum over |a| <= 2 of sup |D^a w|.
double norm_c2(const SpatialField& w);

/// Coefficients of w in the orthonormal Dirichlet sine basis
/// prod_i sqrt(2) sin(pi k_i x_i), k_i = 1..n_x-2, by trapezoid quadrature.
/// In d = 2 entry (k1, k2) sits at (k1-1) + (n_x-2)*(k2-1).
std::vector<double> sine_coefficients(const SpatialField& w);

/// ( sum_k (1 + pi^2 |k|^2)^exponent * w_k^2 )^(1/2) over the sine basis.
/// Requires w to vanish on boundary nodes.
double spectral_norm(const SpatialField& w, double exponent);

/// Surrogate for the (H^2(O))* norm: spectral_norm(w, -2).
double norm_dual_h2(const SpatialField& w);

// -- finite differences -----------------------------------------------------

/// Weights of the order-`deriv` derivative at 0 from samples at `offsets`
/// (in units of the step), by Fornberg's recursion.
std::vector<double> fd_weights(std::span<const double> offsets, int deriv);

/// Number of points of the central stencil used for a derivative of order `deriv`.
constexpr int stencil_width(int deriv) noexcept { return 2 * ((deriv + 1) / 2) + 1; }

/// Derivative of order `deriv` along one axis of a strided tensor, using
/// central stencils that are shifted one-sided near the ends.
struct Axis {
    std::size_t size;
    std::size_t stride;
};
void differentiate(std::span<const double> in, std::span<double> out, std::span<const Axis> axes,
                   std::size_t axis, int deriv, double step);

// -- serialization ----------------------------------------------------------

enum class FieldFormat { Csv, Binary };

/// Writes nodal values to `path` and a JSON header (d, n_x, n_t, T_end,
/// format, byte order) to `path` with extension ".json". Binary payloads are
/// little-endian IEEE-754 doubles in storage order; CSV payloads hold one
/// value per line rendered with 17 significant digits.
void save_field(const std::filesystem::path& path, const SpaceTimeField& u, FieldFormat format);
SpaceTimeField load_field(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace heatinv
