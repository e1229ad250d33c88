#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "heatinv/grid.hpp"
#include "heatinv/pde.hpp"
#include "heatinv/random.hpp"

namespace heatinv {

// -- link function ----------------------------------------------------------

/// Lower bound of the absorption range; Phi maps R onto (f_min, inf).
struct LinkSpec {
    double f_min = 0.1;
    void validate() const;
};

/// Phi(t) = f_min + (1 - f_min) * log(1 + e^t) / log 2. Smooth, strictly
/// increasing, Phi(0) = 1, every derivative bounded.
double link_phi(double t, const LinkSpec& link);
double link_phi_derivative(double t, const LinkSpec& link);
double link_inverse(double y, const LinkSpec& link);

/// Nodal Phi(F), stamped with the link's f_min.
AbsorptionField link_phi_field(const SpatialField& F, const LinkSpec& link);

/// G(Phi o F): the forward map on the reparametrized unknown.
SpaceTimeField forward_map(const SpatialField& F, const LinkSpec& link, const BoundaryData& bd,
                           const SchemeConfig& cfg = {});

// -- cutoff -----------------------------------------------------------------

/// Nested boxes K = {dist(x, boundary) >= r_inner} inside
/// K' = {dist >= r_outer}. The cutoff is 1 on K, 0 within r_outer/2 of the
/// boundary and a C-infinity step in between (per axis, multiplied in 2-D).
struct CutoffSpec {
    double r_inner = 0.3;
    double r_outer = 0.1;
    void validate() const;
};

double cutoff_value(const CutoffSpec& spec, std::array<double, 2> x, int d);
SpatialField cutoff_field(const Grid& grid, const CutoffSpec& spec);

// -- priors -----------------------------------------------------------------

enum class PriorKind { MaternGrid, TruncatedSeries };

struct PriorSpec {
    PriorKind kind = PriorKind::TruncatedSeries;
    int alpha = 3;
    int J = 1;                      // series truncation level
    bool rescale = false;           // multiply draws by N^{-d/(4 alpha + 8 + 2d)}
    std::size_t n_for_rescale = 1;
    int d = 1;
    double lengthscale = 0.2;       // Matern only
    double variance = 1.0;          // Matern only
    double jitter = 1e-10;          // Matern only
    void validate() const;

    /// J with 2^J closest to N^{1/(2 alpha + 4 + d)}.
    static int truncation_level(std::size_t N, int alpha, int d);
};

/// One tensor sine mode prod_i sqrt(2) sin(pi k_i x_i), grouped by level:
/// level l holds the modes with 2^l <= max_i k_i < 2^{l+1}.
struct SeriesMode {
    int level;
    std::array<int, 2> k;
};

std::vector<SeriesMode> series_modes(int J, int d);
double series_basis(const SeriesMode& mode, std::array<double, 2> x, int d);

/// Unweighted series coefficients c_{l,r}; the field they describe is
/// chi * sum 2^{-alpha l} c_{l,r} psi_{l,r}. The weights live in synthesis,
/// never in the stored entries.
class CoefficientVector {
public:
    CoefficientVector(int J, int d);
    CoefficientVector(int J, int d, std::vector<double> entries);

    int J() const noexcept { return J_; }
    int dim() const noexcept { return d_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::span<const double> entries() const noexcept { return entries_; }
    std::span<double> entries() noexcept { return entries_; }
    const std::vector<SeriesMode>& modes() const noexcept { return modes_; }

    std::size_t level_size(int l) const;
    double& at(int l, std::size_t r);
    double at(int l, std::size_t r) const;

    nlohmann::json to_json(int alpha) const;
    static CoefficientVector from_json(const nlohmann::json& j);

private:
    int J_;
    int d_;
    std::vector<SeriesMode> modes_;
    std::vector<std::size_t> level_offset_;
    std::vector<double> entries_;
};

/// chi * sum_{l, r} 2^{-alpha l} c_{l,r} psi_{l,r} on the grid.
SpatialField synthesize_series(const CoefficientVector& c, int alpha, const CutoffSpec& cutoff, const Grid& grid);

double rescale_factor(std::size_t N, int alpha, int d);
SpatialField rescale_prior(const SpatialField& F, std::size_t N, int alpha, int d);
CoefficientVector rescale_prior(const CoefficientVector& c, std::size_t N, int alpha, int d);

/// RKHS norm of the series prior: sqrt(sum 2^{2 l alpha} a_{l,r}^2) over the
/// field coefficients a_{l,r} = 2^{-alpha l} c_{l,r}; for stored unweighted
/// coefficients this equals their Euclidean norm.
double rkhs_norm(const CoefficientVector& c, int alpha);

/// Spectral H^alpha surrogate sqrt(sum (1 + pi^2 |k|^2)^alpha F_k^2) over
/// the sine basis. F must vanish on boundary nodes.
double sobolev_norm_discrete(const SpatialField& F, double alpha);

/// Matern covariance with smoothness nu, unit conventions of Rasmussen &
/// Williams: var * 2^{1-nu}/Gamma(nu) * (sqrt(2 nu) r / l)^nu K_nu(sqrt(2 nu) r / l).
double matern_covariance(double r, double nu, double lengthscale, double variance);

/// Centred Gaussian prior on spatial fields, held as a synthesis matrix S so
/// that a draw is scale * S * xi with xi ~ N(0, I). For the series prior the
/// columns are chi * 2^{-alpha l} psi_{l,r}; for the Matern prior
/// S = diag(chi) * chol(C + jitter I). Immutable after construction.
class GaussianPrior {
public:
    GaussianPrior(const PriorSpec& spec, const CutoffSpec& cutoff, const Grid& grid);

    const PriorSpec& spec() const noexcept { return spec_; }
    const CutoffSpec& cutoff() const noexcept { return cutoff_; }
    const Grid& grid() const noexcept { return grid_; }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(synthesis_.cols()); }
    double scale() const noexcept { return scale_; }
    const Eigen::MatrixXd& synthesis() const noexcept { return synthesis_; }

    std::vector<double> draw_white(Rng& rng) const;
    SpatialField field(std::span<const double> white) const;

    /// Exact variance of sum_s w_s F(s) under the prior (rescaling included).
    double functional_variance(std::span<const double> node_weights) const;
    double nodal_variance(std::size_t s) const;

    /// Series prior only: the white vector viewed as coefficients.
    CoefficientVector coefficients(std::span<const double> white) const;

private:
    PriorSpec spec_;
    CutoffSpec cutoff_;
    Grid grid_;
    double scale_;
    Eigen::MatrixXd synthesis_;
};

SpatialField sample_matern_grid(const PriorSpec& spec, const CutoffSpec& cutoff, const Grid& grid,
                                std::uint64_t seed);
std::pair<CoefficientVector, SpatialField> sample_truncated_series(const PriorSpec& spec, const CutoffSpec& cutoff,
                                                                   const Grid& grid, std::uint64_t seed);

}  // namespace heatinv
