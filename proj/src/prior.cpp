#include "heatinv/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "heatinv/error.hpp"

namespace heatinv {

// -- link -------------------------------------------------------------------

void LinkSpec::validate() const {
    require(f_min > 0.0 && f_min < 1.0, ErrorCategory::InvalidArgument, "link: f_min must lie in (0, 1)");
}

namespace {
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
}  // namespace

double link_phi(double t, const LinkSpec& link) {
    return link.f_min + (1.0 - link.f_min) * softplus(t) / std::numbers::ln2;
}

double link_phi_derivative(double t, const LinkSpec& link) {
    const double sigmoid = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    return (1.0 - link.f_min) * sigmoid / std::numbers::ln2;
}

double link_inverse(double y, const LinkSpec& link) {
    require(y > link.f_min, ErrorCategory::DomainViolation, "link_inverse: argument must exceed f_min");
    const double z = (y - link.f_min) * std::numbers::ln2 / (1.0 - link.f_min);  // softplus(t) = z
    // t = log(e^z - 1), evaluated without overflow or cancellation.
    return z > 30.0 ? z + std::log1p(-std::exp(-z)) : std::log(std::expm1(z));
}

AbsorptionField link_phi_field(const SpatialField& F, const LinkSpec& link) {
    link.validate();
    std::vector<double> v(F.size());
    for (std::size_t s = 0; s < v.size(); ++s) v[s] = link_phi(F[s], link);
    return AbsorptionField(SpatialField(F.grid(), std::move(v)), link.f_min);
}

SpaceTimeField forward_map(const SpatialField& F, const LinkSpec& link, const BoundaryData& bd,
                           const SchemeConfig& cfg) {
    return solve_forward(link_phi_field(F, link), bd, cfg);
}

// -- cutoff -----------------------------------------------------------------

void CutoffSpec::validate() const {
    require(r_outer > 0.0 && r_outer < r_inner && r_inner < 0.5, ErrorCategory::InvalidArgument,
            "cutoff: need 0 < r_outer < r_inner < 1/2");
}

namespace {
// C-infinity step: 0 for s <= 0, 1 for s >= 1.
double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}
}  // namespace

double cutoff_value(const CutoffSpec& spec, std::array<double, 2> x, int d) {
    double v = 1.0;
    for (int a = 0; a < d; ++a) {
        const double dist = std::min(x[a], 1.0 - x[a]);
        v *= smooth_step((dist - 0.5 * spec.r_outer) / (spec.r_inner - 0.5 * spec.r_outer));
    }
    return v;
}

SpatialField cutoff_field(const Grid& grid, const CutoffSpec& spec) {
    spec.validate();
    return SpatialField::sample(grid, [&](std::array<double, 2> x) { return cutoff_value(spec, x, grid.dim()); });
}

// -- series basis -----------------------------------------------------------

void PriorSpec::validate() const {
    require(d == 1 || d == 2, ErrorCategory::InvalidArgument, "prior: d must be 1 or 2");
    require(2.0 * alpha > 4.0 + d, ErrorCategory::InvalidArgument, "prior: need integer alpha > 2 + d/2");
    require(kind != PriorKind::TruncatedSeries || J >= 0, ErrorCategory::InvalidArgument,
            "prior: truncation level must be >= 0");
    require(n_for_rescale >= 1, ErrorCategory::InvalidArgument, "prior: rescaling needs N >= 1");
    require(lengthscale > 0.0 && variance > 0.0 && jitter >= 0.0, ErrorCategory::InvalidArgument,
            "prior: Matern parameters must be positive");
}

int PriorSpec::truncation_level(std::size_t N, int alpha, int d) {
    const double target = std::log2(static_cast<double>(N)) / (2.0 * alpha + 4.0 + d);
    return std::max(0, static_cast<int>(std::lround(target)));
}

std::vector<SeriesMode> series_modes(int J, int d) {
    std::vector<SeriesMode> modes;
    for (int l = 0; l <= J; ++l) {
        const int lo = 1 << l;
        const int hi = 1 << (l + 1);
        if (d == 1) {
            for (int k = lo; k < hi; ++k) modes.push_back({l, {k, 0}});
            continue;
        }
        for (int k2 = 1; k2 < hi; ++k2)
            for (int k1 = 1; k1 < hi; ++k1)
                if (std::max(k1, k2) >= lo) modes.push_back({l, {k1, k2}});
    }
    return modes;
}

double series_basis(const SeriesMode& mode, std::array<double, 2> x, int d) {
    double v = std::numbers::sqrt2 * std::sin(std::numbers::pi * mode.k[0] * x[0]);
    if (d == 2) v *= std::numbers::sqrt2 * std::sin(std::numbers::pi * mode.k[1] * x[1]);
    return v;
}

// -- CoefficientVector ------------------------------------------------------

CoefficientVector::CoefficientVector(int J, int d) : J_(J), d_(d), modes_(series_modes(J, d)) {
    require(J >= 0 && (d == 1 || d == 2), ErrorCategory::InvalidArgument, "coefficients: invalid J or d");
    entries_.assign(modes_.size(), 0.0);
    level_offset_.assign(J + 2, 0);
    for (const auto& m : modes_) ++level_offset_[m.level + 1];
    for (int l = 0; l <= J; ++l) level_offset_[l + 1] += level_offset_[l];
}

CoefficientVector::CoefficientVector(int J, int d, std::vector<double> entries) : CoefficientVector(J, d) {
    require(entries.size() == entries_.size(), ErrorCategory::InvalidArgument,
            "coefficients: entry count does not match (J, d)");
    for (double v : entries)
        require(std::isfinite(v), ErrorCategory::InvalidArgument, "coefficients: non-finite entry");
    entries_ = std::move(entries);
}

std::size_t CoefficientVector::level_size(int l) const {
    require(l >= 0 && l <= J_, ErrorCategory::InvalidArgument, "coefficients: level out of range");
    return level_offset_[l + 1] - level_offset_[l];
}

double& CoefficientVector::at(int l, std::size_t r) {
    require(r < level_size(l), ErrorCategory::InvalidArgument, "coefficients: index out of range");
    return entries_[level_offset_[l] + r];
}

double CoefficientVector::at(int l, std::size_t r) const {
    require(r < level_size(l), ErrorCategory::InvalidArgument, "coefficients: index out of range");
    return entries_[level_offset_[l] + r];
}

nlohmann::json CoefficientVector::to_json(int alpha) const {
    nlohmann::json levels = nlohmann::json::array();
    nlohmann::json modes = nlohmann::json::array();
    for (int l = 0; l <= J_; ++l) {
        nlohmann::json lv = nlohmann::json::array();
        nlohmann::json lm = nlohmann::json::array();
        for (std::size_t r = 0; r < level_size(l); ++r) {
            lv.push_back(at(l, r));
            const auto& m = modes_[level_offset_[l] + r];
            lm.push_back(d_ == 1 ? nlohmann::json{m.k[0]} : nlohmann::json{m.k[0], m.k[1]});
        }
        levels.push_back(std::move(lv));
        modes.push_back(std::move(lm));
    }
    return {{"weight_convention",
             "field = chi * sum_l sum_r 2^(-alpha*l) * c[l][r] * psi_{l,r}; c stored unweighted"},
            {"basis", "psi = prod_i sqrt(2) sin(pi k_i x_i); level l: 2^l <= max_i k_i < 2^(l+1)"},
            {"alpha", alpha},
            {"J", J_},
            {"d", d_},
            {"levels", std::move(levels)},
            {"modes", std::move(modes)}};
}

CoefficientVector CoefficientVector::from_json(const nlohmann::json& j) {
    try {
        CoefficientVector c(j.at("J").get<int>(), j.at("d").get<int>());
        const auto& levels = j.at("levels");
        require(levels.is_array() && levels.size() == static_cast<std::size_t>(c.J_ + 1), ErrorCategory::Schema,
                "coefficients: level count does not match J");
        for (int l = 0; l <= c.J_; ++l) {
            const auto& lv = levels.at(l);
            require(lv.size() == c.level_size(l), ErrorCategory::Schema, "coefficients: level size mismatch");
            for (std::size_t r = 0; r < lv.size(); ++r) c.at(l, r) = lv.at(r).get<double>();
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::Schema, std::string("coefficients: ") + e.what());
    }
}

SpatialField synthesize_series(const CoefficientVector& c, int alpha, const CutoffSpec& cutoff, const Grid& grid) {
    require(c.dim() == grid.dim(), ErrorCategory::InvalidArgument, "synthesize: dimension mismatch");
    const SpatialField chi = cutoff_field(grid, cutoff);
    std::vector<double> v(grid.n_space(), 0.0);
    const auto& modes = c.modes();
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const double w = std::ldexp(c.entries()[m], -alpha * modes[m].level);
        if (w == 0.0) continue;
        for (std::size_t s = 0; s < v.size(); ++s) v[s] += w * series_basis(modes[m], grid.position(s), grid.dim());
    }
    for (std::size_t s = 0; s < v.size(); ++s) v[s] *= chi[s];
    return SpatialField(grid, std::move(v));
}

// -- rescaling and norms ----------------------------------------------------

double rescale_factor(std::size_t N, int alpha, int d) {
    require(N >= 1, ErrorCategory::InvalidArgument, "rescale: N must be >= 1");
    return std::pow(static_cast<double>(N), -static_cast<double>(d) / (4.0 * alpha + 8.0 + 2.0 * d));
}

SpatialField rescale_prior(const SpatialField& F, std::size_t N, int alpha, int d) {
    return rescale_factor(N, alpha, d) * F;
}

CoefficientVector rescale_prior(const CoefficientVector& c, std::size_t N, int alpha, int d) {
    const double factor = rescale_factor(N, alpha, d);
    std::vector<double> v(c.entries().begin(), c.entries().end());
    for (double& x : v) x *= factor;
    return CoefficientVector(c.J(), c.dim(), std::move(v));
}

double rkhs_norm(const CoefficientVector& c, int alpha) {
    double acc = 0.0;
    const auto& modes = c.modes();
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const int l = modes[m].level;
        const double field_coeff = std::ldexp(c.entries()[m], -alpha * l);
        const double weighted = std::ldexp(field_coeff, alpha * l);
        acc += weighted * weighted;
    }
    return std::sqrt(acc);
}

double sobolev_norm_discrete(const SpatialField& F, double alpha) { return spectral_norm(F, alpha); }

double matern_covariance(double r, double nu, double lengthscale, double variance) {
    require(nu > 0.0 && lengthscale > 0.0, ErrorCategory::InvalidArgument, "matern: nu and lengthscale must be > 0");
    if (r == 0.0) return variance;
    const double z = std::sqrt(2.0 * nu) * r / lengthscale;
    return variance * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(z, nu) * std::cyl_bessel_k(nu, z);
}

// -- GaussianPrior ----------------------------------------------------------

GaussianPrior::GaussianPrior(const PriorSpec& spec, const CutoffSpec& cutoff, const Grid& grid)
    : spec_(spec), cutoff_(cutoff), grid_(grid), scale_(1.0) {
    spec.validate();
    cutoff.validate();
    require(spec.d == grid.dim(), ErrorCategory::InvalidArgument, "prior: dimension does not match grid");
    if (spec.rescale) scale_ = rescale_factor(spec.n_for_rescale, spec.alpha, spec.d);
    const SpatialField chi = cutoff_field(grid, cutoff);
    const auto n = static_cast<Eigen::Index>(grid.n_space());

    if (spec.kind == PriorKind::TruncatedSeries) {
        require((1 << (spec.J + 1)) - 1 <= grid.n_x() - 2, ErrorCategory::InvalidArgument,
                "prior: truncation level not resolvable on this grid");
        const auto modes = series_modes(spec.J, spec.d);
        synthesis_.resize(n, static_cast<Eigen::Index>(modes.size()));
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const double w = std::ldexp(1.0, -spec.alpha * modes[m].level);
            for (Eigen::Index s = 0; s < n; ++s)
                synthesis_(s, static_cast<Eigen::Index>(m)) =
                    chi[s] * w * series_basis(modes[m], grid.position(s), grid.dim());
        }
        return;
    }

    require(grid.n_x() <= (grid.dim() == 1 ? 129 : 33), ErrorCategory::InvalidArgument,
            "prior: Matern grid exceeds the dense-covariance size cap");
    const double nu = spec.alpha - spec.d / 2.0;
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) {
            auto pa = grid.position(a);
            auto pb = grid.position(b);
            const double r = std::hypot(pa[0] - pb[0], pa[1] - pb[1]);
            cov(a, b) = cov(b, a) = matern_covariance(r, nu, spec.lengthscale, spec.variance);
        }
    cov.diagonal().array() += spec.jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    require(llt.info() == Eigen::Success, ErrorCategory::NumericalFailure,
            "prior: Matern covariance not positive definite after jitter");
    synthesis_ = llt.matrixL();
    for (Eigen::Index s = 0; s < n; ++s) synthesis_.row(s) *= chi[s];
}

std::vector<double> GaussianPrior::draw_white(Rng& rng) const {
    std::vector<double> xi(dimension());
    for (double& x : xi) x = standard_normal(rng);
    return xi;
}

SpatialField GaussianPrior::field(std::span<const double> white) const {
    require(white.size() == dimension(), ErrorCategory::InvalidArgument, "prior: white vector has wrong size");
    Eigen::Map<const Eigen::VectorXd> xi(white.data(), static_cast<Eigen::Index>(white.size()));
    Eigen::VectorXd v = scale_ * (synthesis_ * xi);
    return SpatialField(grid_, std::vector<double>(v.data(), v.data() + v.size()));
}

double GaussianPrior::functional_variance(std::span<const double> node_weights) const {
    require(node_weights.size() == grid_.n_space(), ErrorCategory::InvalidArgument,
            "prior: functional weights have wrong size");
    Eigen::Map<const Eigen::VectorXd> w(node_weights.data(), static_cast<Eigen::Index>(node_weights.size()));
    Eigen::VectorXd proj = synthesis_.transpose() * w;
    return scale_ * scale_ * proj.squaredNorm();
}

double GaussianPrior::nodal_variance(std::size_t s) const {
    return scale_ * scale_ * synthesis_.row(static_cast<Eigen::Index>(s)).squaredNorm();
}

CoefficientVector GaussianPrior::coefficients(std::span<const double> white) const {
    require(spec_.kind == PriorKind::TruncatedSeries, ErrorCategory::InvalidArgument,
            "prior: coefficients exist only for the series prior");
    return CoefficientVector(spec_.J, spec_.d, std::vector<double>(white.begin(), white.end()));
}

SpatialField sample_matern_grid(const PriorSpec& spec, const CutoffSpec& cutoff, const Grid& grid,
                                std::uint64_t seed) {
    require(spec.kind == PriorKind::MaternGrid, ErrorCategory::InvalidArgument, "sample_matern_grid: wrong prior kind");
    GaussianPrior prior(spec, cutoff, grid);
    Rng rng = make_rng(seed);
    return prior.field(prior.draw_white(rng));
}

std::pair<CoefficientVector, SpatialField> sample_truncated_series(const PriorSpec& spec, const CutoffSpec& cutoff,
                                                                   const Grid& grid, std::uint64_t seed) {
    require(spec.kind == PriorKind::TruncatedSeries, ErrorCategory::InvalidArgument,
            "sample_truncated_series: wrong prior kind");
    GaussianPrior prior(spec, cutoff, grid);
    Rng rng = make_rng(seed);
    auto white = prior.draw_white(rng);
    return {prior.coefficients(white), prior.field(white)};
}

}  // namespace heatinv
