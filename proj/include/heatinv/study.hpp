#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatinv/feynman_kac.hpp"
#include "heatinv/inference.hpp"
#include "heatinv/measurement.hpp"
#include "heatinv/pde.hpp"
#include "heatinv/prior.hpp"

namespace heatinv {

// -- configuration ----------------------------------------------------------

enum class BoundaryKind { Constant, Decaying, Bump };

struct BoundarySpec {
    BoundaryKind kind = BoundaryKind::Decaying;
    double c = 1.0;
    double amplitude = 0.5;  // bump only
    BoundaryData build(const Grid& grid) const;
};

/// Truth F0 = chi * sum 2^{-alpha l} c_{l,r} psi_{l,r}, an element of the
/// series prior's RKHS. Coefficients are listed level by level.
struct TruthSpec {
    int J = 1;
    std::vector<double> coefficients{1.5, -2.0, 1.5};
    SpatialField field(int alpha, const CutoffSpec& cutoff, const Grid& grid) const;
};

struct RateStudySettings {
    std::vector<std::size_t> N_grid{128, 256, 512, 1024, 2048, 4096};
    int replicates = 5;
    bool truncation_rule = true;  // J from 2^J ~ N^{1/(2 alpha + 4 + d)}
    std::uint64_t seed = 2024;
    std::size_t bootstrap = 2000;
    unsigned workers = 1;
    std::vector<double> thresholds{1.0, 5.0, 25.0};
};

struct OracleSettings {
    PathConfig paths;
    std::vector<Point> points;  // empty: ten default points
};

struct HypercubeSpec {
    int j = 0;           // 0 selects 2^j ~ N^{1/(2 alpha + 4 + d)}
    double kappa = 0.02;
    double c = 1.0;      // n_j = floor(c 2^{jd})
    std::size_t M = 0;   // 0: as many sign vectors as the greedy packing finds
    double separation_fraction = 0.125;
    double sigma = 0.01;
    std::size_t N = 4096;
    int alpha = 3;
    std::uint64_t seed = 11;
    std::size_t budget = 200000;  // random candidates tried when n_j > 16
};

struct CheckSettings {
    std::size_t n_draws = 50;
    std::uint64_t seed = 5;
    int J = 2;
    double c_stability = 1.0;
    double max_change = 0.3;
};

/// Everything a CLI run needs. Every section is optional in the JSON file;
/// unknown keys are rejected.
struct StudyConfig {
    int d = 1;
    int n_x = 65;
    int n_t = 65;
    double t_end = 1.0;
    SchemeConfig scheme;
    BoundarySpec boundary;
    LinkSpec link;
    PriorSpec prior;
    CutoffSpec cutoff;
    TruthSpec truth;
    DataConfig data;
    ChainConfig chain;
    RateStudySettings study;
    OracleSettings oracle;
    HypercubeSpec lowerbound;
    CheckSettings checks;

    StudyConfig();
    Grid grid() const { return Grid::build(d, n_x, n_t, t_end); }
    /// Prior for a study cell with N observations (rescaling and the
    /// truncation rule applied as configured).
    PriorSpec prior_for(std::size_t N) const;
    void validate() const;
};

StudyConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StudyConfig& c);
StudyConfig load_config(const std::filesystem::path& path);

// -- rate study -------------------------------------------------------------

struct ReportRecord {
    std::string scenario;
    std::size_t N = 0;
    int replicate = 0;
    int J = 0;
    double err_forward = 0.0;
    double err_f = 0.0;
    double err_f_pf = 0.0;
    double acceptance = 0.0;
    double ess = 0.0;
    double step_size = 0.0;
    std::uint64_t data_seed = 0;
    std::uint64_t chain_seed = 0;
    std::string status = "ok";
};

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

/// Least squares of log(error) on log(N). Needs >= 3 distinct N and positive errors.
SlopeFit fit_log_slope(const std::vector<std::pair<double, double>>& pairs);

struct RateStudyResult {
    std::vector<ReportRecord> records;
    std::vector<std::size_t> N_grid;
    std::vector<double> median_forward;
    std::vector<double> median_f;
    std::vector<double> median_f_pf;
    SlopeFit forward;
    SlopeFit f;
    SlopeFit f_pf;
    double bootstrap_negative_forward = 0.0;
    double bootstrap_negative_f = 0.0;
    double theory_forward = 0.0;
    double theory_f = 0.0;
    bool forward_monotone = false;  // nonincreasing medians, one adjacent inversion allowed

    nlohmann::json slopes_json() const;
    void write_csv(const std::filesystem::path& path) const;
    void write_long_csv(const std::filesystem::path& path) const;
};

RateStudyResult run_rate_study(const StudyConfig& cfg);

/// True when `v` is nonincreasing apart from at most one adjacent increase.
bool nonincreasing_with_one_inversion(const std::vector<double>& v);

// -- inequality checks ------------------------------------------------------

struct CheckReport {
    std::string name;
    std::vector<double> ratios;          // base grid, one per draw
    std::vector<double> ratios_refined;  // once-refined grid, same draws
    double max_ratio = 0.0;
    double max_ratio_refined = 0.0;
    double relative_change = 0.0;
    double identity_value = 0.0;  // numerator of the identity case
    double max_change = 0.3;
    bool passed = false;

    nlohmann::json to_json() const;
};

/// ||G(F1) - G(F2)||_{L2(Q)} / ((1 + max ||F_i||_C2)^4 ||F1 - F2||_{(H2)*}).
double lipschitz_ratio(const SpatialField& F1, const SpatialField& F2, const LinkSpec& link, const BoundaryData& bd,
                       const SchemeConfig& scheme);
/// ||f - f0||_{L2} / (exp(c max ||.||_inf) ||G(f) - G(f0)||_{H^{2,1}}).
double stability_ratio(const AbsorptionField& f, const AbsorptionField& f0, const BoundaryData& bd,
                       const SchemeConfig& scheme, double c);
/// ||G(f)||_{H^{4,2}} / (1 + ||f||_C2^2).
double norm_bound_ratio(const AbsorptionField& f, const BoundaryData& bd, const SchemeConfig& scheme);
/// ||u||_{H^{2,1}} / (||u||_{H^{4,2}}^{1/2} ||u||_{L2}^{1/2}); 0 for u = 0.
double interpolation_ratio(const SpaceTimeField& u);

CheckReport check_forward_lipschitz(const StudyConfig& cfg);
CheckReport check_stability(const StudyConfig& cfg);
CheckReport check_norm_bound(const StudyConfig& cfg);
CheckReport check_interpolation(const StudyConfig& cfg);

// -- lower-bound construction -----------------------------------------------

struct HypercubeFamily {
    int j = 0;
    std::size_t n_j = 0;
    double amplitude = 0.0;  // kappa 2^{-j(alpha + d/2)}
    std::vector<std::vector<int>> signs;
    std::vector<SpatialField> bumps;  // unit discrete L2 norm, disjoint supports
    std::vector<AbsorptionField> alternatives;
    std::size_t min_hamming = 0;
};

/// f_m = 1 + kappa 2^{-j(alpha + d/2)} sum_r b_{m,r} psi_r with n_j disjoint
/// smooth bumps, one per subcube of side 2^{-j}, and sign vectors greedily
/// packed at Hamming distance >= fraction * n_j.
HypercubeFamily build_hypercube_alternatives(const HypercubeSpec& spec, const Grid& grid, double f_min);

/// N ||u_m - u_0||^2_{L2(Q)} / (2 sigma^2 vol(Q)).
double kl_divergence(const AbsorptionField& f_m, const AbsorptionField& f_0, const BoundaryData& bd,
                     const SchemeConfig& scheme, std::size_t N, double sigma);

struct LowerBoundReport {
    int j = 0;
    std::size_t n_j = 0;
    std::size_t M = 0;
    double kappa = 0.0;
    double c_prime = 0.0;
    double separation_bound = 0.0;  // c' kappa 2^{-j alpha}
    double min_separation = 0.0;
    double max_separation_mismatch = 0.0;  // relative, direct vs coefficient formula
    std::size_t separation_violations = 0;
    double max_kl = 0.0;
    double epsilon = 0.0;  // max KL / log M
    double min_f = 0.0;
    double max_h_c2 = 0.0;
    std::vector<double> kl;

    bool passed() const noexcept { return separation_violations == 0 && M >= 2 && epsilon <= 1.0; }
    nlohmann::json to_json() const;
};

LowerBoundReport run_lower_bound(const StudyConfig& cfg);

// -- oracle check -----------------------------------------------------------

std::vector<Point> default_oracle_points(const Grid& grid);

}  // namespace heatinv
