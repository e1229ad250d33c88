#include <algorithm>
#include <cmath>
#include <limits>

#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

namespace heatinv {

using nlohmann::json;

namespace {

std::size_t hamming(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t h = 0;
    for (std::size_t i = 0; i < a.size(); ++i) h += a[i] != b[i] ? 1 : 0;
    return h;
}

double bump_profile(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

std::vector<std::vector<int>> pack_signs(std::size_t n_j, std::size_t min_distance, std::size_t target,
                                         std::uint64_t seed, std::size_t budget) {
    std::vector<std::vector<int>> chosen;
    auto try_add = [&](std::vector<int> cand) {
        for (const auto& c : chosen)
            if (hamming(c, cand) < min_distance) return;
        chosen.push_back(std::move(cand));
    };
    auto done = [&] { return target > 0 && chosen.size() >= target; };
    if (n_j <= 16) {
        for (std::uint32_t v = 0; v < (1u << n_j) && !done(); ++v) {
            std::vector<int> cand(n_j);
            for (std::size_t r = 0; r < n_j; ++r) cand[r] = (v >> r) & 1u ? -1 : 1;
            try_add(std::move(cand));
        }
    } else {
        Rng rng = make_rng(seed);
        try_add(std::vector<int>(n_j, 1));
        for (std::size_t b = 0; b < budget && !done(); ++b) {
            std::vector<int> cand(n_j);
            for (auto& x : cand) x = uniform01(rng) < 0.5 ? -1 : 1;
            try_add(std::move(cand));
        }
    }
    return chosen;
}

}  // namespace

HypercubeFamily build_hypercube_alternatives(const HypercubeSpec& spec, const Grid& grid, double f_min) {
    require(spec.kappa >= 0.0, ErrorCategory::InvalidArgument, "hypercube: kappa must be >= 0");
    const int d = grid.dim();
    HypercubeFamily fam;
    fam.j = spec.j > 0 ? spec.j : std::max(1, PriorSpec::truncation_level(spec.N, spec.alpha, d));
    const double side = std::ldexp(1.0, -fam.j);
    require(side >= 4.0 * grid.h(), ErrorCategory::InvalidArgument, "hypercube: bumps at level j are not resolvable");
    const std::size_t per_axis = std::size_t{1} << fam.j;
    const std::size_t cubes = d == 1 ? per_axis : per_axis * per_axis;
    fam.n_j = static_cast<std::size_t>(std::floor(spec.c * static_cast<double>(cubes)));
    require(fam.n_j >= 1 && fam.n_j <= cubes, ErrorCategory::InvalidArgument, "hypercube: c must give 1 <= n_j <= 2^{jd}");

    const double radius = 0.45 * side;
    for (std::size_t r = 0; r < fam.n_j; ++r) {
        const std::array<double, 2> centre{(static_cast<double>(r % per_axis) + 0.5) * side,
                                           (static_cast<double>(r / per_axis) + 0.5) * side};
        SpatialField b = SpatialField::sample(grid, [&](std::array<double, 2> x) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) r2 += (x[a] - centre[a]) * (x[a] - centre[a]);
            return bump_profile(r2 / (radius * radius));
        });
        const double norm = norm_l2_space(b);
        require(norm > 0.0, ErrorCategory::NumericalFailure, "hypercube: bump has no grid support");
        fam.bumps.push_back((1.0 / norm) * b);
    }

    const auto min_distance = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(spec.separation_fraction * static_cast<double>(fam.n_j) - 1e-12)));
    fam.signs = pack_signs(fam.n_j, min_distance, spec.M, spec.seed, spec.budget);
    if (spec.M > 0)
        require(fam.signs.size() >= spec.M, ErrorCategory::DomainViolation,
                "hypercube: packing reached only " + std::to_string(fam.signs.size()) + " of " +
                    std::to_string(spec.M) + " sign vectors");
    fam.min_hamming = fam.n_j;
    for (std::size_t a = 0; a < fam.signs.size(); ++a)
        for (std::size_t b = a + 1; b < fam.signs.size(); ++b)
            fam.min_hamming = std::min(fam.min_hamming, hamming(fam.signs[a], fam.signs[b]));

    fam.amplitude = spec.kappa * std::pow(2.0, -fam.j * (spec.alpha + d / 2.0));
    for (const auto& sign : fam.signs) {
        SpatialField f(grid, 1.0);
        for (std::size_t r = 0; r < fam.n_j; ++r) f = f + (fam.amplitude * sign[r]) * fam.bumps[r];
        require(*std::min_element(f.values().begin(), f.values().end()) >= f_min,
                ErrorCategory::DomainViolation, "hypercube: an alternative drops below f_min; reduce kappa");
        fam.alternatives.push_back(AbsorptionField(f, f_min));
    }
    return fam;
}

double kl_divergence(const AbsorptionField& f_m, const AbsorptionField& f_0, const BoundaryData& bd,
                     const SchemeConfig& scheme, std::size_t N, double sigma) {
    require(sigma > 0.0, ErrorCategory::InvalidArgument, "kl_divergence: sigma must be > 0");
    const double diff = norm_l2_spacetime(solve_forward(f_m, bd, scheme) - solve_forward(f_0, bd, scheme));
    return static_cast<double>(N) * diff * diff / (2.0 * sigma * sigma * bd.grid().volume());
}

json LowerBoundReport::to_json() const {
    return {{"j", j},
            {"n_j", n_j},
            {"M", M},
            {"kappa", kappa},
            {"c_prime", c_prime},
            {"separation_bound", separation_bound},
            {"min_separation", min_separation},
            {"max_separation_mismatch", max_separation_mismatch},
            {"separation_violations", separation_violations},
            {"max_kl", max_kl},
            {"log_M", M >= 2 ? std::log(static_cast<double>(M)) : 0.0},
            {"epsilon", epsilon},
            {"min_f", min_f},
            {"max_h_c2", max_h_c2},
            {"kl", kl},
            {"passed", passed()}};
}

LowerBoundReport run_lower_bound(const StudyConfig& cfg) {
    cfg.validate();
    const Grid grid = cfg.grid();
    const HypercubeSpec& spec = cfg.lowerbound;
    const HypercubeFamily fam = build_hypercube_alternatives(spec, grid, cfg.link.f_min);
    const BoundaryData bd = cfg.boundary.build(grid);
    const int d = grid.dim();

    LowerBoundReport rep;
    rep.j = fam.j;
    rep.n_j = fam.n_j;
    rep.M = fam.alternatives.size();
    rep.kappa = spec.kappa;
    rep.c_prime = std::sqrt(static_cast<double>(fam.n_j) * std::pow(2.0, -fam.j * d) / 2.0);
    rep.separation_bound = rep.c_prime * spec.kappa * std::pow(2.0, -fam.j * spec.alpha);
    rep.min_separation = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < rep.M; ++a)
        for (std::size_t b = a + 1; b < rep.M; ++b) {
            const double direct = norm_l2_space(fam.alternatives[a].field() - fam.alternatives[b].field());
            const double formula =
                fam.amplitude * 2.0 * std::sqrt(static_cast<double>(hamming(fam.signs[a], fam.signs[b])));
            if (formula > 0.0)
                rep.max_separation_mismatch = std::max(rep.max_separation_mismatch, std::abs(direct - formula) / formula);
            rep.min_separation = std::min(rep.min_separation, direct);
            if (direct < rep.separation_bound * (1.0 - 1e-12)) ++rep.separation_violations;
        }
    if (rep.M < 2) rep.min_separation = 0.0;

    const AbsorptionField f0 = AbsorptionField::constant(grid, 1.0, cfg.link.f_min);
    rep.min_f = std::numeric_limits<double>::infinity();
    for (const auto& f : fam.alternatives) {
        rep.kl.push_back(kl_divergence(f, f0, bd, cfg.scheme, spec.N, spec.sigma));
        rep.max_kl = std::max(rep.max_kl, rep.kl.back());
        rep.min_f = std::min(rep.min_f, *std::min_element(f.field().values().begin(), f.field().values().end()));
        rep.max_h_c2 = std::max(rep.max_h_c2, norm_c2(f.field() - f0.field()));
    }
    rep.epsilon = rep.M >= 2 ? rep.max_kl / std::log(static_cast<double>(rep.M)) : std::numeric_limits<double>::infinity();
    return rep;
}

}  // namespace heatinv
