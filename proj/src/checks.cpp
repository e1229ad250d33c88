#include <algorithm>
#include <cmath>
#include <numbers>

#include "heatinv/error.hpp"
#include "heatinv/study.hpp"

namespace heatinv {

using nlohmann::json;

double lipschitz_ratio(const SpatialField& F1, const SpatialField& F2, const LinkSpec& link, const BoundaryData& bd,
                       const SchemeConfig& scheme) {
    const double num = norm_l2_spacetime(forward_map(F1, link, bd, scheme) - forward_map(F2, link, bd, scheme));
    const double c2 = std::max(norm_c2(F1), norm_c2(F2));
    const double den = std::pow(1.0 + c2, 4) * norm_dual_h2(F1 - F2);
    return den > 0.0 ? num / den : 0.0;
}

double stability_ratio(const AbsorptionField& f, const AbsorptionField& f0, const BoundaryData& bd,
                       const SchemeConfig& scheme, double c) {
    const double num = norm_l2_space(f.field() - f0.field());
    const double sup = std::max(f.sup(), f0.sup());
    const double den =
        std::exp(c * sup) * norm_parabolic_sobolev(solve_forward(f, bd, scheme) - solve_forward(f0, bd, scheme), 2);
    return den > 0.0 ? num / den : 0.0;
}

double norm_bound_ratio(const AbsorptionField& f, const BoundaryData& bd, const SchemeConfig& scheme) {
    const double c2 = norm_c2(f.field());
    return norm_parabolic_sobolev(solve_forward(f, bd, scheme), 4) / (1.0 + c2 * c2);
}

double interpolation_ratio(const SpaceTimeField& u) {
    const double h21 = norm_parabolic_sobolev(u, 2);
    const double den = std::sqrt(norm_parabolic_sobolev(u, 4)) * std::sqrt(norm_l2_spacetime(u));
    return den > 0.0 ? h21 / den : 0.0;
}

json CheckReport::to_json() const {
    return {{"name", name},
            {"n_draws", ratios.size()},
            {"max_ratio", max_ratio},
            {"max_ratio_refined", max_ratio_refined},
            {"relative_change", relative_change},
            {"max_change", max_change},
            {"identity_value", identity_value},
            {"passed", passed},
            {"ratios", ratios},
            {"ratios_refined", ratios_refined}};
}

namespace {

struct CheckSetup {
    Grid base;
    Grid fine;
    BoundaryData bd_base;
    BoundaryData bd_fine;
    GaussianPrior prior_base;
    GaussianPrior prior_fine;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> draws;
};

CheckSetup setup(const StudyConfig& cfg) {
    cfg.validate();
    PriorSpec ps;
    ps.kind = PriorKind::TruncatedSeries;
    ps.alpha = cfg.prior.alpha;
    ps.J = cfg.checks.J;
    ps.d = cfg.d;
    const Grid base = cfg.grid();
    const Grid fine = base.refined();
    CheckSetup s{base,
                 fine,
                 cfg.boundary.build(base),
                 cfg.boundary.build(fine),
                 GaussianPrior(ps, cfg.cutoff, base),
                 GaussianPrior(ps, cfg.cutoff, fine),
                 {}};
    for (std::size_t i = 0; i < cfg.checks.n_draws; ++i) {
        Rng r1 = make_rng(cfg.checks.seed, 2 * i);
        Rng r2 = make_rng(cfg.checks.seed, 2 * i + 1);
        auto w1 = s.prior_base.draw_white(r1);
        auto w2 = s.prior_base.draw_white(r2);
        s.draws.emplace_back(std::move(w1), std::move(w2));
    }
    return s;
}

CheckReport finish(std::string name, std::vector<double> ratios, std::vector<double> refined, double identity,
                   double max_change) {
    CheckReport r;
    r.name = std::move(name);
    r.max_change = max_change;
    r.identity_value = identity;
    r.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    r.max_ratio_refined = *std::max_element(refined.begin(), refined.end());
    bool finite = true;
    for (double v : ratios) finite = finite && std::isfinite(v);
    for (double v : refined) finite = finite && std::isfinite(v);
    r.relative_change = r.max_ratio > 0.0 ? std::abs(r.max_ratio_refined - r.max_ratio) / r.max_ratio
                                          : std::numeric_limits<double>::infinity();
    r.passed = finite && r.relative_change <= max_change && identity == 0.0;
    r.ratios = std::move(ratios);
    r.ratios_refined = std::move(refined);
    return r;
}

}  // namespace

CheckReport check_forward_lipschitz(const StudyConfig& cfg) {
    const CheckSetup s = setup(cfg);
    std::vector<double> base;
    std::vector<double> fine;
    for (const auto& [w1, w2] : s.draws) {
        base.push_back(lipschitz_ratio(s.prior_base.field(w1), s.prior_base.field(w2), cfg.link, s.bd_base, cfg.scheme));
        fine.push_back(lipschitz_ratio(s.prior_fine.field(w1), s.prior_fine.field(w2), cfg.link, s.bd_fine, cfg.scheme));
    }
    const SpatialField F = s.prior_base.field(s.draws.front().first);
    const double identity =
        norm_l2_spacetime(forward_map(F, cfg.link, s.bd_base, cfg.scheme) - forward_map(F, cfg.link, s.bd_base, cfg.scheme));
    return finish("forward_lipschitz", std::move(base), std::move(fine), identity, cfg.checks.max_change);
}

CheckReport check_stability(const StudyConfig& cfg) {
    const CheckSetup s = setup(cfg);
    const double c = cfg.checks.c_stability;
    std::vector<double> base;
    std::vector<double> fine;
    for (const auto& [w1, w2] : s.draws) {
        base.push_back(stability_ratio(link_phi_field(s.prior_base.field(w1), cfg.link),
                                       link_phi_field(s.prior_base.field(w2), cfg.link), s.bd_base, cfg.scheme, c));
        fine.push_back(stability_ratio(link_phi_field(s.prior_fine.field(w1), cfg.link),
                                       link_phi_field(s.prior_fine.field(w2), cfg.link), s.bd_fine, cfg.scheme, c));
    }
    const AbsorptionField f = link_phi_field(s.prior_base.field(s.draws.front().first), cfg.link);
    const double identity = norm_l2_space(f.field() - f.field());
    return finish("stability", std::move(base), std::move(fine), identity, cfg.checks.max_change);
}

CheckReport check_norm_bound(const StudyConfig& cfg) {
    const CheckSetup s = setup(cfg);
    std::vector<double> base;
    std::vector<double> fine;
    for (const auto& [w1, w2] : s.draws) {
        base.push_back(norm_bound_ratio(link_phi_field(s.prior_base.field(w1), cfg.link), s.bd_base, cfg.scheme));
        fine.push_back(norm_bound_ratio(link_phi_field(s.prior_fine.field(w1), cfg.link), s.bd_fine, cfg.scheme));
    }
    // Zero deviation: Phi(0) is the constant field 1.
    const AbsorptionField f_zero = link_phi_field(SpatialField(s.base, 0.0), cfg.link);
    const AbsorptionField one = AbsorptionField::constant(s.base, 1.0);
    const double identity =
        norm_l2_spacetime(solve_forward(f_zero, s.bd_base, cfg.scheme) - solve_forward(one, s.bd_base, cfg.scheme));
    return finish("norm_bound", std::move(base), std::move(fine), identity, cfg.checks.max_change);
}

namespace {

/// Smooth space-time field with random low-frequency content, defined as a
/// function so it can be sampled on any grid.
struct SmoothField {
    std::vector<double> amp;
    std::vector<double> phase;

    static SmoothField draw(Rng& rng) {
        SmoothField f;
        for (int i = 0; i < 18; ++i) {
            f.amp.push_back(standard_normal(rng));
            f.phase.push_back(2.0 * std::numbers::pi * uniform01(rng));
        }
        return f;
    }

    SpaceTimeField sample(const Grid& g) const {
        return SpaceTimeField::sample(g, [&](std::array<double, 2> x, double t) {
            double v = 0.0;
            int idx = 0;
            for (int k = 1; k <= 3; ++k)
                for (int m = 0; m <= 2; ++m, ++idx) {
                    const double w = amp[idx] / ((1.0 + k + m) * (1.0 + k + m));
                    double term = w * std::cos(std::numbers::pi * k * x[0] + phase[idx]) *
                                  std::cos(std::numbers::pi * m * t / g.t_end());
                    if (g.dim() == 2) term *= std::cos(std::numbers::pi * k * x[1] + phase[idx + 9]);
                    v += term;
                }
            return v;
        });
    }
};

}  // namespace

CheckReport check_interpolation(const StudyConfig& cfg) {
    const CheckSetup s = setup(cfg);
    std::vector<double> base;
    std::vector<double> fine;
    for (std::size_t i = 0; i < s.draws.size(); ++i) {
        const auto& w = s.draws[i].first;
        if (i % 2 == 0) {
            base.push_back(interpolation_ratio(forward_map(s.prior_base.field(w), cfg.link, s.bd_base, cfg.scheme)));
            fine.push_back(interpolation_ratio(forward_map(s.prior_fine.field(w), cfg.link, s.bd_fine, cfg.scheme)));
        } else {
            Rng rng = make_rng(cfg.checks.seed, (1ull << 32) + i);
            const SmoothField sf = SmoothField::draw(rng);
            base.push_back(interpolation_ratio(sf.sample(s.base)));
            fine.push_back(interpolation_ratio(sf.sample(s.fine)));
        }
    }
    const double identity = interpolation_ratio(SpaceTimeField(s.base, 0.0));
    return finish("interpolation", std::move(base), std::move(fine), identity, cfg.checks.max_change);
}

}  // namespace heatinv
