#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "heatinv/error.hpp"
#include "heatinv/feynman_kac.hpp"

using namespace heatinv;

namespace {

constexpr double kPi = std::numbers::pi;

BoundaryData sine_data(const Grid& g) {
    return BoundaryData::from_functions(
        g, [](std::array<double, 2>, double) { return 0.0; },
        [](std::array<double, 2> x) { return std::sin(kPi * x[0]); });
}

}  // namespace

TEST(FeynmanKac, ConstantDataWithoutAbsorptionIsExact) {
    const Grid g = Grid::build(1, 17, 17, 1.0);
    PathConfig cfg;
    cfg.n_paths = 200;
    cfg.dt_path = 1e-3;
    const PointEstimate e = estimate_point(AbsorptionField::constant(g, 0.0), BoundaryData::constant(g, 2.0),
                                           Point{{0.3, 0.0}, 0.8}, cfg);
    EXPECT_DOUBLE_EQ(e.mean, 2.0);
    EXPECT_EQ(e.stderr_, 0.0);
    EXPECT_EQ(e.n_paths, 200u);
    EXPECT_GT(e.n_exited, 0u);
}

TEST(FeynmanKac, ConstantAbsorptionWithoutExitIsDeterministic) {
    // A path from the centre over a very short time never reaches the walls,
    // so every path scores u0 * e^{-f t}.
    const Grid g = Grid::build(1, 17, 17, 1.0);
    PathConfig cfg;
    cfg.n_paths = 100;
    cfg.dt_path = 1e-5;
    const PointEstimate e =
        estimate_point(AbsorptionField::constant(g, 3.0), BoundaryData::constant(g, 1.0), Point{{0.5, 0.0}, 1e-3}, cfg);
    EXPECT_EQ(e.n_exited, 0u);
    EXPECT_NEAR(e.mean, std::exp(-3.0 * 1e-3), 1e-12);
}

TEST(FeynmanKac, ClosedFormAgreement) {
    const Grid g = Grid::build(1, 17, 17, 1.0);
    PathConfig cfg;
    cfg.n_paths = 4000;
    cfg.dt_path = 1e-4;
    for (const Point z : {Point{{0.3, 0.0}, 0.2}, Point{{0.7, 0.0}, 0.1}}) {
        const PointEstimate e = estimate_point(AbsorptionField::constant(g, 1.0), sine_data(g), z, cfg);
        const double exact = std::exp(-(1.0 + kPi * kPi / 2.0) * z.t) * std::sin(kPi * z.x[0]);
        EXPECT_LT(std::abs(zscore(exact, e)), 4.0) << "mean " << e.mean << " exact " << exact;
    }
}

TEST(FeynmanKac, WorkerCountDoesNotChangeResult) {
    const Grid g = Grid::build(1, 17, 17, 1.0);
    PathConfig cfg;
    cfg.n_paths = 2500;
    cfg.dt_path = 1e-3;
    cfg.block_size = 300;
    const Point z{{0.4, 0.0}, 0.3};
    const auto f = AbsorptionField::constant(g, 1.0);
    const PointEstimate a = estimate_point(f, sine_data(g), z, cfg);
    cfg.workers = 3;
    const PointEstimate b = estimate_point(f, sine_data(g), z, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.stderr_, b.stderr_);
}

TEST(FeynmanKac, ConventionsAgreeForTimeIndependentData) {
    const Grid g = Grid::build(1, 17, 17, 1.0);
    PathConfig cfg;
    cfg.n_paths = 500;
    cfg.dt_path = 1e-3;
    const Point z{{0.2, 0.0}, 0.5};
    const auto f = AbsorptionField::constant(g, 0.5);
    const auto bd = BoundaryData::constant(g, 1.0);
    const PointEstimate a = estimate_point(f, bd, z, cfg);
    cfg.convention = ExitTimeConvention::Backward;
    const PointEstimate b = estimate_point(f, bd, z, cfg);
    EXPECT_EQ(a.mean, b.mean);
}

TEST(FeynmanKac, BackwardConventionMatchesSolverForDecayingData) {
    // g = e^{-t}, u0 = 1, f = 1: u = e^{-t}, and only the backward time
    // argument reproduces it. g is read off the grid linearly in time, which
    // costs up to dt^2/8.
    const Grid g = Grid::build(1, 17, 17, 1.0);
    const auto f = AbsorptionField::constant(g, 1.0);
    const auto bd = BoundaryData::decaying(g, 1.0);
    PathConfig cfg;
    cfg.n_paths = 4000;
    cfg.dt_path = 1e-3;
    const Point z{{0.3, 0.0}, 0.6};
    const PointEstimate b = estimate_point(f, bd, z, cfg);
    EXPECT_EQ(cfg.convention, ExitTimeConvention::Backward);
    EXPECT_NEAR(b.mean, std::exp(-0.6), 5e-4);
    cfg.convention = ExitTimeConvention::AsWritten;
    const PointEstimate a = estimate_point(f, bd, z, cfg);
    EXPECT_GT(std::abs(zscore(std::exp(-0.6), a)), 4.0);
}

TEST(FeynmanKac, RejectsPointsOutsideTheCylinder) {
    const Grid g = Grid::build(1, 17, 17, 1.0);
    const auto f = AbsorptionField::constant(g, 1.0);
    PathConfig cfg;
    cfg.n_paths = 10;
    EXPECT_THROW(estimate_point(f, sine_data(g), Point{{0.0, 0.0}, 0.5}, cfg), Error);
    EXPECT_THROW(estimate_point(f, sine_data(g), Point{{0.5, 0.0}, 0.0}, cfg), Error);
    EXPECT_THROW(estimate_point(f, sine_data(g), Point{{0.5, 0.0}, 1.5}, cfg), Error);
    cfg.n_paths = 0;
    EXPECT_THROW(estimate_point(f, sine_data(g), Point{{0.5, 0.0}, 0.5}, cfg), Error);
}

TEST(FeynmanKac, ZscoreConventions) {
    PointEstimate e;
    e.mean = 1.0;
    e.stderr_ = 0.5;
    EXPECT_DOUBLE_EQ(zscore(2.0, e), 2.0);
    e.stderr_ = 0.0;
    EXPECT_EQ(zscore(1.0, e), 0.0);
    EXPECT_TRUE(std::isinf(zscore(1.1, e)));
}

TEST(FeynmanKac, CorruptedSolutionFailsValidation) {
    const Grid g = Grid::build(1, 33, 33, 1.0);
    const auto f = AbsorptionField::constant(g, 1.0);
    const auto bd = sine_data(g);
    const SpaceTimeField u = solve_forward(f, bd);
    std::vector<double> scaled(u.values().begin(), u.values().end());
    for (double& v : scaled) v *= 1.5;
    PathConfig cfg;
    cfg.n_paths = 2000;
    cfg.dt_path = 1e-3;
    const std::vector<Point> pts{{{0.5, 0.0}, 0.3}, {{0.25, 0.0}, 0.2}};
    const ValidationReport bad = validate_solution(SpaceTimeField(g, scaled), f, bd, pts, cfg);
    EXPECT_FALSE(bad.passed);
    EXPECT_EQ(bad.records.size(), 2u);

    const std::filesystem::path out = std::filesystem::temp_directory_path() / "heatinv_unit_oracle.csv";
    bad.write_csv(out);
    std::ifstream is(out);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "point,x1,x2,t,pde_value,fk_mean,fk_stderr,zscore");
    EXPECT_EQ(bad.summary().at("passed"), false);
}
