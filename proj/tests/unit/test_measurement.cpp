#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "heatinv/error.hpp"
#include "heatinv/measurement.hpp"

using namespace heatinv;
namespace fs = std::filesystem;

namespace {

struct Scenario {
    Grid grid = Grid::build(1, 33, 33, 1.0);
    AbsorptionField f = AbsorptionField::constant(grid, 1.0, 0.1);
    BoundaryData bd = BoundaryData::decaying(grid, 1.0);
};

DataConfig data_config(std::size_t N, double sigma, std::uint64_t seed) {
    DataConfig dc;
    dc.N = N;
    dc.sigma = sigma;
    dc.seed = seed;
    return dc;
}

}  // namespace

TEST(Design, PointsLieInOpenCylinder) {
    const Grid g = Grid::build(2, 9, 9, 0.5);
    const auto pts = sample_design(2000, g, 8);
    ASSERT_EQ(pts.size(), 2000u);
    for (const auto& p : pts) {
        EXPECT_GT(p.x[0], 0.0);
        EXPECT_LT(p.x[0], 1.0);
        EXPECT_GT(p.x[1], 0.0);
        EXPECT_LT(p.x[1], 1.0);
        EXPECT_GT(p.t, 0.0);
        EXPECT_LT(p.t, 0.5);
    }
}

TEST(Design, UniformMoments) {
    const Grid g = Grid::build(1, 9, 9, 2.0);
    const auto pts = sample_design(20000, g, 1);
    double mx = 0.0, mt = 0.0;
    for (const auto& p : pts) {
        mx += p.x[0];
        mt += p.t;
    }
    mx /= pts.size();
    mt /= pts.size();
    // Means 1/2 and T/2 with standard errors sqrt(1/12 / n) and T sqrt(1/12 / n).
    const double se = std::sqrt(1.0 / 12.0 / pts.size());
    EXPECT_NEAR(mx, 0.5, 4 * se);
    EXPECT_NEAR(mt, 1.0, 4 * 2.0 * se);
}

TEST(Data, NoiselessObservationsInterpolateTheSolution) {
    Scenario s;
    const Dataset d = generate_data(s.f, s.bd, SchemeConfig{}, data_config(50, 0.0, 4));
    EXPECT_TRUE(d.noiseless());
    const SpaceTimeField u = solve_forward(s.f, s.bd);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_DOUBLE_EQ(d.observations[i], interpolate(u, d.points[i]));
    EXPECT_DOUBLE_EQ(log_likelihood_of_solution(u, Dataset{1, d.points, d.observations, 0.5, {}}), 0.0);
}

TEST(Data, SeedDeterminesDataset) {
    Scenario s;
    const Dataset a = generate_data(s.f, s.bd, SchemeConfig{}, data_config(40, 0.01, 9));
    const Dataset b = generate_data(s.f, s.bd, SchemeConfig{}, data_config(40, 0.01, 9));
    const Dataset c = generate_data(s.f, s.bd, SchemeConfig{}, data_config(40, 0.01, 10));
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    EXPECT_EQ(a.metadata.at("seed"), 9);
}

TEST(Data, NoiseHasRequestedScale) {
    Scenario s;
    const double sigma = 0.05;
    const Dataset d = generate_data(s.f, s.bd, SchemeConfig{}, data_config(5000, sigma, 2));
    const SpaceTimeField u = solve_forward(s.f, s.bd);
    double ss = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = d.observations[i] - interpolate(u, d.points[i]);
        ss += r * r;
    }
    const double var = ss / d.size();
    EXPECT_NEAR(var / (sigma * sigma), 1.0, 4 * std::sqrt(2.0 / d.size()));
    // The log-likelihood at the truth is -ss / (2 sigma^2).
    EXPECT_NEAR(log_likelihood_of_solution(u, d), -ss / (2 * sigma * sigma), 1e-9 * ss / (sigma * sigma));
}

TEST(Likelihood, EmptyDataAndZeroSigma) {
    Scenario s;
    const LinkSpec link;
    const SpatialField F(s.grid, 0.3);
    const Dataset empty = generate_data(s.f, s.bd, SchemeConfig{}, data_config(0, 0.01, 1));
    const auto before = forward_solve_count();
    EXPECT_EQ(log_likelihood(F, empty, link, s.bd), 0.0);
    EXPECT_EQ(forward_solve_count(), before);

    const Dataset noiseless = generate_data(s.f, s.bd, SchemeConfig{}, data_config(5, 0.0, 1));
    try {
        log_likelihood(F, noiseless, link, s.bd);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::InvalidArgument);
    }
}

TEST(Likelihood, OneSolvePerEvaluationAndMaximalAtTruth) {
    Scenario s;
    const LinkSpec link{0.1};
    const Dataset d = generate_data(s.f, s.bd, SchemeConfig{}, data_config(200, 0.01, 3));
    const SpatialField F0(s.grid, 0.0);  // Phi(0) = 1 = f
    const auto before = forward_solve_count();
    const double l0 = log_likelihood(F0, d, link, s.bd);
    EXPECT_EQ(forward_solve_count(), before + 1);
    EXPECT_GT(l0, log_likelihood(SpatialField(s.grid, 1.0), d, link, s.bd));
    EXPECT_GT(l0, log_likelihood(SpatialField(s.grid, -1.0), d, link, s.bd));
}

TEST(DatasetIo, RoundTripIsExact) {
    Scenario s;
    const fs::path dir = fs::temp_directory_path() / "heatinv_unit_dataset";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const Dataset d = generate_data(s.f, s.bd, SchemeConfig{}, data_config(64, 0.02, 12));
    save_dataset(dir / "data.csv", d);
    const Dataset back = load_dataset(dir / "data.csv");
    EXPECT_TRUE(back == d);
    EXPECT_EQ(back.metadata.at("seed"), 12);
}

TEST(DatasetIo, SchemaViolationsAreReported) {
    const fs::path dir = fs::temp_directory_path() / "heatinv_unit_dataset_bad";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream(dir / "d.csv") << "x1,t,y\n0.5,0.5\n";
        std::ofstream(dir / "d.json") << R"({"dim": 1, "N": 1, "sigma": 0.1, "metadata": {}})";
    }
    try {
        load_dataset(dir / "d.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Schema);
    }
    try {
        load_dataset(dir / "missing.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Io);
    }
}
