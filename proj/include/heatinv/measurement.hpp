#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "heatinv/grid.hpp"
#include "heatinv/pde.hpp"
#include "heatinv/prior.hpp"

namespace heatinv {

/// Noisy point evaluations Y_i = u(Z_i) + sigma W_i. `metadata` carries the
/// grid, seed and truth descriptors needed to regenerate the data.
struct Dataset {
    int dim = 1;
    std::vector<Point> points;
    std::vector<double> observations;
    double sigma = 0.0;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t size() const noexcept { return points.size(); }
    bool noiseless() const noexcept { return sigma == 0.0; }
    void validate() const;

    friend bool operator==(const Dataset& a, const Dataset& b);
};

/// N i.i.d. uniform points in the open cylinder (0,1)^d x (0,T).
std::vector<Point> sample_design(std::size_t N, const Grid& grid, std::uint64_t seed);

struct DataConfig {
    std::size_t N = 0;
    double sigma = 0.01;
    std::uint64_t seed = 1;
    // Solve on the grid refined once before interpolating, so data and
    // likelihood no longer share a discretization.
    bool refine_truth = false;
    nlohmann::json truth = nlohmann::json::object();  // descriptor echoed into metadata
};

/// Design from stream 0 of `seed`, noise from stream 1.
Dataset generate_data(const AbsorptionField& f0, const BoundaryData& bd, const SchemeConfig& scheme,
                      const DataConfig& cfg);

/// -1/(2 sigma^2) sum (Y_i - u(Z_i))^2 for a given solution u.
double log_likelihood_of_solution(const SpaceTimeField& u, const Dataset& data);

/// The same with u = G(Phi o F): exactly one forward solve, none when N = 0.
double log_likelihood(const SpatialField& F, const Dataset& data, const LinkSpec& link, const BoundaryData& bd,
                      const SchemeConfig& scheme = {});

/// CSV with header x1[,x2],t,y (17 significant digits) plus a JSON sidecar
/// holding sigma, N, dim and metadata.
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace heatinv
