#include "heatinv/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "heatinv/error.hpp"

namespace heatinv {

using nlohmann::json;

// -- Grid -------------------------------------------------------------------

Grid::Grid(int d, int n_x, int n_t, double t_end)
    : d_(d),
      n_x_(n_x),
      n_t_(n_t),
      t_end_(t_end),
      h_(1.0 / (n_x - 1)),
      dt_(t_end / (n_t - 1)),
      n_space_(d == 1 ? static_cast<std::size_t>(n_x) : static_cast<std::size_t>(n_x) * n_x) {}

Grid Grid::build(int d, int n_x, int n_t, double t_end) {
    require(d == 1 || d == 2, ErrorCategory::InvalidArgument, "grid: d must be 1 or 2");
    require(n_x >= 3, ErrorCategory::InvalidArgument, "grid: n_x must be >= 3");
    require(n_t >= 2, ErrorCategory::InvalidArgument, "grid: n_t must be >= 2");
    require(std::isfinite(t_end) && t_end > 0.0, ErrorCategory::InvalidArgument,
            "grid: T_end must be positive");
    return Grid(d, n_x, n_t, t_end);
}

bool Grid::on_boundary(std::size_t s) const noexcept {
    auto a = axes(s);
    auto edge = [this](int i) { return i == 0 || i == n_x_ - 1; };
    return edge(a[0]) || (d_ == 2 && edge(a[1]));
}

namespace {
double trapezoid_weight(int i, int n, double step) {
    return (i == 0 || i == n - 1) ? 0.5 * step : step;
}
}  // namespace

double Grid::space_weight(std::size_t s) const noexcept {
    auto a = axes(s);
    double w = trapezoid_weight(a[0], n_x_, h_);
    if (d_ == 2) w *= trapezoid_weight(a[1], n_x_, h_);
    return w;
}

double Grid::time_weight(int k) const noexcept { return trapezoid_weight(k, n_t_, dt_); }

json to_json(const Grid& g) {
    return json{{"d", g.dim()}, {"n_x", g.n_x()}, {"n_t", g.n_t()}, {"T_end", g.t_end()}};
}

Grid grid_from_json(const json& j) {
    try {
        return Grid::build(j.at("d").get<int>(), j.at("n_x").get<int>(), j.at("n_t").get<int>(),
                           j.at("T_end").get<double>());
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("grid header: ") + e.what());
    }
}

// -- fields -----------------------------------------------------------------

namespace {
void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        require(std::isfinite(x), ErrorCategory::NumericalFailure, std::string(what) + ": non-finite value");
}
}  // namespace

SpatialField::SpatialField(const Grid& grid, double value) : grid_(grid), values_(grid.n_space(), value) {
    require(std::isfinite(value), ErrorCategory::InvalidArgument, "spatial field: non-finite value");
}

SpatialField::SpatialField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.n_space(), ErrorCategory::InvalidArgument,
            "spatial field: value count does not match grid");
    check_finite(values_, "spatial field");
}

SpatialField operator-(const SpatialField& a, const SpatialField& b) {
    require(a.grid() == b.grid(), ErrorCategory::InvalidArgument, "field difference: grids differ");
    std::vector<double> v(a.size());
    for (std::size_t s = 0; s < v.size(); ++s) v[s] = a[s] - b[s];
    return SpatialField(a.grid(), std::move(v));
}

SpatialField operator+(const SpatialField& a, const SpatialField& b) {
    require(a.grid() == b.grid(), ErrorCategory::InvalidArgument, "field sum: grids differ");
    std::vector<double> v(a.size());
    for (std::size_t s = 0; s < v.size(); ++s) v[s] = a[s] + b[s];
    return SpatialField(a.grid(), std::move(v));
}

SpatialField operator*(double c, const SpatialField& a) {
    std::vector<double> v(a.values().begin(), a.values().end());
    for (double& x : v) x *= c;
    return SpatialField(a.grid(), std::move(v));
}

SpaceTimeField::SpaceTimeField(const Grid& grid, double value)
    : grid_(grid), values_(grid.n_spacetime(), value) {
    require(std::isfinite(value), ErrorCategory::InvalidArgument, "space-time field: non-finite value");
}

SpaceTimeField::SpaceTimeField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.n_spacetime(), ErrorCategory::InvalidArgument,
            "space-time field: value count does not match grid");
    check_finite(values_, "space-time field");
}

SpatialField SpaceTimeField::level_field(int k) const {
    auto l = level(k);
    return SpatialField(grid_, std::vector<double>(l.begin(), l.end()));
}

SpaceTimeField operator-(const SpaceTimeField& a, const SpaceTimeField& b) {
    require(a.grid() == b.grid(), ErrorCategory::InvalidArgument, "field difference: grids differ");
    std::vector<double> v(a.size());
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
    return SpaceTimeField(a.grid(), std::move(v));
}

// -- interpolation ----------------------------------------------------------

namespace {

struct Bracket {
    int lo;
    double frac;
};

// Cell containing `c` on a uniform axis of `n` nodes with spacing `step`.
// Coordinates that sit on a node up to rounding snap to it, so nodal values
// are reproduced exactly.
Bracket bracket(double c, double step, int n) {
    double pos = c / step;
    double r = std::nearbyint(pos);
    if (std::abs(pos - r) < 1e-10) pos = r;
    int lo = static_cast<int>(std::floor(pos));
    lo = std::clamp(lo, 0, n - 2);
    return {lo, pos - lo};
}

void check_inside(const Grid& g, std::array<double, 2> x) {
    for (int a = 0; a < g.dim(); ++a)
        require(x[a] >= 0.0 && x[a] <= 1.0, ErrorCategory::DomainViolation,
                "interpolate: point outside the spatial domain");
}

double interpolate_level(const Grid& g, std::span<const double> v, std::array<double, 2> x) {
    auto bx = bracket(x[0], g.h(), g.n_x());
    if (g.dim() == 1) return (1.0 - bx.frac) * v[bx.lo] + bx.frac * v[bx.lo + 1];
    auto by = bracket(x[1], g.h(), g.n_x());
    auto at = [&](int i, int j) { return v[g.flat(i, j)]; };
    double lower = (1.0 - bx.frac) * at(bx.lo, by.lo) + bx.frac * at(bx.lo + 1, by.lo);
    double upper = (1.0 - bx.frac) * at(bx.lo, by.lo + 1) + bx.frac * at(bx.lo + 1, by.lo + 1);
    return (1.0 - by.frac) * lower + by.frac * upper;
}

}  // namespace

double interpolate(const SpaceTimeField& u, const Point& z) {
    const Grid& g = u.grid();
    check_inside(g, z.x);
    require(z.t >= 0.0 && z.t <= g.t_end(), ErrorCategory::DomainViolation,
            "interpolate: time outside [0, T]");
    auto bt = bracket(z.t, g.dt(), g.n_t());
    double a = interpolate_level(g, u.level(bt.lo), z.x);
    if (bt.frac == 0.0) return a;
    double b = interpolate_level(g, u.level(bt.lo + 1), z.x);
    return (1.0 - bt.frac) * a + bt.frac * b;
}

double interpolate(const SpatialField& w, std::array<double, 2> x) {
    check_inside(w.grid(), x);
    return interpolate_level(w.grid(), w.values(), x);
}

SpatialField resample(const SpatialField& w, const Grid& target) {
    require(target.dim() == w.grid().dim(), ErrorCategory::InvalidArgument, "resample: dimension mismatch");
    return SpatialField::sample(target, [&](std::array<double, 2> x) { return interpolate(w, x); });
}

SpaceTimeField resample(const SpaceTimeField& u, const Grid& target) {
    require(target.dim() == u.grid().dim() && target.t_end() == u.grid().t_end(),
            ErrorCategory::InvalidArgument, "resample: domain mismatch");
    return SpaceTimeField::sample(target, [&](std::array<double, 2> x, double t) {
        return interpolate(u, Point{x, t});
    });
}

// -- finite differences -----------------------------------------------------

std::vector<double> fd_weights(std::span<const double> x, int m) {
    const int n = static_cast<int>(x.size());
    require(n > m, ErrorCategory::InvalidArgument, "fd_weights: not enough points for derivative order");
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0];
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0;
        double c5 = c4;
        c4 = x[i];
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

void differentiate(std::span<const double> in, std::span<double> out, std::span<const Axis> axes,
                   std::size_t axis, int deriv, double step) {
    const Axis ax = axes[axis];
    const int n = static_cast<int>(ax.size);
    if (deriv == 0) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    const int width = stencil_width(deriv);
    require(n >= width, ErrorCategory::InvalidArgument,
            "finite difference: stencil does not fit (grid too coarse)");

    // Per-node stencil start and weights; identical for every line.
    std::vector<int> start(n);
    std::vector<std::vector<double>> weights(n);
    const double scale = std::pow(step, -deriv);
    std::vector<double> offsets(width);
    for (int i = 0; i < n; ++i) {
        start[i] = std::clamp(i - width / 2, 0, n - width);
        for (int m = 0; m < width; ++m) offsets[m] = start[i] + m - i;
        weights[i] = fd_weights(offsets, deriv);
        for (double& w : weights[i]) w *= scale;
    }

    for (std::size_t base = 0; base < in.size(); ++base) {
        if ((base / ax.stride) % ax.size != 0) continue;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int m = 0; m < width; ++m) acc += weights[i][m] * in[base + (start[i] + m) * ax.stride];
            out[base + i * ax.stride] = acc;
        }
    }
}

// -- norms ------------------------------------------------------------------

double norm_sup(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double norm_l2_space(const SpatialField& w) {
    const Grid& g = w.grid();
    double acc = 0.0;
    for (std::size_t s = 0; s < w.size(); ++s) acc += g.space_weight(s) * w[s] * w[s];
    return std::sqrt(acc);
}

namespace {

double squared_l2_spacetime(const Grid& g, std::span<const double> v) {
    double acc = 0.0;
    for (int k = 0; k < g.n_t(); ++k) {
        double lev = 0.0;
        for (std::size_t s = 0; s < g.n_space(); ++s) {
            double x = v[k * g.n_space() + s];
            lev += g.space_weight(s) * x * x;
        }
        acc += g.time_weight(k) * lev;
    }
    return acc;
}

std::vector<Axis> spacetime_axes(const Grid& g) {
    const auto n = static_cast<std::size_t>(g.n_x());
    if (g.dim() == 1) return {{n, 1}, {static_cast<std::size_t>(g.n_t()), n}};
    return {{n, 1}, {n, n}, {static_cast<std::size_t>(g.n_t()), n * n}};
}

std::vector<Axis> space_axes(const Grid& g) {
    const auto n = static_cast<std::size_t>(g.n_x());
    if (g.dim() == 1) return {{n, 1}};
    return {{n, 1}, {n, n}};
}

// All spatial multi-indices with |a| <= order.
std::vector<std::array<int, 2>> multi_indices(int d, int order) {
    std::vector<std::array<int, 2>> out;
    for (int a1 = 0; a1 <= order; ++a1) {
        if (d == 1) {
            out.push_back({a1, 0});
            continue;
        }
        for (int a2 = 0; a1 + a2 <= order; ++a2) out.push_back({a1, a2});
    }
    return out;
}

}  // namespace

double norm_l2_spacetime(const SpaceTimeField& u) { return std::sqrt(squared_l2_spacetime(u.grid(), u.values())); }

double norm_parabolic_sobolev(const SpaceTimeField& u, int s) {
    require(s == 2 || s == 4, ErrorCategory::InvalidArgument, "parabolic Sobolev norm: s must be 2 or 4");
    const Grid& g = u.grid();
    require(g.n_x() >= stencil_width(s) && g.n_t() >= stencil_width(s / 2), ErrorCategory::InvalidArgument,
            "parabolic Sobolev norm: stencil does not fit (grid too coarse)");
    const auto axes = spacetime_axes(g);
    std::vector<double> tmp(u.size());
    std::vector<double> der(u.size());
    double acc = 0.0;
    for (auto a : multi_indices(g.dim(), s)) {
        differentiate(u.values(), tmp, axes, 0, a[0], g.h());
        if (g.dim() == 2) {
            differentiate(tmp, der, axes, 1, a[1], g.h());
            acc += squared_l2_spacetime(g, der);
        } else {
            acc += squared_l2_spacetime(g, tmp);
        }
    }
    for (int k = 1; k <= s / 2; ++k) {
        differentiate(u.values(), der, axes, axes.size() - 1, k, g.dt());
        acc += squared_l2_spacetime(g, der);
    }
    return std::sqrt(acc);
}

double norm_c2(const SpatialField& w) {
    const Grid& g = w.grid();
    const auto axes = space_axes(g);
    std::vector<double> tmp(w.size());
    std::vector<double> der(w.size());
    double acc = 0.0;
    for (auto a : multi_indices(g.dim(), 2)) {
        differentiate(w.values(), tmp, axes, 0, a[0], g.h());
        if (g.dim() == 2) {
            differentiate(tmp, der, axes, 1, a[1], g.h());
            acc += norm_sup(der);
        } else {
            acc += norm_sup(tmp);
        }
    }
    return acc;
}

std::vector<double> sine_coefficients(const SpatialField& w) {
    const Grid& g = w.grid();
    const int n = g.n_x();
    const int modes = n - 2;
    // table[k-1][i] = h * sqrt(2) * sin(pi k x_i); boundary nodes contribute 0.
    std::vector<double> table(static_cast<std::size_t>(modes) * n, 0.0);
    for (int k = 1; k <= modes; ++k)
        for (int i = 1; i < n - 1; ++i)
            table[(k - 1) * n + i] = g.h() * std::numbers::sqrt2 *
                                     std::sin(std::numbers::pi * static_cast<double>(k) * i / (n - 1));
    auto v = w.values();
    if (g.dim() == 1) {
        std::vector<double> out(modes, 0.0);
        for (int k = 0; k < modes; ++k)
            for (int i = 0; i < n; ++i) out[k] += table[k * n + i] * v[i];
        return out;
    }
    // Transform along x1 for every row j, then along x2.
    std::vector<double> partial(static_cast<std::size_t>(modes) * n, 0.0);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < modes; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += table[k * n + i] * v[g.flat(i, j)];
            partial[k + static_cast<std::size_t>(modes) * j] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(modes) * modes, 0.0);
    for (int k2 = 0; k2 < modes; ++k2)
        for (int k1 = 0; k1 < modes; ++k1) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += table[k2 * n + j] * partial[k1 + static_cast<std::size_t>(modes) * j];
            out[k1 + static_cast<std::size_t>(modes) * k2] = acc;
        }
    return out;
}

double spectral_norm(const SpatialField& w, double exponent) {
    const Grid& g = w.grid();
    const double tol = 1e-12 * std::max(1.0, norm_sup(w.values()));
    for (std::size_t s = 0; s < w.size(); ++s)
        if (g.on_boundary(s))
            require(std::abs(w[s]) <= tol, ErrorCategory::DomainViolation,
                    "spectral norm: field must vanish on boundary nodes");
    const auto coeff = sine_coefficients(w);
    const int modes = g.n_x() - 2;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double acc = 0.0;
    for (std::size_t idx = 0; idx < coeff.size(); ++idx) {
        double k1 = static_cast<double>(idx % modes + 1);
        double k2 = g.dim() == 2 ? static_cast<double>(idx / modes + 1) : 0.0;
        double weight = std::pow(1.0 + pi2 * (k1 * k1 + k2 * k2), exponent);
        acc += weight * coeff[idx] * coeff[idx];
    }
    return std::sqrt(acc);
}

double norm_dual_h2(const SpatialField& w) { return spectral_norm(w, -2.0); }

// -- serialization ----------------------------------------------------------

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p.replace_extension(".json");
    return p;
}

namespace {

void write_le_double(std::ostream& os, double v) {
    unsigned char bytes[8];
    std::memcpy(bytes, &v, 8);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + 8);
    os.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le_double(std::istream& is) {
    unsigned char bytes[8];
    is.read(reinterpret_cast<char*>(bytes), 8);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + 8);
    double v;
    std::memcpy(&v, bytes, 8);
    return v;
}

}  // namespace

void save_field(const std::filesystem::path& path, const SpaceTimeField& u, FieldFormat format) {
    json header = to_json(u.grid());
    header["format"] = format == FieldFormat::Csv ? "csv" : "binary";
    header["byte_order"] = "little-endian";
    header["layout"] = "index = k*n_space + i + n_x*j (time level k, spatial node (i, j))";
    header["count"] = u.size();
    {
        std::ofstream hs(sidecar_path(path));
        require(static_cast<bool>(hs), ErrorCategory::Io, "cannot write " + sidecar_path(path).string());
        hs << header.dump(2) << '\n';
    }
    if (format == FieldFormat::Csv) {
        std::ofstream os(path);
        require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
        os << "u\n";
        char buf[40];
        for (double v : u.values()) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            os << buf;
        }
    } else {
        std::ofstream os(path, std::ios::binary);
        require(static_cast<bool>(os), ErrorCategory::Io, "cannot write " + path.string());
        for (double v : u.values()) write_le_double(os, v);
    }
}

SpaceTimeField load_field(const std::filesystem::path& path) {
    std::ifstream hs(sidecar_path(path));
    require(static_cast<bool>(hs), ErrorCategory::Io, "cannot read " + sidecar_path(path).string());
    json header;
    try {
        hs >> header;
    } catch (const json::exception& e) {
        fail(ErrorCategory::Schema, std::string("field header: ") + e.what());
    }
    Grid g = grid_from_json(header);
    std::string format = header.value("format", "");
    std::vector<double> values;
    values.reserve(g.n_spacetime());
    if (format == "csv") {
        std::ifstream is(path);
        require(static_cast<bool>(is), ErrorCategory::Io, "cannot read " + path.string());
        std::string line;
        std::getline(is, line);
        require(line == "u", ErrorCategory::Schema, "field csv: expected header 'u'");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            try {
                std::size_t used = 0;
                values.push_back(std::stod(line, &used));
                require(used == line.size(), ErrorCategory::Schema, "field csv: trailing characters");
            } catch (const std::logic_error&) {
                fail(ErrorCategory::Schema, "field csv: unparsable value '" + line + "'");
            }
        }
    } else if (format == "binary") {
        std::ifstream is(path, std::ios::binary);
        require(static_cast<bool>(is), ErrorCategory::Io, "cannot read " + path.string());
        for (std::size_t i = 0; i < g.n_spacetime(); ++i) {
            double v = read_le_double(is);
            require(static_cast<bool>(is), ErrorCategory::Schema, "field binary: truncated payload");
            values.push_back(v);
        }
        is.peek();
        require(is.eof(), ErrorCategory::Schema, "field binary: trailing bytes");
    } else {
        fail(ErrorCategory::Schema, "field header: unknown format '" + format + "'");
    }
    require(values.size() == g.n_spacetime(), ErrorCategory::Schema, "field: value count does not match header");
    return SpaceTimeField(g, std::move(values));
}

}  // namespace heatinv
