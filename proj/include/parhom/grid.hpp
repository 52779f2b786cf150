#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace parhom {

// Periodic lattice on a torus of `cells` unit cells per axis with `m` grid
// points per cell; spacing h = 1/m so unit-cell structure is grid-aligned.
struct GridSpec {
    int d = 1;
    int cells = 4;
    int m = 16;

    int n() const { return cells * m; }
    double h() const { return 1.0 / m; }
    double side() const { return static_cast<double>(cells); }
    std::int64_t points() const {
        std::int64_t p = 1;
        for (int i = 0; i < d; ++i) p *= n();
        return p;
    }
    double site_volume() const {
        double v = 1.0;
        for (int i = 0; i < d; ++i) v *= h();
        return v;
    }

    int wrap(long i) const {
        const int nn = n();
        long r = i % nn;
        return static_cast<int>(r < 0 ? r + nn : r);
    }
    // Flat index, row-major with the last axis fastest.
    std::int64_t flat(const int* idx) const {
        std::int64_t f = 0;
        for (int a = 0; a < d; ++a) f = f * n() + idx[a];
        return f;
    }
    void unflat(std::int64_t f, int* idx) const {
        for (int a = d - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(f % n());
            f /= n();
        }
    }
    // Coordinate of grid point along one axis.
    double coord(int i) const { return i * h(); }
    // Signed coordinate about the torus origin, in [-side/2, side/2).
    double signed_coord(double x) const {
        const double L = side();
        double s = x - L * std::floor(x / L + 0.5);
        return s;
    }
    bool operator==(const GridSpec& o) const { return d == o.d && cells == o.cells && m == o.m; }
};

// Values of a scalar or vector quantity on the grid, optionally over a set of
// stored time slices.  Layout: [step][component][site], row-major sites.
struct GridFunction {
    GridSpec grid;
    int components = 1;
    std::int64_t steps = 1;
    double dt = 0.0;  // slice spacing; 0 for a single snapshot
    double t0 = 0.0;
    std::string tag;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(GridSpec g, int comps, std::int64_t nsteps, std::string quantity = {})
        : grid(g), components(comps), steps(nsteps), tag(std::move(quantity)),
          values(static_cast<std::size_t>(nsteps) * comps * g.points(), 0.0) {}

    std::int64_t sites() const { return grid.points(); }
    std::span<double> slice(std::int64_t step, int comp) {
        const std::int64_t np = sites();
        return {values.data() + (step * components + comp) * np, static_cast<std::size_t>(np)};
    }
    std::span<const double> slice(std::int64_t step, int comp) const {
        const std::int64_t np = sites();
        return {values.data() + (step * components + comp) * np, static_cast<std::size_t>(np)};
    }
    double& at(std::int64_t step, int comp, std::int64_t site) {
        return values[static_cast<std::size_t>((step * components + comp) * sites() + site)];
    }
    double at(std::int64_t step, int comp, std::int64_t site) const {
        return values[static_cast<std::size_t>((step * components + comp) * sites() + site)];
    }
    bool same_mesh(const GridFunction& o) const {
        return grid == o.grid && components == o.components && steps == o.steps && dt == o.dt;
    }
};

// Self-describing binary layout; round-trips bit-exactly.
void write_grid_function(const std::filesystem::path& path, const GridFunction& gf);
GridFunction read_grid_function(const std::filesystem::path& path);

}  // namespace parhom
