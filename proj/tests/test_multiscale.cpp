#include "doctest.h"

#include <cmath>

#include "parhom/multiscale.hpp"
#include "parhom/rng.hpp"

using namespace parhom;
using namespace parhom::multiscale;
using corrector::EffectiveLaw;
using env::CoefficientField;
using env::EnvKind;
using env::EnvParams;

namespace {

CoefficientField identity_field(int d = 1) {
    EnvParams p;
    p.kind = EnvKind::Identity;
    p.d = d;
    return CoefficientField::build(p);
}

CoefficientField periodic14_field() {
    EnvParams p;
    p.kind = EnvKind::ScalarLinear;
    p.d = 1;
    p.c_min = 1.0;
    p.c_max = 4.0;
    return CoefficientField::build(p);
}

EffectiveLaw linear_law(double slope) {
    std::vector<VecN> vals;
    std::vector<double> axis{-4, -2, -1, 0, 1, 2, 4};
    for (double a : axis) {
        VecN v(1);
        v[0] = slope * a;
        vals.push_back(v);
    }
    return EffectiveLaw::from_table({axis}, vals);
}

double eigenmode_decay_error(const SolveReport& rep, const GridSpec& g, double rate, double T) {
    const double decay = std::exp(-rate * T);
    auto last = rep.trajectory.slice(rep.trajectory.steps - 1, 0);
    double max_err = 0;
    for (int i = 0; i < g.n(); ++i) {
        const double expect = decay * std::sin(2 * M_PI * g.coord(i) / g.side());
        max_err = std::max(max_err, std::abs(last[static_cast<std::size_t>(i)] - expect));
    }
    return max_err;
}

}  // namespace

TEST_CASE("identity-field parabolic solve matches the heat eigenmode oracle") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 64;
    geom.dt = 1e-4;
    geom.T = 1.0;
    const GridSpec g = geom.grid();
    auto f = identity_field();
    auto u0 = sample_initial(g, [&](const double* x) { return std::sin(2 * M_PI * x[0] / g.side()); });
    auto rep = solve_oscillatory(f, 1.0, u0, {}, geom, 1e-11);
    const double rate = std::pow(2 * M_PI / g.side(), 2);
    CHECK(eigenmode_decay_error(rep, g, rate, geom.T) <= 1e-3);
}

TEST_CASE("zero data and zero forcing stay zero") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 16;
    geom.dt = 1e-3;
    geom.T = 0.1;
    auto f = periodic14_field();
    std::vector<double> u0(static_cast<std::size_t>(geom.grid().points()), 0.0);
    auto rep = solve_oscillatory(f, 0.5, u0, {}, geom, 1e-12);
    for (double v : rep.trajectory.values) CHECK(v == 0.0);
}

TEST_CASE("homogenized solve with a linear law decays at the effective rate") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 64;
    geom.dt = 1e-4;
    geom.T = 0.5;
    const GridSpec g = geom.grid();
    auto law = linear_law(1.6);
    auto u0 = sample_initial(g, [&](const double* x) { return std::sin(2 * M_PI * x[0] / g.side()); });
    auto rep = solve_homogenized(law, u0, {}, geom, 1e-11);
    const double rate = 1.6 * std::pow(2 * M_PI / g.side(), 2);
    CHECK(eigenmode_decay_error(rep, g, rate, geom.T) <= 1e-3);
}

TEST_CASE("constant forcing moves the spatial mean exactly") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 32;
    geom.dt = 1e-3;
    geom.T = 0.1;
    auto law = linear_law(1.0);
    std::vector<double> u0(static_cast<std::size_t>(geom.grid().points()), 0.0);
    auto rep = solve_homogenized(law, u0, [](const double*, double) { return 1.0; }, geom, 1e-12);
    auto last = rep.trajectory.slice(rep.trajectory.steps - 1, 0);
    double mean = 0;
    for (double v : last) mean += v;
    mean /= static_cast<double>(last.size());
    CHECK(mean == doctest::Approx(0.1).epsilon(1e-10));
}

TEST_CASE("weighted error: oracle sum, theta->0 limit, symmetry, mesh guard") {
    GridSpec g{1, 4, 16};
    GridFunction u(g, 1, 3, "u"), v(g, 1, 3, "v");
    u.dt = v.dt = 0.5;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        u.values[i] = 1.0 + 0.1 * std::sin(0.2 * static_cast<double>(i));
        v.values[i] = u.values[i] - 1.0;  // difference identically 1
    }
    SUBCASE("u = v gives zero") {
        auto r = weighted_error(u, u, 1.0);
        for (double e : r.per_time) CHECK(e == 0.0);
        CHECK(r.integrated == 0.0);
    }
    SUBCASE("difference 1 equals the direct weight sum") {
        auto r = weighted_error(u, v, 1.0);
        double direct = 0;
        for (std::int64_t i = 0; i < g.points(); ++i) direct += weight_value(g, i, 1.0) * g.h();
        for (double e : r.per_time) CHECK(e == doctest::Approx(std::sqrt(direct)).epsilon(1e-12));
    }
    SUBCASE("theta -> 0 recovers the unweighted norm") {
        auto r = weighted_error(u, v, 1e-3);
        // unweighted L2 over the length-4 torus of the constant 1 is sqrt(4)
        CHECK(r.per_time[0] == doctest::Approx(2.0).epsilon(0.01));
    }
    SUBCASE("symmetry") {
        auto a = weighted_error(u, v, 0.7);
        auto b = weighted_error(v, u, 0.7);
        CHECK(a.integrated == b.integrated);
    }
    SUBCASE("mesh mismatch rejected") {
        GridFunction w2(GridSpec{1, 4, 8}, 1, 3, "w");
        CHECK_THROWS_AS((void)weighted_error(u, w2, 1.0), std::invalid_argument);
    }
}

TEST_CASE("comparison principle for the implicit monotone scheme") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 16;
    geom.dt = 1.0 / 512;
    geom.T = 0.25;
    auto f = periodic14_field();
    const GridSpec g = geom.grid();
    std::vector<double> u0(static_cast<std::size_t>(g.points())), v0(u0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) {
        u0[i] = rng::u01(rng::key(41, i)) - 0.5;
        v0[i] = u0[i] + 0.2 + 0.3 * rng::u01(rng::key(42, i));  // v0 >= u0
    }
    auto fn = [](const double* x, double) { return 0.1 * std::cos(x[0]); };
    auto ru = solve_oscillatory(f, 0.5, u0, fn, geom, 1e-12);
    auto rv = solve_oscillatory(f, 0.5, v0, fn, geom, 1e-12);
    auto lu = ru.trajectory.slice(ru.trajectory.steps - 1, 0);
    auto lv = rv.trajectory.slice(rv.trajectory.steps - 1, 0);
    for (std::size_t i = 0; i < lu.size(); ++i) CHECK(lu[i] <= lv[i] + 1e-9);
}

TEST_CASE("unweighted L2 norm is non-increasing without forcing") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 16;
    geom.dt = 1.0 / 512;
    geom.T = 0.25;
    auto f = periodic14_field();
    const GridSpec g = geom.grid();
    std::vector<double> u0(static_cast<std::size_t>(g.points()));
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = rng::u01(rng::key(43, i)) - 0.5;
    auto rep = solve_oscillatory(f, 0.5, u0, {}, geom, 1e-12);
    for (std::size_t i = 1; i < rep.l2_history.size(); ++i)
        CHECK(rep.l2_history[i] <= rep.l2_history[i - 1] * (1 + 1e-12));
}

TEST_CASE("observed order in dt on the eigenmode oracle is at least 0.9") {
    auto run = [](double dt) {
        ParabolicGeometry geom;
        geom.d = 1;
        geom.cells = 4;
        geom.m = 64;
        geom.dt = dt;
        geom.T = 0.5;
        const GridSpec g = geom.grid();
        auto f = identity_field();
        auto u0 = sample_initial(g, [&](const double* x) { return std::sin(2 * M_PI * x[0] / g.side()); });
        auto rep = solve_oscillatory(f, 1.0, u0, {}, geom, 1e-12);
        const double rate = std::pow(2 * M_PI / g.side(), 2);
        return eigenmode_decay_error(rep, g, rate, geom.T);
    };
    const double e1 = run(2e-3), e2 = run(1e-3);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 0.9);
}

TEST_CASE("oscillatory energy functional is finite and stable across epsilon") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 128;
    geom.dt = 1.0 / 2048;
    geom.T = 0.125;
    EnvParams ep;
    ep.kind = EnvKind::ScalarLinear;
    ep.d = 1;
    ep.c_min = 1;
    ep.c_max = 4;
    ep.spatial = env::SpatialStructure::RandomCheckerboard;
    ep.seed = 4;
    auto field = CoefficientField::build(ep);
    const GridSpec g = geom.grid();
    auto u0 = sample_initial(g, [&](const double* x) { return std::sin(2 * M_PI * x[0] / g.side()); });
    std::vector<double> energies;
    for (double eps : {0.25, 0.125, 0.0625}) {
        auto rep = solve_oscillatory(field, eps, u0, [](const double*, double) { return 0.2; },
                                     geom, 1e-10);
        energies.push_back(weighted_energy_functional(rep.trajectory, 1.0));
    }
    for (double e : energies) CHECK(std::isfinite(e));
    const auto [lo, hi] = std::minmax_element(energies.begin(), energies.end());
    CHECK(*hi <= 1.5 * *lo);  // stable within +-50%
}

TEST_CASE("identity study: error is pure scheme error, flat and small") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 32;
    geom.dt = 1.0 / 1024;
    geom.T = 0.125;
    EnvParams ep;
    ep.kind = EnvKind::Identity;
    ep.d = 1;
    auto law = linear_law(1.0);
    const double ladder[2] = {0.25, 0.125};
    auto study = convergence_study(ep, law, ladder, 2, 10, geom,
                                   [&](const double* x) { return std::sin(2 * M_PI * x[0] / 4.0); },
                                   {}, 1.0, 1e-11, 1);
    for (const auto& e : study.errors) CHECK(e.mean <= 1e-3);
}

TEST_CASE("setup guards: dt vs epsilon^2, cell resolution, uncertified law") {
    ParabolicGeometry geom;
    geom.d = 1;
    geom.cells = 4;
    geom.m = 64;
    geom.dt = 1.0 / 128;  // too coarse for eps = 1/8
    geom.T = 0.1;
    auto f = periodic14_field();
    std::vector<double> u0(static_cast<std::size_t>(geom.grid().points()), 0.0);
    CHECK_THROWS_AS((void)solve_oscillatory(f, 0.125, u0, {}, geom, 1e-10), std::invalid_argument);

    geom.dt = 1.0 / 4096;
    geom.m = 16;  // only 2 points per eps-cell
    std::vector<double> u0b(static_cast<std::size_t>(geom.grid().points()), 0.0);
    CHECK_THROWS_AS((void)solve_oscillatory(f, 0.125, u0b, {}, geom, 1e-10), std::invalid_argument);

    // a non-monotone table must be refused
    std::vector<VecN> bad;
    for (double a : {-1.0, 0.0, 1.0}) {
        VecN v(1);
        v[0] = -a;
        bad.push_back(v);
    }
    auto bad_law = EffectiveLaw::from_table({{-1.0, 0.0, 1.0}}, bad);
    CHECK(!bad_law.certificates.pass);
    geom.m = 64;
    std::vector<double> u0c(static_cast<std::size_t>(geom.grid().points()), 0.0);
    CHECK_THROWS_AS((void)solve_homogenized(bad_law, u0c, {}, geom, 1e-10), std::invalid_argument);
}
