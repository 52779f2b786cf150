#include "doctest.h"

#include <cmath>

#include "parhom/corrector.hpp"
#include "parhom/rng.hpp"
#include "parhom/stats.hpp"

using namespace parhom;
using namespace parhom::corrector;
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

CoefficientField periodic14_field(int d = 1) {
    EnvParams p;
    p.kind = EnvKind::ScalarLinear;
    p.d = d;
    p.c_min = 1.0;
    p.c_max = 4.0;
    return CoefficientField::build(p);
}

CoefficientField random_checkerboard_field(int d, env::TemporalStructure temporal,
                                           std::uint64_t seed = 21, double mu = 1.0) {
    EnvParams p;
    p.kind = EnvKind::ScalarLinear;
    p.d = d;
    p.c_min = 1.0;
    p.c_max = 4.0;
    p.spatial = env::SpatialStructure::RandomCheckerboard;
    p.temporal = temporal;
    p.mu = mu;
    p.seed = seed;
    return CoefficientField::build(p);
}

CellGeometry static_cell(int d, int cells, int m) {
    CellGeometry g;
    g.d = d;
    g.cells = cells;
    g.m = m;
    return g;
}

}  // namespace

TEST_CASE("discrete gradient and divergence are exact adjoints") {
    for (int d = 1; d <= 3; ++d) {
        GridSpec g{d, 3, 4};
        const std::int64_t np = g.points();
        std::vector<double> u(static_cast<std::size_t>(np)), v(static_cast<std::size_t>(np));
        std::vector<double> F(static_cast<std::size_t>(np * d));
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = rng::u01(rng::key(1, d, i)) - 0.5;
            v[i] = rng::u01(rng::key(2, d, i)) - 0.5;
        }
        for (std::size_t i = 0; i < F.size(); ++i) F[i] = rng::u01(rng::key(3, d, i)) - 0.5;
        std::vector<double> divF(static_cast<std::size_t>(np)), gradv(static_cast<std::size_t>(np * d));
        cell_divergence(g, F, divF);
        cell_gradient(g, v, gradv);
        double lhs = 0, rhs = 0, scale = 0;
        for (std::int64_t i = 0; i < np; ++i) lhs += divF[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
        for (std::int64_t i = 0; i < np * d; ++i) rhs += F[static_cast<std::size_t>(i)] * gradv[static_cast<std::size_t>(i)];
        for (std::int64_t i = 0; i < np; ++i) scale += std::abs(divF[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)]);
        CHECK(std::abs(lhs + rhs) <= 1e-12 * std::max(1.0, scale));
    }
}

TEST_CASE("identity environment has an identically zero corrector") {
    auto f = identity_field(2);
    VecN p(2);
    p[0] = 1.3;
    p[1] = -0.4;
    auto sol = solve_regularized_cell(f, p, 1e-3, static_cell(2, 4, 8));
    CHECK(sol.iterations == 0);
    CHECK(sol.residual_dual_norm == 0.0);
    for (double v : sol.chi.values) CHECK(v == 0.0);
    CHECK(sol.mean_flux[0] == doctest::Approx(p[0]).epsilon(1e-11));
    CHECK(sol.mean_flux[1] == doctest::Approx(p[1]).epsilon(1e-11));
}

TEST_CASE("1d two-phase cell problem reproduces the harmonic-mean corrector") {
    // flux constancy forces p + Dchi = C/c(y) with <Dchi> = 0, so C = 1.6 for
    // c alternating {1,4} and p = 1; Dchi = +0.6 on the c=1 half, -0.6 on c=4.
    auto f = periodic14_field();
    VecN p(1);
    p[0] = 1.0;
    CellGeometry geom = static_cell(1, 8, 64);
    auto sol = solve_regularized_cell(f, p, 1e-4, geom, {1e-10, 50000, 4});

    const GridSpec g = geom.grid();
    double max_err = 0;
    for (int i = 0; i < g.n(); ++i) {
        const double y = (i + 0.5) * g.h();  // gradient lives on the forward edge
        const double frac = y - std::floor(y);
        const double expect = frac < 0.5 ? 0.6 : -0.6;
        max_err = std::max(max_err, std::abs(sol.grad_chi.at(0, 0, i) - expect));
    }
    CHECK(max_err <= 1e-2);
    CHECK(sol.mean_flux[0] == doctest::Approx(1.6).epsilon(1e-3));
    // flux is the constant 1.6 across the cell
    double flux_min = 1e300, flux_max = -1e300;
    for (int i = 0; i < g.n(); ++i) {
        flux_min = std::min(flux_min, sol.flux.at(0, 0, i));
        flux_max = std::max(flux_max, sol.flux.at(0, 0, i));
    }
    CHECK(flux_max - flux_min <= 2e-2);

    // gradient has exact zero cell mean
    double gmean = 0;
    for (int i = 0; i < g.n(); ++i) gmean += sol.grad_chi.at(0, 0, i);
    CHECK(std::abs(gmean / g.n()) <= 1e-12);
}

TEST_CASE("solver contraction functional decreases every iteration") {
    auto f = periodic14_field();
    VecN p(1);
    p[0] = 2.0;
    auto sol = solve_regularized_cell(f, p, 1e-3, static_cell(1, 4, 32));
    REQUIRE(sol.iteration_energy.size() > 3);
    for (std::size_t i = 1; i < sol.iteration_energy.size(); ++i)
        CHECK(sol.iteration_energy[i] <= sol.iteration_energy[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("lambda-stability: ladder energies stay bounded") {
    auto f = random_checkerboard_field(1, env::TemporalStructure::Static);
    VecN p(1);
    p[0] = 1.0;
    std::vector<double> energies;
    for (double lam : {1e-1, 1e-2, 1e-3, 1e-4}) {
        auto sol = solve_regularized_cell(f, p, lam, static_cell(1, 8, 16));
        energies.push_back(sol.lambda_energy);
    }
    const auto [lo, hi] = std::minmax_element(energies.begin(), energies.end());
    CHECK(*hi / std::max(*lo, 1e-30) <= 10.0);
}

TEST_CASE("effective estimates: identity, harmonic mean, and constant-in-space laws") {
    const std::vector<double> lambdas{1e-2, 1e-3, 1e-4};
    const std::vector<int> cells{4, 8};

    SUBCASE("identity") {
        auto f = identity_field(2);
        VecN p(2);
        p[0] = 1.0;
        auto est = estimate_effective(f, p, lambdas, cells, 8);
        CHECK(est.abar[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(est.abar[1] == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(est.error_estimate <= 1e-10);
    }
    SUBCASE("two-phase harmonic mean 1.6 p") {
        auto f = periodic14_field();
        for (double pv : {-2.0, -1.0, 1.0, 2.0}) {
            VecN p(1);
            p[0] = pv;
            auto est = estimate_effective(f, p, lambdas, cells, 32);
            CHECK(est.abar[0] == doctest::Approx(1.6 * pv).epsilon(0.01));
        }
    }
    SUBCASE("spatially constant monotone gradient: corrector vanishes") {
        EnvParams ep;
        ep.kind = EnvKind::MonotoneGradient;
        ep.d = 1;
        ep.c_min = ep.c_max = 2.0;
        ep.delta = 0.1;
        auto f = CoefficientField::build(ep);
        for (double pv : {-1.5, 0.5, 2.0}) {
            VecN p(1);
            p[0] = pv;
            auto est = estimate_effective(f, p, lambdas, cells, 8);
            const double expect = 2.0 * pv + 0.1 * pv / std::sqrt(1.0 + pv * pv);
            CHECK(est.abar[0] == doctest::Approx(expect).epsilon(1e-8));
        }
    }
}

TEST_CASE("flux orthogonality vanishes in the cell limit") {
    SUBCASE("identity is exactly zero") {
        auto sol = solve_regularized_cell(identity_field(), VecN::axis(1, 0), 1e-3,
                                          static_cell(1, 4, 16));
        CHECK(flux_orthogonality(sol) == 0.0);
    }
    SUBCASE("two-phase cell value small at lambda 1e-4, L = 8") {
        auto f = periodic14_field();
        auto sol = solve_regularized_cell(f, VecN::axis(1, 0), 1e-4, static_cell(1, 8, 64));
        CHECK(std::abs(flux_orthogonality(sol)) <= 0.05);
    }
    SUBCASE("trend improves along a 3-step ladder") {
        auto f = random_checkerboard_field(1, env::TemporalStructure::Static, 5);
        double prev = 1e300;
        const double lams[3] = {1e-2, 1e-3, 1e-4};
        const int Ls[3] = {4, 8, 16};
        for (int k = 0; k < 3; ++k) {
            auto sol = solve_regularized_cell(f, VecN::axis(1, 0), lams[k],
                                              static_cell(1, Ls[k], 16));
            const double v = std::abs(flux_orthogonality(sol));
            CHECK(v <= prev * 1.05);
            prev = v;
        }
    }
}

TEST_CASE("sublinearity diagnostic scalings") {
    const std::vector<double> ladder{4, 8, 16};
    SUBCASE("identity: exactly zero") {
        auto rows = sublinearity_diagnostic(identity_field(), VecN::axis(1, 0), ladder, 1e-3,
                                            static_cell(1, 32, 8));
        for (const auto& r : rows) {
            CHECK(r.spacetime == 0.0);
            CHECK(r.timezero == 0.0);
        }
    }
    SUBCASE("periodic two-phase: bounded corrector gives slope -2") {
        auto rows = sublinearity_diagnostic(periodic14_field(), VecN::axis(1, 0), ladder, 1e-4,
                                            static_cell(1, 32, 16));
        std::vector<double> xs, ys;
        for (const auto& r : rows) {
            xs.push_back(r.R);
            ys.push_back(r.spacetime);
        }
        auto fit = stats::fit_loglog(xs, ys);
        CHECK(fit.slope == doctest::Approx(-2.0).epsilon(0.15));
    }
    SUBCASE("random checkerboard: strictly decreasing") {
        auto f = random_checkerboard_field(1, env::TemporalStructure::Static, 21);
        auto rows = sublinearity_diagnostic(f, VecN::axis(1, 0), ladder, 1e-4,
                                            static_cell(1, 32, 16));
        CHECK(rows[1].spacetime < rows[0].spacetime);
        CHECK(rows[2].spacetime < rows[1].spacetime);
    }
}

TEST_CASE("effective law: table, certificates, interpolation, serialization") {
    const std::vector<double> lambdas{1e-2, 1e-3};
    const std::vector<int> cells{4, 8};
    SUBCASE("identity law") {
        auto law = build_effective_law(identity_field(), {{-1.0, 1.0}}, lambdas, cells, 8);
        CHECK(law.certificates.pass);
        CHECK(law.certificates.lipschitz_max == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(law.certificates.monotone_min == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("two-phase law is within 1 percent of 1.6 p and monotone") {
        auto law = build_effective_law(periodic14_field(), {{-2.0, -1.0, 1.0, 2.0}}, lambdas,
                                       cells, 32);
        CHECK(law.certificates.pass);
        CHECK(law.certificates.monotone_min >= -1e-8);
        CHECK(law.certificates.lipschitz_max == doctest::Approx(1.6).epsilon(0.01));
        CHECK(law.certificates.monotone_min == doctest::Approx(1.6).epsilon(0.01));

        bool outside = false;
        VecN q(1);
        q[0] = 1.5;
        CHECK(law.eval(q, &outside)[0] == doctest::Approx(1.6 * 1.5).epsilon(0.01));
        CHECK(!outside);
        q[0] = 3.0;  // outside the hull: linear extrapolation plus a warning
        CHECK(law.eval(q, &outside)[0] == doctest::Approx(1.6 * 3.0).epsilon(0.01));
        CHECK(outside);

        auto text = law.to_json_string();
        auto back = EffectiveLaw::from_json_string(text);
        CHECK(back.d == law.d);
        REQUIRE(back.values.size() == law.values.size());
        for (std::size_t i = 0; i < law.values.size(); ++i)
            CHECK(back.values[i][0] == law.values[i][0]);
        CHECK(back.certificates.pass == law.certificates.pass);
    }
    SUBCASE("multilinear interpolation in d = 2") {
        // synthetic affine table: abar(p) = (2 p0 + p1, p0 + 3 p1)
        std::vector<std::vector<double>> axes{{-1, 0, 1}, {-1, 0, 1}};
        std::vector<VecN> vals;
        for (double a0 : axes[0])
            for (double a1 : axes[1]) {
                VecN v(2);
                v[0] = 2 * a0 + a1;
                v[1] = a0 + 3 * a1;
                vals.push_back(v);
            }
        auto law = EffectiveLaw::from_table(axes, vals);
        CHECK(law.certificates.pass);
        VecN q(2);
        q[0] = 0.3;
        q[1] = -0.6;
        auto v = law.eval(q);
        CHECK(v[0] == doctest::Approx(2 * 0.3 - 0.6).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(0.3 - 3 * 0.6).epsilon(1e-12));
    }
}

TEST_CASE("frame consistency: effective value is shift invariant") {
    auto f = random_checkerboard_field(1, env::TemporalStructure::Static, 31);
    auto fs = f.shifted({3, 0, 0}, 0.0);
    const std::vector<double> lambdas{1e-3};
    const std::vector<int> cells{8, 16};
    VecN p(1);
    p[0] = 1.0;
    auto e1 = estimate_effective(f, p, lambdas, cells, 16);
    auto e2 = estimate_effective(fs, p, lambdas, cells, 16);
    const double tol = std::max({e1.error_estimate, e2.error_estimate, 1e-6}) * 3 + 0.05;
    CHECK(std::abs(e1.abar[0] - e2.abar[0]) <= tol);
}

TEST_CASE("time-dependent cells solve and average sensibly") {
    auto f = random_checkerboard_field(1, env::TemporalStructure::RenewalJumps, 13, 1.0);
    CellGeometry geom = static_cell(1, 8, 16);
    geom.time_extent = 8;
    geom.time_slices = 32;
    VecN p(1);
    p[0] = 1.0;
    auto sol = solve_regularized_cell(f, p, 1e-3, geom);
    // between harmonic (≈1.922 for U[1,4]) and arithmetic (2.5) mean of c
    CHECK(sol.mean_flux[0] > 1.0);
    CHECK(sol.mean_flux[0] < 4.0);
    double gmean = 0;
    for (double v : sol.grad_chi.values) gmean += v;
    CHECK(std::abs(gmean / static_cast<double>(sol.grad_chi.values.size())) <= 1e-10);
}

TEST_CASE("weighted zero-boundary box satisfies the energy bound stably") {
    auto f = periodic14_field();
    VecN p(1);
    p[0] = 1.0;
    auto r1 = solve_weighted_box(f, p, 0.1, 8, 8, 32, 0.5, {1e-9, 50000, 4});
    auto r2 = solve_weighted_box(f, p, 0.1, 16, 8, 64, 0.5, {1e-9, 50000, 4});
    CHECK(r1.ratio > 0);
    CHECK(r2.ratio > 0);
    const double ratio = std::max(r1.ratio, r2.ratio) / std::min(r1.ratio, r2.ratio);
    CHECK(ratio < 2.0);
}

TEST_CASE("solver errors carry diagnostics") {
    auto f = periodic14_field();
    VecN p(1);
    p[0] = 1.0;
    CHECK_THROWS_AS((void)solve_regularized_cell(f, p, 1e-4, static_cell(1, 8, 32), {1e-14, 3, 4}),
                    ConvergenceError);
    try {
        (void)solve_regularized_cell(f, p, 1e-4, static_cell(1, 8, 32), {1e-14, 3, 4});
    } catch (const ConvergenceError& e) {
        CHECK(e.residual > 0);
    }
    CHECK_THROWS_AS((void)solve_regularized_cell(f, p, 0.0, static_cell(1, 4, 8)),
                    std::invalid_argument);
}
