#include "doctest.h"

#include <cmath>

#include "parhom/fslattice.hpp"
#include "parhom/rng.hpp"
#include "parhom/stats.hpp"

using namespace parhom;
using namespace parhom::fslattice;

namespace {

// naive DFT evolution of the free lattice heights: independent oracle
std::vector<double> lattice_heat_oracle(const std::vector<double>& phi0, double t) {
    const int N = static_cast<int>(phi0.size());
    std::vector<double> out(phi0.size(), 0.0);
    for (int q = 0; q < N; ++q) {
        double re = 0, im = 0;
        for (int x = 0; x < N; ++x) {
            const double ang = 2 * M_PI * q * x / N;
            re += phi0[static_cast<std::size_t>(x)] * std::cos(ang);
            im -= phi0[static_cast<std::size_t>(x)] * std::sin(ang);
        }
        const double mu = 2.0 - 2.0 * std::cos(2 * M_PI * q / N);
        const double decay = std::exp(-mu * t);
        for (int x = 0; x < N; ++x) {
            const double ang = 2 * M_PI * q * x / N;
            out[static_cast<std::size_t>(x)] += (re * std::cos(ang) - im * std::sin(ang)) * decay / N;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("noise-free quadratic dynamics follow the discrete heat evolution") {
    const int N = 32;
    LatticeOptions opt;
    opt.N = N;
    opt.d = 1;
    opt.dt = 1e-4;
    opt.T = 1.0;
    opt.noise_amp = 0.0;
    std::vector<double> phi(static_cast<std::size_t>(N), 0.0);
    phi[0] = 1.0;
    auto oracle = lattice_heat_oracle(phi, opt.T);
    simulate_lattice(opt, phi);
    double max_err = 0;
    for (int x = 0; x < N; ++x)
        max_err = std::max(max_err, std::abs(phi[static_cast<std::size_t>(x)] - oracle[static_cast<std::size_t>(x)]));
    CHECK(max_err <= 1e-3);
}

TEST_CASE("flat interfaces are stationary without noise") {
    LatticeOptions opt;
    opt.N = 16;
    opt.d = 2;
    opt.dt = 1e-3;
    opt.T = 0.2;
    opt.noise_amp = 0.0;
    opt.potential.family = PotentialSpec::Family::QuadPlusTanh;
    opt.potential.beta = 0.5;
    std::vector<double> phi(static_cast<std::size_t>(16 * 16), 3.25);
    simulate_lattice(opt, phi);
    for (double v : phi) CHECK(v == 3.25);
}

TEST_CASE("spatial mean performs a driftless brownian motion") {
    const int N = 16;
    const double T = 0.5;
    const int reps = 200;
    std::vector<double> means(reps);
    for (int r = 0; r < reps; ++r) {
        LatticeOptions opt;
        opt.N = N;
        opt.d = 1;
        opt.dt = 1.0 / 512;
        opt.T = T;
        opt.seed = 500 + static_cast<std::uint64_t>(r);
        std::vector<double> phi(static_cast<std::size_t>(N), 0.0);
        simulate_lattice(opt, phi);
        double m = 0;
        for (double v : phi) m += v;
        means[static_cast<std::size_t>(r)] = m / N;
    }
    auto ms = stats::mean_stderr(means);
    double var = 0;
    for (double m : means) var += (m - ms.mean) * (m - ms.mean);
    var /= (reps - 1);
    const double expected = 2.0 * T / N;
    // 3 sigma for a chi^2 variance estimator
    CHECK(std::abs(var - expected) <= 3.0 * expected * std::sqrt(2.0 / (reps - 1)));
    CHECK(std::abs(ms.mean) <= 3.0 * std::sqrt(expected / reps) + 1e-12);
}

TEST_CASE("drift is an exact discrete divergence and matches the laplacian when quadratic") {
    for (int d = 1; d <= 2; ++d) {
        const GridSpec g = lattice_grid(d, 8);
        std::vector<double> phi(static_cast<std::size_t>(g.points()));
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = 2.0 * rng::u01(rng::key(7, d, i)) - 1.0;
        std::vector<double> drift(phi.size());
        PotentialSpec tanh_pot{PotentialSpec::Family::QuadPlusTanh, 0.7};
        lattice_drift(tanh_pot, g, phi, drift);
        double total = 0, scale = 0;
        for (double v : drift) {
            total += v;
            scale += std::abs(v);
        }
        CHECK(std::abs(total) <= 1e-12 * std::max(1.0, scale));

        // quadratic potential: drift equals the lattice Laplacian
        PotentialSpec quad;
        lattice_drift(quad, g, phi, drift);
        for (std::int64_t x = 0; x < g.points(); ++x) {
            double lap = -2.0 * d * phi[static_cast<std::size_t>(x)];
            for (int a = 0; a < d; ++a) {
                // neighbors via the same wrap the drift uses
                int idx[3] = {0, 0, 0};
                std::int64_t rem = x;
                for (int b = d - 1; b >= 0; --b) {
                    idx[b] = static_cast<int>(rem % g.n());
                    rem /= g.n();
                }
                int up[3] = {idx[0], idx[1], idx[2]}, dn[3] = {idx[0], idx[1], idx[2]};
                up[a] = (idx[a] + 1) % g.n();
                dn[a] = (idx[a] + g.n() - 1) % g.n();
                lap += phi[static_cast<std::size_t>(g.flat(up))] + phi[static_cast<std::size_t>(g.flat(dn))];
            }
            CHECK(drift[static_cast<std::size_t>(x)] == doctest::Approx(lap).epsilon(1e-13));
        }
    }
}

TEST_CASE("gradient dynamics are shift covariant bit-exactly") {
    const int N = 16, k = 5;
    LatticeOptions base;
    base.N = N;
    base.d = 1;
    base.dt = 1e-3;
    base.T = 0.05;
    base.seed = 77;
    std::vector<double> phi0(static_cast<std::size_t>(N));
    for (int x = 0; x < N; ++x) phi0[static_cast<std::size_t>(x)] = std::sin(0.7 * x) + 0.3 * x * (N - x) / 64.0;

    std::vector<double> a = phi0;
    simulate_lattice(base, a);

    LatticeOptions shifted = base;
    shifted.site_offset = {-k, 0, 0};
    std::vector<double> b(static_cast<std::size_t>(N));
    for (int x = 0; x < N; ++x) b[static_cast<std::size_t>(x)] = phi0[static_cast<std::size_t>((x - k + N) % N)];
    simulate_lattice(shifted, b);

    for (int x = 0; x < N; ++x)
        CHECK(b[static_cast<std::size_t>((x + k) % N)] == a[static_cast<std::size_t>(x)]);
}

TEST_CASE("rescaling embeds heights on the unit torus") {
    const int N = 8;
    GridFunction traj(lattice_grid(1, N), 1, 2, "Phi");
    traj.dt = 64.0;  // lattice time per slice
    SUBCASE("constants map to eps * c") {
        for (auto& v : traj.values) v = 3.0;
        auto r = rescale_field(traj, 1.0 / N);
        CHECK(r.grid.n() == N);
        CHECK(r.dt == doctest::Approx(64.0 / (N * N)));
        for (double v : r.values) CHECK(v == doctest::Approx(3.0 / N));
    }
    SUBCASE("linear profiles are exact at cell centers") {
        for (int s = 0; s < 2; ++s)
            for (int x = 0; x < N; ++x) traj.at(s, 0, x) = static_cast<double>(x);
        auto r = rescale_field(traj, 1.0 / N);
        for (int x = 0; x < N; ++x) {
            const double rr = static_cast<double>(x) / N;
            CHECK(std::abs(r.at(0, 0, x) - rr) <= 1.0 / N);
            CHECK(r.at(0, 0, x) == doctest::Approx(rr).epsilon(1e-12));
        }
    }
    SUBCASE("epsilon must match the lattice") {
        CHECK_THROWS_AS((void)rescale_field(traj, 0.3), std::invalid_argument);
    }
}

TEST_CASE("rescaled quadratic heights approach the heat solution") {
    const int N = 64;
    const double eps = 1.0 / N;
    const double t_phys = 0.025;
    LatticeOptions opt;
    opt.N = N;
    opt.d = 1;
    opt.dt = 0.01;
    opt.T = t_phys / (eps * eps);
    const int reps = 12;
    std::vector<double> errs(reps);
    for (int r = 0; r < reps; ++r) {
        opt.seed = 900 + static_cast<std::uint64_t>(r);
        std::vector<double> phi0(static_cast<std::size_t>(N));
        for (int x = 0; x < N; ++x)
            phi0[static_cast<std::size_t>(x)] = std::sin(2 * M_PI * x * eps) / eps +
                                                rng::gaussian(rng::key(31, opt.seed, x));
        auto traj = simulate_lattice_trajectory(opt, phi0, static_cast<int>(std::lround(opt.T / opt.dt)));
        auto resc = rescale_field(traj, eps);
        // continuum limit of the initial profile under the diffusive scaling
        GridFunction limit(resc.grid, 1, resc.steps, "h");
        limit.dt = resc.dt;
        const double decay = std::exp(-4.0 * M_PI * M_PI * t_phys);
        for (int x = 0; x < N; ++x) {
            limit.at(0, 0, x) = std::sin(2 * M_PI * x * eps);
            limit.at(1, 0, x) = decay * std::sin(2 * M_PI * x * eps);
        }
        auto rep = compare_hydrodynamic(resc, limit, 0.0);
        errs[static_cast<std::size_t>(r)] = rep.per_time.back();
    }
    auto m = stats::mean_stderr(errs);
    CHECK(m.mean <= 0.05);
}

TEST_CASE("continuous model: identity base cancels the stochastic layer in the flux") {
    env::EnvParams ep;
    ep.kind = env::EnvKind::ScalarLinear;
    ep.d = 1;
    ep.c_min = ep.c_max = 1.0;
    // a synthetic drift trajectory standing in for the gradient layer
    GridFunction z(GridSpec{1, 4, 8}, 1, 1, "z");
    for (std::size_t i = 0; i < z.values.size(); ++i)
        z.values[i] = std::sin(0.3 * static_cast<double>(i));
    ep.kind = env::EnvKind::ShiftedLinear;
    auto field = env::CoefficientField::build(ep, std::make_shared<env::GridDrift>(z));
    for (int i = 0; i < 1000; ++i) {
        double p = -2 + 4 * rng::u01(rng::key(3, i));
        double y = 4.0 * rng::u01(rng::key(4, i));
        double out = 0;
        field.evaluate(&p, &y, 0.0, &out);
        CHECK(out == doctest::Approx(p).epsilon(1e-14));
    }
}

TEST_CASE("continuous model with no noise degenerates to the oscillatory solve bit-exactly") {
    env::EnvParams ep;
    ep.kind = env::EnvKind::ScalarLinear;
    ep.d = 1;
    ep.c_min = 1.0;
    ep.c_max = 4.0;
    auto calA = env::CoefficientField::build(ep);

    ContinuousModelOptions opt;
    opt.bump = spde::BumpSpec{0.45, 0.0};  // kappa = 0
    opt.epsilon = 0.25;
    opt.geom.d = 1;
    opt.geom.cells = 2;
    opt.geom.m = 32;
    opt.geom.dt = 1.0 / 512;
    opt.geom.T = 0.125;
    opt.tol = 1e-11;
    const GridSpec g = opt.geom.grid();
    auto u0 = multiscale::sample_initial(g, [](const double* x) { return std::sin(M_PI * x[0]); });

    auto res = simulate_continuous_model(calA, opt, u0);
    auto osc = multiscale::solve_oscillatory(calA, opt.epsilon, u0, {}, opt.geom, opt.tol);

    REQUIRE(res.U.values.size() == osc.trajectory.values.size());
    for (std::size_t i = 0; i < res.U.values.size(); ++i) {
        CHECK(res.epsV.values[i] == 0.0);
        CHECK(res.U.values[i] == osc.trajectory.values[i]);
        CHECK(res.W.values[i] == osc.trajectory.values[i]);
    }
}

TEST_CASE("splitting recomposition is exact") {
    env::EnvParams ep;
    ep.kind = env::EnvKind::ScalarLinear;
    ep.d = 1;
    ep.c_min = 1.0;
    ep.c_max = 4.0;
    auto calA = env::CoefficientField::build(ep);
    ContinuousModelOptions opt;
    opt.bump = spde::BumpSpec{0.45, 1.0};
    opt.epsilon = 0.25;
    opt.geom.d = 1;
    opt.geom.cells = 2;
    opt.geom.m = 32;
    opt.geom.dt = 1.0 / 512;
    opt.geom.T = 0.0625;
    opt.noise_seed = 5;
    const GridSpec g = opt.geom.grid();
    std::vector<double> u0(static_cast<std::size_t>(g.points()), 0.0);
    auto res = simulate_continuous_model(calA, opt, u0);
    for (std::size_t i = 0; i < res.U.values.size(); ++i)
        CHECK(res.U.values[i] == res.epsV.values[i] + res.W.values[i]);
    // the stochastic layer is genuinely present
    double m = 0;
    for (double v : res.epsV.values) m += v * v;
    CHECK(m > 0);
}

TEST_CASE("lattice guards: stability bound and potential validity") {
    LatticeOptions opt;
    opt.N = 8;
    opt.d = 2;
    opt.dt = 0.3;  // 0.3 * 2 * 2 * 1 >= 1 violates the bound
    std::vector<double> phi(64, 0.0);
    CHECK_THROWS_AS(simulate_lattice(opt, phi), std::invalid_argument);
    opt.dt = 1e-3;
    opt.potential.family = PotentialSpec::Family::QuadPlusTanh;
    opt.potential.beta = -1.5;
    CHECK_THROWS_AS(simulate_lattice(opt, phi), std::invalid_argument);
}
