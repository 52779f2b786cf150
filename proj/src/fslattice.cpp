#include "parhom/fslattice.hpp"

#include <cmath>
#include <stdexcept>

#include "parhom/rng.hpp"

namespace parhom::fslattice {

using env::CoefficientField;
using env::EnvKind;

namespace {
constexpr std::uint64_t kLatticeStream = 9001;

int wrap(long i, int n) {
    long r = i % n;
    return static_cast<int>(r < 0 ? r + n : r);
}

struct Strides {
    std::int64_t s[3];
    int n, d;
    explicit Strides(const GridSpec& g) : n(g.n()), d(g.d) {
        std::int64_t acc = 1;
        for (int a = d - 1; a >= 0; --a) {
            s[a] = acc;
            acc *= n;
        }
    }
    std::int64_t fwd(std::int64_t x, int a) const {
        const int ia = static_cast<int>((x / s[a]) % n);
        return (ia == n - 1) ? x - (n - 1) * s[a] : x + s[a];
    }
    std::int64_t bwd(std::int64_t x, int a) const {
        const int ia = static_cast<int>((x / s[a]) % n);
        return (ia == 0) ? x + (n - 1) * s[a] : x - s[a];
    }
};
}  // namespace

double PotentialSpec::vprime(double r) const {
    switch (family) {
        case Family::Quadratic:
            return r;
        case Family::QuadPlusTanh:
            return r + beta * std::tanh(r);
    }
    return r;
}

void lattice_drift(const PotentialSpec& pot, const GridSpec& g, std::span<const double> phi,
                   std::span<double> out) {
    const Strides str(g);
    const std::int64_t np = g.points();
    for (std::int64_t x = 0; x < np; ++x) {
        double s = 0;
        for (int a = 0; a < g.d; ++a) {
            s -= pot.vprime(phi[static_cast<std::size_t>(x)] - phi[static_cast<std::size_t>(str.fwd(x, a))]);
            s -= pot.vprime(phi[static_cast<std::size_t>(x)] - phi[static_cast<std::size_t>(str.bwd(x, a))]);
        }
        out[static_cast<std::size_t>(x)] = s;
    }
}

void simulate_lattice(const LatticeOptions& opt, std::vector<double>& phi,
                      const LatticeObserver& observer) {
    if (!opt.potential.valid()) throw std::invalid_argument("lattice: potential not strictly convex");
    const GridSpec g = lattice_grid(opt.d, opt.N);
    if (phi.size() != static_cast<std::size_t>(g.points()))
        throw std::invalid_argument("lattice: state size mismatch");
    // explicit scheme stability for the linearized drift
    if (opt.dt * 2.0 * opt.d * opt.potential.vsecond_sup() >= 1.0)
        throw std::invalid_argument("lattice: dt violates the explicit stability bound");
    const long nsteps = std::lround(opt.T / opt.dt);
    const double amp = opt.noise_amp * std::sqrt(2.0 * opt.dt);
    std::vector<double> drift(phi.size());
    const Strides str(g);
    for (long s = 0; s < nsteps; ++s) {
        lattice_drift(opt.potential, g, phi, drift);
        for (std::int64_t x = 0; x < g.points(); ++x) {
            double noise = 0.0;
            if (opt.noise_amp != 0.0) {
                int site[3] = {0, 0, 0};
                for (int a = 0; a < g.d; ++a)
                    site[a] = wrap(static_cast<long>((x / str.s[a]) % g.n()) + opt.site_offset[a],
                                   g.n());
                noise = amp * rng::gaussian(rng::key(opt.seed, kLatticeStream,
                                                     static_cast<std::uint64_t>(site[0]),
                                                     static_cast<std::uint64_t>(site[1]),
                                                     static_cast<std::uint64_t>(site[2]),
                                                     static_cast<std::uint64_t>(s)));
            }
            phi[static_cast<std::size_t>(x)] += opt.dt * drift[static_cast<std::size_t>(x)] + noise;
        }
        if ((s & 255) == 255)
            for (double v : phi)
                if (!std::isfinite(v))
                    throw std::runtime_error("lattice: non-finite height at step " + std::to_string(s));
        if (observer) observer(s + 1, (s + 1) * opt.dt, phi);
    }
}

GridFunction simulate_lattice_trajectory(const LatticeOptions& opt,
                                         const std::vector<double>& phi0, int store_every) {
    const GridSpec g = lattice_grid(opt.d, opt.N);
    const long nsteps = std::lround(opt.T / opt.dt);
    if (store_every < 1) store_every = 1;
    const std::int64_t slices = nsteps / store_every + 1;
    GridFunction traj(g, 1, slices, "Phi");
    traj.dt = opt.dt * store_every;
    std::vector<double> phi = phi0;
    auto s0 = traj.slice(0, 0);
    std::copy(phi.begin(), phi.end(), s0.begin());
    std::int64_t stored = 1;
    simulate_lattice(opt, phi, [&](long step, double, std::span<const double> state) {
        if (step % store_every == 0 && stored < slices) {
            auto dst = traj.slice(stored, 0);
            std::copy(state.begin(), state.end(), dst.begin());
            ++stored;
        }
    });
    return traj;
}

GridFunction rescale_field(const GridFunction& lattice_traj, double epsilon) {
    const GridSpec& gl = lattice_traj.grid;
    const int N = gl.n();
    if (std::abs(epsilon * N - 1.0) > 1e-9)
        throw std::invalid_argument("rescale_field: epsilon must equal 1/N");
    GridFunction out(GridSpec{gl.d, 1, N}, 1, lattice_traj.steps, "Phi_eps");
    out.dt = lattice_traj.dt * epsilon * epsilon;
    out.t0 = lattice_traj.t0 * epsilon * epsilon;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = epsilon * lattice_traj.values[i];
    return out;
}

ContinuousModelResult simulate_continuous_model(const CoefficientField& calA,
                                                const ContinuousModelOptions& opt,
                                                const std::vector<double>& u0) {
    if (calA.kind() != EnvKind::Identity && calA.kind() != EnvKind::ScalarLinear)
        throw std::invalid_argument("continuous model: the base field must be linear in p");
    const int d = calA.dim();
    const double eps = opt.epsilon;
    const multiscale::ParabolicGeometry& geom = opt.geom;
    if (geom.d != d) throw std::invalid_argument("continuous model: dimension mismatch");

    // unit-scale grid for the stochastic layer; sites coincide with the domain grid
    const double cellsV_f = geom.cells / eps;
    const double mV_f = geom.m * eps;
    const int cellsV = static_cast<int>(std::lround(cellsV_f));
    const int mV = static_cast<int>(std::lround(mV_f));
    if (std::abs(cellsV - cellsV_f) > 1e-9 || std::abs(mV - mV_f) > 1e-9 || mV < 1)
        throw std::invalid_argument("continuous model: epsilon incompatible with the grid");
    const GridSpec gV{d, cellsV, mV};
    const GridSpec gD = geom.grid();

    const long nsteps = geom.steps();
    const double dtau = geom.dt / (eps * eps);  // stochastic-layer time per step
    double dtV = opt.v_substep_dt;
    if (dtV <= 0) dtV = gV.h() * gV.h() / 4.0;
    const int ksub = std::max(1, static_cast<int>(std::ceil(dtau / dtV)));
    dtV = dtau / ksub;

    // stochastic layer trajectory, one slice per domain step
    spde::NoiseRealization noise;
    noise.seed = opt.noise_seed;
    noise.dt = dtV;
    noise.d = d;
    noise.cells = cellsV;
    GridFunction v_slices(gV, 1, nsteps + 1, "V");
    GridFunction dv_slices(gV, d, nsteps + 1, "DV");
    v_slices.dt = dv_slices.dt = dtau;
    {
        std::vector<double> v(static_cast<std::size_t>(gV.points()), 0.0);
        GridFunction tmp(gV, d, 1, "grad");
        if (opt.drift_from_attractor) {
            // old-start solution carried to time 0 on the same noise path
            const long warmteps = std::lround(
                static_cast<double>(opt.attractor_start) * opt.attractor_start / dtV);
            spde::SimOptions wopt{gV, opt.bump, dtV, -warmteps, warmteps, {}};
            spde::simulate(wopt, noise, v);
        }
        auto record = [&](std::int64_t slot, const std::vector<double>& state) {
            auto dstv = v_slices.slice(slot, 0);
            std::copy(state.begin(), state.end(), dstv.begin());
            spde::forward_gradient(gV, state, tmp);
            for (int c = 0; c < d; ++c) {
                auto dst = dv_slices.slice(slot, c);
                auto src = tmp.slice(0, c);
                std::copy(src.begin(), src.end(), dst.begin());
            }
        };
        record(0, v);
        for (long s = 0; s < nsteps; ++s) {
            spde::SimOptions sopt{gV, opt.bump, dtV, s * ksub, ksub, {}};
            spde::simulate(sopt, noise, v);
            record(s + 1, v);
        }
    }

    // shifted field: A(p + z) - z with z the recorded gradient layer
    env::EnvParams sp = calA.params();
    sp.kind = EnvKind::ShiftedLinear;
    auto drift = std::make_shared<env::GridDrift>(dv_slices);
    auto shifted = CoefficientField::build(sp, drift);
    if (calA.shift_k() != std::array<long, 3>{0, 0, 0} || calA.shift_s() != 0.0)
        shifted = shifted.shifted(calA.shift_k(), calA.shift_s());

    auto wrep = multiscale::solve_oscillatory(shifted, eps, u0, {}, geom, opt.tol);

    ContinuousModelResult res;
    res.W = std::move(wrep.trajectory);
    res.store_every = wrep.store_every;
    res.epsV = GridFunction(gD, 1, res.W.steps, "epsV");
    res.epsV.dt = res.W.dt;
    for (std::int64_t s = 0; s < res.W.steps; ++s) {
        auto src = v_slices.slice(s * res.store_every, 0);
        auto dst = res.epsV.slice(s, 0);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = eps * src[i];
    }
    res.U = GridFunction(gD, 1, res.W.steps, "U");
    res.U.dt = res.W.dt;
    for (std::size_t i = 0; i < res.U.values.size(); ++i)
        res.U.values[i] = res.epsV.values[i] + res.W.values[i];
    return res;
}

multiscale::WeightedErrorReport compare_hydrodynamic(const GridFunction& field,
                                                     const GridFunction& limit, double theta) {
    return multiscale::weighted_error(field, limit, theta);
}

}  // namespace parhom::fslattice
