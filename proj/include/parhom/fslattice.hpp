#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "parhom/env.hpp"
#include "parhom/grid.hpp"
#include "parhom/multiscale.hpp"
#include "parhom/spde.hpp"

namespace parhom::fslattice {

// Strictly convex symmetric interaction potential.
struct PotentialSpec {
    enum class Family { Quadratic, QuadPlusTanh };
    Family family = Family::Quadratic;
    double beta = 0.0;  // QuadPlusTanh: V = r^2/2 + beta log cosh r, beta > -1

    double vprime(double r) const;
    double vsecond_inf() const { return 1.0 + std::min(beta, 0.0); }
    double vsecond_sup() const { return 1.0 + std::max(beta, 0.0); }
    bool valid() const { return family == Family::Quadratic || beta > -1.0; }
};

// Height configurations live on GridSpec{d, N, 1}: N sites per axis, spacing 1.
inline GridSpec lattice_grid(int d, int N) { return GridSpec{d, N, 1}; }

struct LatticeOptions {
    PotentialSpec potential;
    int N = 32;
    int d = 1;
    double dt = 1e-3;
    double T = 1.0;
    std::uint64_t seed = 0;
    double noise_amp = 1.0;  // scales the sqrt(2 dt) increments; 0 disables noise
    std::array<long, 3> site_offset{0, 0, 0};
};

// drift(x) = -sum_{|x-y|_1 = 1} V'(phi(x) - phi(y)); the discrete divergence
// of V' applied to forward differences.
void lattice_drift(const PotentialSpec& pot, const GridSpec& g, std::span<const double> phi,
                   std::span<double> out);

using LatticeObserver = std::function<void(long step, double t, std::span<const double> phi)>;

// Explicit Euler-Maruyama with per-site independent sqrt(2) dB noise.
void simulate_lattice(const LatticeOptions& opt, std::vector<double>& phi,
                      const LatticeObserver& observer = {});
GridFunction simulate_lattice_trajectory(const LatticeOptions& opt,
                                         const std::vector<double>& phi0, int store_every);

// Phi^eps(r, t) = eps * Phi_{t/eps^2}(round(r/eps)) sampled on the unit torus
// grid with N points; input slices are lattice times t_lat = t / eps^2.
GridFunction rescale_field(const GridFunction& lattice_traj, double epsilon);

struct ContinuousModelOptions {
    spde::BumpSpec bump;
    double epsilon = 0.25;
    multiscale::ParabolicGeometry geom;  // domain for U and W
    std::uint64_t noise_seed = 0;
    double tol = 1e-10;
    double v_substep_dt = 0.0;     // 0: auto (h_V^2/4, snapped to divide dt/eps^2)
    bool drift_from_attractor = false;  // use the old-start gradient instead of DV
    int attractor_start = 8;            // n for the old start when enabled
};

struct ContinuousModelResult {
    GridFunction U;       // eps V(t/eps^2, x/eps) + W
    GridFunction W;
    GridFunction epsV;    // the rescaled stochastic layer at the stored times
    int store_every = 1;
};

// Splitting solve of the forced model: the stochastic layer V runs on the
// unit-scale grid, W solves the divergence-form problem with the shifted
// field A(p + DV) - DV through the oscillatory solver.
ContinuousModelResult simulate_continuous_model(const env::CoefficientField& calA,
                                                const ContinuousModelOptions& opt,
                                                const std::vector<double>& u0);

// Weighted comparison of a (rescaled) stochastic trajectory against a
// deterministic limit; theta = 0 gives the plain L2 distance.
multiscale::WeightedErrorReport compare_hydrodynamic(const GridFunction& field,
                                                     const GridFunction& limit, double theta);

}  // namespace parhom::fslattice
