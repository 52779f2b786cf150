#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "parhom/corrector.hpp"
#include "parhom/env.hpp"
#include "parhom/grid.hpp"
#include "parhom/stats.hpp"

namespace parhom::multiscale {

struct ParabolicGeometry {
    int d = 1;
    int cells = 4;  // torus side (physical length)
    int m = 32;     // grid points per unit length
    double dt = 1e-3;
    double T = 0.5;
    int store_every = 0;  // 0: pick ~32 stored slices automatically

    GridSpec grid() const { return {d, cells, m}; }
    long steps() const { return std::lround(T / dt); }
};

using SpaceTimeFn = std::function<double(const double* x, double t)>;
using SpaceFn = std::function<double(const double* x)>;

// Flux closure: an oscillatory coefficient field a(., x/eps, t/eps^2) or a
// sampled effective law abar(.).
struct FluxModel {
    const env::CoefficientField* field = nullptr;
    double epsilon = 1.0;
    const corrector::EffectiveLaw* law = nullptr;
};

struct SolveReport {
    GridFunction trajectory;  // stored every store_every steps (first slice = u0)
    int store_every = 1;      // effective cadence actually used
    long hull_warnings = 0;
    std::vector<double> l2_history;      // unweighted L2 norm per step
    std::vector<int> picard_iterations;  // per step
};

// Implicit Euler in time; each step solves its strongly monotone spatial
// system by the same preconditioned fixed point as the cell solver.
// pre_step (optional) runs before each step with (step_index, t_next); used by
// couplings that must advance auxiliary state in lockstep.
using PreStepHook = std::function<void(long step, double t_next)>;
SolveReport solve_parabolic(const FluxModel& flux, const std::vector<double>& u0,
                            const SpaceTimeFn& f, const ParabolicGeometry& geom, double tol,
                            const PreStepHook& pre_step = {});

SolveReport solve_oscillatory(const env::CoefficientField& field, double epsilon,
                              const std::vector<double>& u0, const SpaceTimeFn& f,
                              const ParabolicGeometry& geom, double tol);
SolveReport solve_homogenized(const corrector::EffectiveLaw& law, const std::vector<double>& u0,
                              const SpaceTimeFn& f, const ParabolicGeometry& geom, double tol);

std::vector<double> sample_initial(const GridSpec& g, const SpaceFn& u0);

// rho_theta(x) = exp(-theta sqrt(1+|x|^2)) with x the signed torus coordinate.
double weight_value(const GridSpec& g, std::int64_t site, double theta);

struct WeightedErrorReport {
    double theta = 0.0;
    std::vector<double> times;
    std::vector<double> per_time;  // ||u-v||_{L2_rho}(t)
    double integrated = 0.0;       // sqrt of the dt-weighted sum of squares
};
WeightedErrorReport weighted_error(const GridFunction& u, const GridFunction& v, double theta);

// sup_t ||u||^2_{L2_rho} + integral of ||Du||^2_{L2_rho}; the a-priori energy
// diagnostic for one trajectory.
double weighted_energy_functional(const GridFunction& traj, double theta);

struct ConvergenceStudy {
    std::vector<double> epsilons;
    std::vector<stats::MeanStderr> errors;      // per epsilon across seeds
    std::vector<std::vector<double>> per_seed;  // [eps][seed]
    std::vector<double> ratios;                 // consecutive mean ratios
    double monotone_fraction = 0.0;             // seeds with strictly decreasing error
    bool ratio_pass = false;
    bool monotone_pass = false;
    bool pass = false;
};

// For each seed: oscillatory solves along the epsilon ladder, all compared to
// the single homogenized solve; pass criteria follow the study contract
// (mean ratio <= ratio_threshold per halving, >= 90% of seeds monotone).
ConvergenceStudy convergence_study(const env::EnvParams& env_template,
                                   const corrector::EffectiveLaw& law,
                                   std::span<const double> epsilon_ladder, int n_seeds,
                                   std::uint64_t seed_base, const ParabolicGeometry& geom,
                                   const SpaceFn& u0, const SpaceTimeFn& f, double theta,
                                   double tol, int workers, double ratio_threshold = 0.8);

}  // namespace parhom::multiscale
