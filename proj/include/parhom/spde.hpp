#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "parhom/fft.hpp"
#include "parhom/grid.hpp"
#include "parhom/stats.hpp"
#include "parhom/vec.hpp"

namespace parhom::spde {

// Smooth compactly supported forcing profile, identical for every component:
// A(x) = kappa * exp(-1/(1-|x/r0|^2)) for |x| < r0, else 0.
struct BumpSpec {
    double r0 = 0.45;
    double kappa = 1.0;
    double value(const double* x, int d) const;
};

// Gaussian increments as a pure function of (seed, site, step, component).
class NoiseSource {
  public:
    virtual ~NoiseSource() = default;
    // site: canonical torus cell index, step: global time-step index
    // (time = step*dt), comp in [0, d).
    virtual double increment(const int* site, long step, int comp) const = 0;
};

struct NoiseRealization final : NoiseSource {
    std::uint64_t seed = 0;
    double dt = 1e-3;
    int d = 1;
    int cells = 4;  // torus side; site keys wrap modulo this
    std::array<long, 3> site_offset{0, 0, 0};
    long active_lo = std::numeric_limits<long>::min();
    long active_hi = std::numeric_limits<long>::max();  // increments live on [lo, hi)

    double increment(const int* site, long step, int comp) const override;
};

// Pathwise sum of two noise sources (superposition checks).
struct SumNoise final : NoiseSource {
    const NoiseSource* a = nullptr;
    const NoiseSource* b = nullptr;
    double increment(const int* site, long step, int comp) const override {
        return a->increment(site, step, comp) + b->increment(site, step, comp);
    }
};

// Restrict forcing to sites within torus distance R of center.
struct SiteFilter {
    bool enabled = false;
    std::array<int, 3> center{0, 0, 0};
    double radius = 0.0;
};

struct SimOptions {
    GridSpec grid;
    BumpSpec bump;
    double dt = 0.0;
    long step0 = 0;  // simulation starts at time step0*dt
    long nsteps = 0;
    SiteFilter filter{};
};

using Observer = std::function<void(long step, double t, std::span<const double> v)>;

// Semi-implicit Euler-Maruyama for dV = Laplacian V dt + sum_k A(x-k) . dB^k:
// diffusion implicit (FFT-diagonalized), additive noise explicit.
// v holds the initial state on entry and the final state on return.
void simulate(const SimOptions& opt, const NoiseSource& noise, std::vector<double>& v,
              const Observer& observer = {});

// Trajectory wrapper storing every `store_every`-th step (plus the initial slice).
GridFunction simulate_trajectory(const SimOptions& opt, const NoiseSource& noise,
                                 const std::vector<double>* v_init, int store_every,
                                 const char* tag = "V");

// --- measurement helpers -------------------------------------------------

double mean(std::span<const double> v);
double mean_sq(std::span<const double> v);
// Second moment with the torus zero mode removed (finite-size artifact of the
// periodic domain; gradients never see it).
double mean_sq_fluctuation(std::span<const double> v);
// |forward-difference gradient|^2 averaged over all sites.
double mean_grad_sq(const GridSpec& g, std::span<const double> v);
double mean_grad_diff_sq(const GridSpec& g, std::span<const double> a, std::span<const double> b);
// Same, restricted to the unit cell centered at integer site l.
double mean_grad_diff_sq_cell(const GridSpec& g, std::span<const double> a,
                              std::span<const double> b, const std::array<int, 3>& l);
void forward_gradient(const GridSpec& g, std::span<const double> v, GridFunction& out);

// --- study drivers --------------------------------------------------------

struct MomentRow {
    double t = 0, v2 = 0, v2_se = 0, dv2 = 0, dv2_se = 0;
};
struct MomentProfile {
    std::vector<MomentRow> rows;
    stats::LineFit v2_fit;  // log E[V^2] vs log t over the largest decade
};
MomentProfile moment_growth_profile(const GridSpec& grid, const BumpSpec& bump, double dt,
                                    std::span<const double> t_list, int n_replicas,
                                    std::uint64_t seed_base, int workers);

struct LadderRow {
    double x = 0, gap = 0, se = 0;
};
struct DecorrelationResult {
    std::vector<LadderRow> rows;  // x = R
    stats::LineFit fit;           // over rows with R^2 <= t
    double t = 0;
};
DecorrelationResult decorrelation_profile(const GridSpec& grid, const BumpSpec& bump, double dt,
                                          double t, std::span<const double> R_list,
                                          int n_replicas, std::uint64_t seed_base, int workers);

struct EternalResult {
    GridFunction z_estimate;        // DV of the oldest start, replica 0, at t_eval
    std::vector<LadderRow> cauchy;  // x = t_eval + n^2 for consecutive start pairs
    stats::LineFit fit;
};
EternalResult eternal_gradient(const GridSpec& grid, const BumpSpec& bump, double dt,
                               std::span<const int> n_list, double t_eval, int n_replicas,
                               std::uint64_t seed_base, int workers);

struct AttractorResult {
    std::vector<LadderRow> rows;  // x = t, gap = E|DV_t - Z_t|^2 over the unit cell
    stats::LineFit fit;
};
AttractorResult attractor_decay(const GridSpec& grid, const BumpSpec& bump, double dt,
                                int n_eternal, std::span<const double> t_list, int n_replicas,
                                std::uint64_t seed_base, int workers);

// Gradient of the oldest-start solution recorded on [t_lo, t_hi]; used as the
// stationary-gradient estimate when a trajectory (not a snapshot) is needed.
GridFunction eternal_gradient_trajectory(const GridSpec& grid, const BumpSpec& bump, double dt,
                                         int n_start, double t_lo, double t_hi, int store_every,
                                         std::uint64_t seed);

struct HeatKernelResult {
    double value = 0;
    double quad_error_estimate = 0;
    bool quad_ok = true;
};
// Direct evaluation of the Duhamel sum over stored increments by space
// quadrature against the (periodized) heat kernel; independent cross-check of
// the time stepper on small cases.
HeatKernelResult heat_kernel_value(const GridSpec& grid, const BumpSpec& bump,
                                   const NoiseRealization& noise, const VecN& x, double t,
                                   int quad_factor, double tol);

}  // namespace parhom::spde
