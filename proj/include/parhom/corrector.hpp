#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "parhom/env.hpp"
#include "parhom/grid.hpp"
#include "parhom/vec.hpp"

namespace parhom::corrector {

// Space-time cell: periodic in space (and in time when time_slices > 1).
// time_slices == 1 collapses the problem to its static version.
struct CellGeometry {
    int d = 1;
    int cells = 8;
    int m = 16;
    double time_extent = 0.0;
    int time_slices = 1;

    GridSpec grid() const { return {d, cells, m}; }
    double dt() const { return time_slices > 1 ? time_extent / time_slices : 0.0; }
    bool is_static() const { return time_slices <= 1; }
};

struct SolveOptions {
    double tol = 1e-8;       // on the residual in the preconditioner dual norm
    int max_iters = 50000;
    int slices_per_unit_time = 4;  // used when ladders build time-dependent cells
};

struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};
struct MonotonicityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorrectorSolution {
    VecN p;
    double lambda = 0.0;
    double theta = 0.0;
    CellGeometry geom;
    GridFunction chi;       // scalar, one slice per time step
    GridFunction grad_chi;  // d components
    GridFunction flux;      // a(p + D chi)
    VecN mean_flux;         // space-time cell average of the flux
    double residual_dual_norm = 0.0;
    int iterations = 0;
    std::vector<double> iteration_energy;  // contraction functional per iteration
    double lambda_energy = 0.0;  // cell avg of lambda chi^2 + lambda (dt chi)^2 + |D chi|^2
};

// Forward-difference gradient and its exact negative adjoint on one periodic
// slice: <cell_divergence(F), g> = -<F, cell_gradient(g)> in the site inner
// product.  These are the stencils every grid solver here is built on.
void cell_gradient(const GridSpec& g, std::span<const double> u, std::span<double> grad);
void cell_divergence(const GridSpec& g, std::span<const double> field, std::span<double> out);

// Damped fixed-point solve of
//   lambda chi - lambda d_tt chi + d_t chi - div a(p + D chi, y, tau) = 0
// on the periodic cell.  The preconditioner lambda - lambda d_tt + d_t - c Lap
// with c = beta^2/alpha is inverted spectrally; the iteration contracts at
// rate sqrt(1 - (alpha/beta)^2) in the gradient seminorm.
CorrectorSolution solve_regularized_cell(const env::CoefficientField& field, const VecN& p,
                                         double lambda, const CellGeometry& geom,
                                         const SolveOptions& opts = {});

struct EffectiveRecord {
    double lambda = 0.0;
    int cells = 0;
    VecN abar;
};
struct EffectiveEstimate {
    VecN abar;
    double error_estimate = 0.0;  // max pairwise spread over the extreme ladder corner
    std::vector<EffectiveRecord> records;
    bool within_tol = true;
};
EffectiveEstimate estimate_effective(const env::CoefficientField& field, const VecN& p,
                                     std::span<const double> lambda_ladder,
                                     std::span<const int> cell_ladder, int m,
                                     const SolveOptions& opts = {}, double want_tol = 0.0);

// Normalized cell average <a(p+Dchi) . Dchi> / (||a||_2 ||Dchi||_2 + eps).
double flux_orthogonality(const CorrectorSolution& sol);

struct SublinearityRow {
    double R = 0.0;
    double spacetime = 0.0;  // R^-(d+3) * integral of chi^2 over the centered space-time cube
    double timezero = 0.0;   // R^-(d+2) * integral of chi(.,0)^2 over the centered space cube
};
std::vector<SublinearityRow> sublinearity_diagnostic(const env::CoefficientField& field,
                                                     const VecN& p,
                                                     std::span<const double> R_ladder,
                                                     double lambda, const CellGeometry& geom,
                                                     const SolveOptions& opts = {});

struct LawCertificates {
    double monotone_min = 0.0;   // min over pairs of (da . dp)/|dp|^2
    double lipschitz_max = 0.0;  // max over pairs of |da|/|dp|
    bool pass = false;
};

// Sampled table p -> abar(p) on a tensor grid with multilinear interpolation.
struct EffectiveLaw {
    int d = 1;
    std::vector<std::vector<double>> axes;  // strictly increasing per dimension
    std::vector<VecN> values;               // row-major over the tensor grid
    LawCertificates certificates;
    std::string provenance_json = "{}";

    // outside_hull (optional) is set when grad falls outside the sampled box;
    // the value is then extrapolated linearly from the boundary slope.
    VecN eval(const VecN& grad, bool* outside_hull = nullptr) const;
    std::int64_t grid_size() const;

    std::string to_json_string() const;
    static EffectiveLaw from_json_string(const std::string& text);
    static EffectiveLaw from_table(std::vector<std::vector<double>> axes,
                                   std::vector<VecN> values);
};

EffectiveLaw build_effective_law(const env::CoefficientField& field,
                                 const std::vector<std::vector<double>>& p_axes,
                                 std::span<const double> lambda_ladder,
                                 std::span<const int> cell_ladder, int m,
                                 const SolveOptions& opts = {}, double cert_tol = 1e-8);

// Zero-boundary box problem with the exponential space-time weight; reports
// the weighted energy against its data functional.
struct WeightedBoxReport {
    double weighted_energy = 0.0;
    double weighted_rhs = 0.0;  // 1 + weighted energy of a(0,.,.)
    double ratio = 0.0;
    int iterations = 0;
    double residual = 0.0;
};
WeightedBoxReport solve_weighted_box(const env::CoefficientField& field, const VecN& p,
                                     double lambda, int L, int m, int time_slices, double theta,
                                     const SolveOptions& opts = {});

}  // namespace parhom::corrector
