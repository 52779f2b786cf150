#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "parhom/grid.hpp"
#include "parhom/vec.hpp"

namespace parhom::env {

// Families of monotone vector fields a(p, y, tau).
enum class EnvKind {
    Identity,          // a = p
    ScalarLinear,      // a = c(y,tau) p
    MonotoneGradient,  // a = c(y,tau) p + delta p/sqrt(1+|p|^2)
    ShiftedLinear,     // a = c(y,tau)(p+z(y,tau)) - z(y,tau)
};

enum class SpatialStructure {
    PeriodicPattern,     // deterministic, alternating on half-cells, cell-periodic
    RandomCheckerboard,  // i.i.d. value per unit cell
};

enum class TemporalStructure {
    Static,
    RenewalJumps,  // per-cell Poisson renewals at rate mu, value redrawn at each renewal
};

struct EnvParams {
    EnvKind kind = EnvKind::Identity;
    int d = 1;
    double c_min = 1.0;
    double c_max = 1.0;
    double delta = 0.0;
    SpatialStructure spatial = SpatialStructure::PeriodicPattern;
    TemporalStructure temporal = TemporalStructure::Static;
    double mu = 1.0;             // renewal rate per cell
    double t_max = 1048576.0;    // field evaluable on [-t_max, t_max]
    std::uint64_t seed = 0;
};

struct StructureReport {
    double min_monotone_ratio = 0.0;
    double max_lipschitz_ratio = 0.0;
    double mean_sq_a0 = 0.0;
    int n_samples = 0;
    bool pass = false;
};

// Externally supplied vector field z(y, tau), used by ShiftedLinear.
class ExternalDrift {
  public:
    virtual ~ExternalDrift() = default;
    virtual void eval(const double* y, double tau, int d, double* z) const = 0;
};

// Piecewise-constant lookup into a stored d-component trajectory
// (nearest grid site, nearest stored slice).
class GridDrift final : public ExternalDrift {
  public:
    explicit GridDrift(GridFunction traj);
    void eval(const double* y, double tau, int d, double* z) const override;

  private:
    GridFunction traj_;
};

// Immutable realization of a stationary ergodic coefficient field.  Evaluation
// is pure given (params, seed); the object can be shared across threads.
class CoefficientField {
  public:
    static CoefficientField build(const EnvParams& params,
                                  std::shared_ptr<const ExternalDrift> drift = nullptr);

    // Field evaluating to a(p, y+k, tau+s); offsets fold, so composing shifts
    // is exactly equivalent to one shift by the summed offsets.
    CoefficientField shifted(const std::array<long, 3>& k, double s) const;

    void evaluate(const double* p, const double* y, double tau, double* out) const;
    VecN evaluate(const VecN& p, const VecN& y, double tau) const;

    // Scalar coefficient c(y, tau); 1 for Identity.
    double coefficient(const double* y, double tau) const;
    // Drift z(y, tau); zero unless ShiftedLinear.
    void drift(const double* y, double tau, double* z) const;

    StructureReport certify_structure(int n_samples, std::uint64_t sample_seed = 1) const;

    const EnvParams& params() const { return params_; }
    int dim() const { return params_.d; }
    EnvKind kind() const { return params_.kind; }
    double monotone_const() const { return alpha_; }   // (a(p)-a(q))·(p-q) >= alpha |p-q|^2
    double lipschitz_const() const { return beta_; }   // |a(p)-a(q)| <= beta |p-q|
    double C0() const { return c0_; }
    const std::array<long, 3>& shift_k() const { return shift_k_; }
    double shift_s() const { return shift_s_; }

  private:
    CoefficientField() = default;
    double pattern_value(const long* cell, const double* frac, double tau) const;
    double cell_value(const long* cell, double tau) const;

    EnvParams params_;
    double alpha_ = 1.0, beta_ = 1.0, c0_ = 1.0;
    std::array<long, 3> shift_k_{0, 0, 0};
    double shift_s_ = 0.0;
    std::shared_ptr<const ExternalDrift> drift_;
};

// Flux evaluated from cached pointwise data; hot path for the grid solvers.
inline void flux_eval(EnvKind kind, double delta, double c, const double* z, const double* q,
                      int d, double* out) {
    switch (kind) {
        case EnvKind::Identity:
            for (int i = 0; i < d; ++i) out[i] = q[i];
            return;
        case EnvKind::ScalarLinear:
            for (int i = 0; i < d; ++i) out[i] = c * q[i];
            return;
        case EnvKind::MonotoneGradient: {
            double n2 = 0;
            for (int i = 0; i < d; ++i) n2 += q[i] * q[i];
            const double w = delta / std::sqrt(1.0 + n2);
            for (int i = 0; i < d; ++i) out[i] = c * q[i] + w * q[i];
            return;
        }
        case EnvKind::ShiftedLinear:
            for (int i = 0; i < d; ++i) out[i] = c * (q[i] + z[i]) - z[i];
            return;
    }
}

}  // namespace parhom::env
