#include "parhom/env.hpp"

#include <cmath>
#include <stdexcept>

#include "parhom/rng.hpp"

namespace parhom::env {

namespace {

// Stream tags keeping the per-purpose counter streams disjoint.
enum Stream : std::uint64_t {
    kStaticValue = 101,
    kRenewalCount = 102,
    kRenewalTime = 103,
    kRenewalValue = 104,
    kGenesisValue = 105,
};

std::uint64_t zw(long v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }

}  // namespace

GridDrift::GridDrift(GridFunction traj) : traj_(std::move(traj)) {}

void GridDrift::eval(const double* y, double tau, int d, double* z) const {
    const GridSpec& g = traj_.grid;
    int idx[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a) idx[a] = g.wrap(static_cast<long>(std::llround(y[a] * g.m)));
    std::int64_t step = 0;
    if (traj_.steps > 1 && traj_.dt > 0) {
        step = static_cast<std::int64_t>(std::llround((tau - traj_.t0) / traj_.dt));
        step = std::max<std::int64_t>(0, std::min(traj_.steps - 1, step));
    }
    const std::int64_t site = g.flat(idx);
    for (int c = 0; c < d; ++c) z[c] = traj_.at(step, c, site);
}

CoefficientField CoefficientField::build(const EnvParams& params,
                                         std::shared_ptr<const ExternalDrift> drift) {
    if (params.d < 1 || params.d > 3) throw std::invalid_argument("env: d must be 1, 2 or 3");
    if (params.c_min <= 0) throw std::invalid_argument("env: c_min must be positive");
    if (params.c_max < params.c_min) throw std::invalid_argument("env: c_max < c_min");
    if (params.delta < 0) throw std::invalid_argument("env: delta must be nonnegative");
    if (params.temporal == TemporalStructure::RenewalJumps && params.mu <= 0)
        throw std::invalid_argument("env: renewal rate mu must be positive");
    if (params.t_max <= 0) throw std::invalid_argument("env: t_max must be positive");
    if (params.kind == EnvKind::ShiftedLinear && !drift)
        throw std::invalid_argument("env: ShiftedLinear requires an external drift");

    CoefficientField f;
    f.params_ = params;
    f.drift_ = std::move(drift);
    switch (params.kind) {
        case EnvKind::Identity:
            f.alpha_ = f.beta_ = 1.0;
            break;
        case EnvKind::ScalarLinear:
        case EnvKind::ShiftedLinear:
            f.alpha_ = params.c_min;
            f.beta_ = params.c_max;
            break;
        case EnvKind::MonotoneGradient:
            // Hessian of delta*sqrt(1+|p|^2) has spectrum in (0, delta].
            f.alpha_ = params.c_min;
            f.beta_ = params.c_max + params.delta;
            break;
    }
    f.c0_ = std::max(f.beta_, 1.0 / f.alpha_);

    StructureReport quick = f.certify_structure(256, 7);
    if (!quick.pass)
        throw std::invalid_argument("env: structure certification failed at build");
    return f;
}

CoefficientField CoefficientField::shifted(const std::array<long, 3>& k, double s) const {
    CoefficientField f = *this;
    for (int a = 0; a < params_.d; ++a) f.shift_k_[a] = shift_k_[a] + k[a];
    f.shift_s_ = shift_s_ + s;
    return f;
}

double CoefficientField::cell_value(const long* cell, double tau) const {
    const EnvParams& P = params_;
    const std::uint64_t seed = P.seed;
    if (P.temporal == TemporalStructure::Static) {
        std::uint64_t h = rng::key(seed, kStaticValue, zw(cell[0]),
                                   P.d > 1 ? zw(cell[1]) : 0, P.d > 2 ? zw(cell[2]) : 0);
        return P.c_min + (P.c_max - P.c_min) * rng::u01(h);
    }
    // Renewal lookup: slots of length 1/mu; the value in force at tau is keyed
    // by the most recent renewal event, scanned backwards slot by slot.
    const double u = tau * P.mu;
    const long slot0 = static_cast<long>(std::floor(u));
    const long slot_min = static_cast<long>(std::floor(-P.t_max * P.mu)) - 64;
    for (long s = slot0; s >= slot_min; --s) {
        const std::uint64_t hn = rng::key(seed, kRenewalCount, zw(cell[0]),
                                          P.d > 1 ? zw(cell[1]) : 0, P.d > 2 ? zw(cell[2]) : 0,
                                          zw(s));
        const int nev = rng::poisson1(hn);
        double best = -1e300;
        int best_i = -1;
        for (int i = 0; i < nev; ++i) {
            const std::uint64_t ht = rng::key(seed, kRenewalTime, zw(cell[0]),
                                              P.d > 1 ? zw(cell[1]) : 0,
                                              P.d > 2 ? zw(cell[2]) : 0, zw(s), zw(i));
            const double te = (static_cast<double>(s) + rng::u01(ht)) / P.mu;
            if (te <= tau && te > best) {
                best = te;
                best_i = i;
            }
        }
        if (best_i >= 0) {
            const std::uint64_t hv = rng::key(seed, kRenewalValue, zw(cell[0]),
                                              P.d > 1 ? zw(cell[1]) : 0,
                                              P.d > 2 ? zw(cell[2]) : 0, zw(s), zw(best_i));
            return P.c_min + (P.c_max - P.c_min) * rng::u01(hv);
        }
    }
    const std::uint64_t hg = rng::key(seed, kGenesisValue, zw(cell[0]),
                                      P.d > 1 ? zw(cell[1]) : 0, P.d > 2 ? zw(cell[2]) : 0);
    return P.c_min + (P.c_max - P.c_min) * rng::u01(hg);
}

double CoefficientField::coefficient(const double* y, double tau) const {
    const EnvParams& P = params_;
    if (P.kind == EnvKind::Identity) return 1.0;
    const double t = tau + shift_s_;
    if (t < -P.t_max || t > P.t_max)
        throw std::domain_error("env: evaluation time outside [-t_max, t_max]");
    double yy[3];
    long cell[3] = {0, 0, 0};
    for (int a = 0; a < P.d; ++a) {
        yy[a] = y[a] + static_cast<double>(shift_k_[a]);
        cell[a] = static_cast<long>(std::floor(yy[a]));
    }
    if (P.spatial == SpatialStructure::PeriodicPattern) {
        if (P.c_min == P.c_max) return P.c_min;
        long parity = 0;
        for (int a = 0; a < P.d; ++a) parity += static_cast<long>(std::floor(2.0 * yy[a]));
        return ((parity % 2 + 2) % 2 == 0) ? P.c_min : P.c_max;
    }
    return cell_value(cell, t);
}

void CoefficientField::drift(const double* y, double tau, double* z) const {
    const int d = params_.d;
    if (params_.kind != EnvKind::ShiftedLinear || !drift_) {
        for (int i = 0; i < d; ++i) z[i] = 0.0;
        return;
    }
    double yy[3];
    for (int a = 0; a < d; ++a) yy[a] = y[a] + static_cast<double>(shift_k_[a]);
    drift_->eval(yy, tau + shift_s_, d, z);
}

void CoefficientField::evaluate(const double* p, const double* y, double tau, double* out) const {
    const int d = params_.d;
    double z[3] = {0, 0, 0};
    if (params_.kind == EnvKind::ShiftedLinear) drift(y, tau, z);
    const double c = coefficient(y, tau);
    flux_eval(params_.kind, params_.delta, c, z, p, d, out);
}

VecN CoefficientField::evaluate(const VecN& p, const VecN& y, double tau) const {
    VecN out(params_.d);
    evaluate(p.data(), y.data(), tau, out.data());
    return out;
}

StructureReport CoefficientField::certify_structure(int n_samples, std::uint64_t sample_seed) const {
    if (n_samples < 1) throw std::invalid_argument("certify_structure: n_samples >= 1");
    const int d = params_.d;
    StructureReport rep;
    rep.n_samples = n_samples;
    rep.min_monotone_ratio = 1e300;
    rep.max_lipschitz_ratio = 0.0;
    const double t_span = std::min(params_.t_max * 0.5, 16.0);
    double sum_a0 = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        double p[3], q[3], y[3], a_p[3], a_q[3];
        for (int a = 0; a < d; ++a) {
            p[a] = -3.0 + 6.0 * rng::u01(rng::key(sample_seed, 1, i, a));
            q[a] = -3.0 + 6.0 * rng::u01(rng::key(sample_seed, 2, i, a));
            y[a] = -8.0 + 16.0 * rng::u01(rng::key(sample_seed, 3, i, a));
        }
        const double tau = -t_span + 2.0 * t_span * rng::u01(rng::key(sample_seed, 4, i));
        double dn2 = 0;
        for (int a = 0; a < d; ++a) dn2 += (p[a] - q[a]) * (p[a] - q[a]);
        if (dn2 < 1e-18) continue;
        evaluate(p, y, tau, a_p);
        evaluate(q, y, tau, a_q);
        double inner = 0, an2 = 0;
        for (int a = 0; a < d; ++a) {
            inner += (a_p[a] - a_q[a]) * (p[a] - q[a]);
            an2 += (a_p[a] - a_q[a]) * (a_p[a] - a_q[a]);
        }
        rep.min_monotone_ratio = std::min(rep.min_monotone_ratio, inner / dn2);
        rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, std::sqrt(an2 / dn2));

        // Monte-Carlo estimate of the energy of a(0, ., .) over the unit space-time cell.
        double y0[3], a0[3], zero[3] = {0, 0, 0};
        for (int a = 0; a < d; ++a) y0[a] = -0.5 + rng::u01(rng::key(sample_seed, 5, i, a));
        const double tau0 = -0.5 + rng::u01(rng::key(sample_seed, 6, i));
        evaluate(zero, y0, tau0, a0);
        double a0n2 = 0;
        for (int a = 0; a < d; ++a) a0n2 += a0[a] * a0[a];
        sum_a0 += a0n2;
    }
    rep.mean_sq_a0 = sum_a0 / n_samples;
    constexpr double kTol = 1e-12;
    rep.pass = rep.min_monotone_ratio >= alpha_ - kTol &&
               rep.max_lipschitz_ratio <= beta_ + kTol && std::isfinite(rep.mean_sq_a0);
    return rep;
}

}  // namespace parhom::env
