#include "parhom/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>

#include "parhom/fft.hpp"
#include "parhom/parallel.hpp"

namespace parhom::multiscale {

using corrector::ConvergenceError;
using env::CoefficientField;
using env::EnvKind;

namespace {

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

class ParabolicStepper {
  public:
    ParabolicStepper(const FluxModel& flux, const ParabolicGeometry& geom, double tol)
        : flux_(flux), geom_(geom), g_(geom.grid()), str_(g_), tol_(tol),
          fft_(std::vector<int>(static_cast<std::size_t>(g_.d), g_.n())) {
        if (flux.law && flux.field) throw std::invalid_argument("flux: field and law are exclusive");
        if (!flux.law && !flux.field) throw std::invalid_argument("flux: empty model");
        if (flux.field) {
            alpha_ = flux.field->monotone_const();
            beta_ = flux.field->lipschitz_const();
            if (flux.epsilon <= 0) throw std::invalid_argument("flux: epsilon must be positive");
            if (flux.field->kind() != EnvKind::Identity) {
                if (geom.dt > flux.epsilon * flux.epsilon / 8.0 + 1e-15)
                    throw std::invalid_argument("oscillatory solve: dt must resolve epsilon^2 (dt <= eps^2/8)");
                if (flux.epsilon * geom.m < 8 - 1e-9)
                    throw std::invalid_argument("oscillatory solve: need >= 8 grid points per epsilon-cell");
            }
        } else {
            if (!flux.law->certificates.pass)
                throw std::invalid_argument("homogenized solve: law failed monotonicity certification");
            alpha_ = std::max(flux.law->certificates.monotone_min, 1e-8);
            beta_ = std::max(flux.law->certificates.lipschitz_max, alpha_);
        }
        cpre_ = beta_ * beta_ / alpha_;

        np_ = g_.points();
        const std::int64_t ns = fft_.spec_size();
        binv_.resize(static_cast<std::size_t>(ns));
        bsym_.resize(static_cast<std::size_t>(ns));
        parseval_.resize(static_cast<std::size_t>(ns));
        const double h2 = g_.h() * g_.h();
        std::vector<int> k(static_cast<std::size_t>(g_.d));
        for (std::int64_t q = 0; q < ns; ++q) {
            fft_.freq(q, k.data());
            double lam = 1.0 / geom.dt;
            for (int a = 0; a < g_.d; ++a)
                lam += cpre_ * (2.0 - 2.0 * std::cos(2.0 * M_PI * k[static_cast<std::size_t>(a)] / g_.n())) / h2;
            binv_[static_cast<std::size_t>(q)] = 1.0 / lam;
            bsym_[static_cast<std::size_t>(q)] = lam;
            const int klast = k[static_cast<std::size_t>(g_.d) - 1];
            const bool self = (klast == 0) || (g_.n() % 2 == 0 && klast == g_.n() / 2);
            parseval_[static_cast<std::size_t>(q)] = self ? 1.0 : 2.0;
        }

        grad_.resize(static_cast<std::size_t>(np_) * g_.d);
        rvec_.resize(static_cast<std::size_t>(np_) * g_.d);
        w_.resize(static_cast<std::size_t>(np_));
        spec_.resize(static_cast<std::size_t>(ns));
        spec_cur_.resize(static_cast<std::size_t>(ns));
        if (flux.field && flux.field->kind() != EnvKind::Identity) {
            c_cache_.resize(static_cast<std::size_t>(np_));
            if (flux.field->kind() == EnvKind::ShiftedLinear)
                z_cache_.resize(static_cast<std::size_t>(np_) * g_.d);
        }
    }

    // refresh pointwise coefficient data for the implicit time level
    void load_slice(double t_next) {
        if (!flux_.field || flux_.field->kind() == EnvKind::Identity) return;
        const double inv_eps = 1.0 / flux_.epsilon;
        const double tau = t_next * inv_eps * inv_eps;
        double y[3];
        for (std::int64_t x = 0; x < np_; ++x) {
            for (int a = 0; a < g_.d; ++a) {
                const int ia = static_cast<int>((x / str_.s[a]) % g_.n());
                y[a] = (g_.coord(ia) + 0.5 * g_.h()) * inv_eps;
            }
            c_cache_[static_cast<std::size_t>(x)] = flux_.field->coefficient(y, tau);
            if (!z_cache_.empty()) flux_.field->drift(y, tau, &z_cache_[static_cast<std::size_t>(x) * g_.d]);
        }
    }

    void flux_at(std::int64_t x, const double* q, double* out, long* hull_warn) const {
        if (flux_.field) {
            static const double zz[3] = {0, 0, 0};
            const double c = c_cache_.empty() ? 1.0 : c_cache_[static_cast<std::size_t>(x)];
            const double* z = z_cache_.empty() ? zz : &z_cache_[static_cast<std::size_t>(x) * g_.d];
            env::flux_eval(flux_.field->kind(), flux_.field->params().delta, c, z, q, g_.d, out);
        } else {
            bool outside = false;
            VecN qq(g_.d, q);
            VecN v = flux_.law->eval(qq, &outside);
            if (outside && hull_warn) ++(*hull_warn);
            for (int a = 0; a < g_.d; ++a) out[a] = v[a];
        }
    }

    // one implicit Euler step; returns Picard iteration count
    int step(std::vector<double>& u, const std::vector<double>& rhs_const, long* hull_warn,
             int max_iters = 500) {
        const int d = g_.d;
        const double inv_h = g_.m;
        // spectrum of the current iterate
        fft_.forward(u.data(), spec_cur_.data());
        for (int it = 0; it < max_iters; ++it) {
            // w = rhs_const + div( a(Du) - cpre Du )
            for (int a = 0; a < d; ++a) {
                double* ga = grad_.data() + static_cast<std::int64_t>(a) * np_;
                for (std::int64_t x = 0; x < np_; ++x)
                    ga[x] = (u[static_cast<std::size_t>(str_.fwd(x, a))] - u[static_cast<std::size_t>(x)]) * inv_h;
            }
            double q[3], out[3];
            for (std::int64_t x = 0; x < np_; ++x) {
                for (int a = 0; a < d; ++a) q[a] = grad_[static_cast<std::size_t>(a * np_ + x)];
                flux_at(x, q, out, hull_warn);
                for (int a = 0; a < d; ++a)
                    rvec_[static_cast<std::size_t>(a * np_ + x)] = out[a] - cpre_ * q[a];
            }
            for (std::int64_t x = 0; x < np_; ++x) {
                double div = 0;
                for (int a = 0; a < d; ++a) {
                    const double* ra = rvec_.data() + static_cast<std::int64_t>(a) * np_;
                    div += (ra[x] - ra[str_.bwd(x, a)]) * inv_h;
                }
                w_[static_cast<std::size_t>(x)] = rhs_const[static_cast<std::size_t>(x)] + div;
            }
            fft_.forward(w_.data(), spec_.data());
            // residual of the current iterate in the dual norm
            double res2 = 0;
            for (std::size_t qi = 0; qi < spec_.size(); ++qi) {
                const std::complex<double> rq = bsym_[qi] * spec_cur_[qi] - spec_[qi];
                res2 += parseval_[qi] * std::norm(rq) / bsym_[qi];
            }
            const double res = std::sqrt(res2) / static_cast<double>(np_);
            if (res <= tol_) return it;
            for (std::size_t qi = 0; qi < spec_.size(); ++qi) spec_cur_[qi] = spec_[qi] * binv_[qi];
            fft_.backward(spec_cur_.data(), u.data());
        }
        throw ConvergenceError("parabolic step: no convergence", tol_);
    }

    const GridSpec& grid() const { return g_; }

  private:
    FluxModel flux_;
    ParabolicGeometry geom_;
    GridSpec g_;
    Strides str_;
    double tol_;
    TorusTransform fft_;
    double alpha_ = 1, beta_ = 1, cpre_ = 1;
    std::int64_t np_ = 0;
    std::vector<double> binv_, bsym_, parseval_;
    std::vector<double> grad_, rvec_, w_, c_cache_, z_cache_;
    std::vector<std::complex<double>> spec_, spec_cur_;
};

}  // namespace

std::vector<double> sample_initial(const GridSpec& g, const SpaceFn& u0) {
    std::vector<double> v(static_cast<std::size_t>(g.points()));
    const Strides str(g);
    double x[3];
    for (std::int64_t i = 0; i < g.points(); ++i) {
        for (int a = 0; a < g.d; ++a)
            x[a] = g.coord(static_cast<int>((i / str.s[a]) % g.n()));
        v[static_cast<std::size_t>(i)] = u0(x);
    }
    return v;
}

SolveReport solve_parabolic(const FluxModel& flux, const std::vector<double>& u0,
                            const SpaceTimeFn& f, const ParabolicGeometry& geom, double tol,
                            const PreStepHook& pre_step) {
    const GridSpec g = geom.grid();
    if (u0.size() != static_cast<std::size_t>(g.points()))
        throw std::invalid_argument("solve_parabolic: u0 size mismatch");
    const long nsteps = geom.steps();
    int store_every = geom.store_every;
    if (store_every <= 0) store_every = static_cast<int>(std::max<long>(1, nsteps / 32));
    // stored slices must be evenly spaced and include the final state
    while (store_every > 1 && nsteps % store_every != 0) --store_every;

    ParabolicStepper stepper(flux, geom, tol);
    SolveReport rep;
    rep.store_every = store_every;
    const std::int64_t slices = nsteps / store_every + 1;
    rep.trajectory = GridFunction(g, 1, slices, "u");
    rep.trajectory.dt = geom.dt * store_every;

    std::vector<double> u = u0;
    std::vector<double> rhs(u.size());
    auto s0 = rep.trajectory.slice(0, 0);
    std::copy(u.begin(), u.end(), s0.begin());
    {
        double l2 = 0;
        for (double v : u) l2 += v * v;
        rep.l2_history.push_back(std::sqrt(l2 * g.site_volume()));
    }

    const Strides str(g);
    std::int64_t stored = 1;
    double xbuf[3];
    for (long s = 0; s < nsteps; ++s) {
        const double t_next = (s + 1) * geom.dt;
        if (pre_step) pre_step(s, t_next);
        stepper.load_slice(t_next);
        for (std::int64_t x = 0; x < g.points(); ++x) {
            double fval = 0;
            if (f) {
                for (int a = 0; a < g.d; ++a)
                    xbuf[a] = g.coord(static_cast<int>((x / str.s[a]) % g.n()));
                fval = f(xbuf, t_next);
            }
            rhs[static_cast<std::size_t>(x)] = u[static_cast<std::size_t>(x)] / geom.dt + fval;
        }
        rep.picard_iterations.push_back(stepper.step(u, rhs, &rep.hull_warnings));
        double l2 = 0;
        for (double v : u) l2 += v * v;
        rep.l2_history.push_back(std::sqrt(l2 * g.site_volume()));
        if ((s + 1) % store_every == 0 && stored < slices) {
            auto dst = rep.trajectory.slice(stored, 0);
            std::copy(u.begin(), u.end(), dst.begin());
            ++stored;
        }
    }
    return rep;
}

SolveReport solve_oscillatory(const CoefficientField& field, double epsilon,
                              const std::vector<double>& u0, const SpaceTimeFn& f,
                              const ParabolicGeometry& geom, double tol) {
    FluxModel flux;
    flux.field = &field;
    flux.epsilon = epsilon;
    return solve_parabolic(flux, u0, f, geom, tol);
}

SolveReport solve_homogenized(const corrector::EffectiveLaw& law, const std::vector<double>& u0,
                              const SpaceTimeFn& f, const ParabolicGeometry& geom, double tol) {
    FluxModel flux;
    flux.law = &law;
    return solve_parabolic(flux, u0, f, geom, tol);
}

double weight_value(const GridSpec& g, std::int64_t site, double theta) {
    Strides str(g);
    double s = 1.0;
    for (int a = 0; a < g.d; ++a) {
        const double x = g.signed_coord(g.coord(static_cast<int>((site / str.s[a]) % g.n())));
        s += x * x;
    }
    return std::exp(-theta * std::sqrt(s));
}

WeightedErrorReport weighted_error(const GridFunction& u, const GridFunction& v, double theta) {
    if (!u.same_mesh(v)) throw std::invalid_argument("weighted_error: mesh mismatch");
    WeightedErrorReport rep;
    rep.theta = theta;
    const GridSpec& g = u.grid;
    std::vector<double> w(static_cast<std::size_t>(g.points()));
    for (std::int64_t i = 0; i < g.points(); ++i) w[static_cast<std::size_t>(i)] = weight_value(g, i, theta);
    double acc = 0;
    for (std::int64_t s = 0; s < u.steps; ++s) {
        auto us = u.slice(s, 0);
        auto vs = v.slice(s, 0);
        double e = 0;
        for (std::size_t i = 0; i < us.size(); ++i) {
            const double dlt = us[i] - vs[i];
            e += dlt * dlt * w[i];
        }
        e *= g.site_volume();
        rep.times.push_back(u.t0 + static_cast<double>(s) * u.dt);
        rep.per_time.push_back(std::sqrt(e));
        acc += e * (u.dt > 0 ? u.dt : 1.0);
    }
    rep.integrated = std::sqrt(acc);
    return rep;
}

double weighted_energy_functional(const GridFunction& traj, double theta) {
    const GridSpec& g = traj.grid;
    std::vector<double> w(static_cast<std::size_t>(g.points()));
    for (std::int64_t i = 0; i < g.points(); ++i) w[static_cast<std::size_t>(i)] = weight_value(g, i, theta);
    const Strides str(g);
    const double inv_h = g.m;
    double sup_u = 0, grad_acc = 0;
    for (std::int64_t s = 0; s < traj.steps; ++s) {
        auto us = traj.slice(s, 0);
        double unorm = 0, gnorm = 0;
        for (std::int64_t x = 0; x < g.points(); ++x) {
            unorm += us[static_cast<std::size_t>(x)] * us[static_cast<std::size_t>(x)] * w[static_cast<std::size_t>(x)];
            for (int a = 0; a < g.d; ++a) {
                const double dv = (us[static_cast<std::size_t>(str.fwd(x, a))] - us[static_cast<std::size_t>(x)]) * inv_h;
                gnorm += dv * dv * w[static_cast<std::size_t>(x)];
            }
        }
        sup_u = std::max(sup_u, unorm * g.site_volume());
        grad_acc += gnorm * g.site_volume() * (traj.dt > 0 ? traj.dt : 1.0);
    }
    return sup_u + grad_acc;
}

ConvergenceStudy convergence_study(const env::EnvParams& env_template,
                                   const corrector::EffectiveLaw& law,
                                   std::span<const double> epsilon_ladder, int n_seeds,
                                   std::uint64_t seed_base, const ParabolicGeometry& geom,
                                   const SpaceFn& u0, const SpaceTimeFn& f, double theta,
                                   double tol, int workers, double ratio_threshold) {
    const GridSpec g = geom.grid();
    const std::vector<double> u0v = sample_initial(g, u0);
    ConvergenceStudy study;
    study.epsilons.assign(epsilon_ladder.begin(), epsilon_ladder.end());
    const std::size_t ne = study.epsilons.size();
    study.per_seed.assign(ne, std::vector<double>(static_cast<std::size_t>(n_seeds), 0.0));

    // one homogenized reference per geometry (deterministic)
    auto ubar = solve_homogenized(law, u0v, f, geom, tol);

    parallel_for(n_seeds, workers, [&](int si) {
        env::EnvParams ep = env_template;
        ep.seed = seed_base + static_cast<std::uint64_t>(si);
        auto field = CoefficientField::build(ep);
        for (std::size_t ei = 0; ei < ne; ++ei) {
            auto ueps = solve_oscillatory(field, study.epsilons[ei], u0v, f, geom, tol);
            auto err = weighted_error(ueps.trajectory, ubar.trajectory, theta);
            study.per_seed[ei][static_cast<std::size_t>(si)] = err.integrated;
        }
    });

    int monotone_seeds = 0;
    for (int si = 0; si < n_seeds; ++si) {
        bool mono = true;
        for (std::size_t ei = 1; ei < ne; ++ei)
            mono = mono && (study.per_seed[ei][static_cast<std::size_t>(si)] <
                            study.per_seed[ei - 1][static_cast<std::size_t>(si)]);
        monotone_seeds += mono ? 1 : 0;
    }
    study.monotone_fraction = n_seeds > 0 ? static_cast<double>(monotone_seeds) / n_seeds : 0.0;

    for (std::size_t ei = 0; ei < ne; ++ei)
        study.errors.push_back(stats::mean_stderr(study.per_seed[ei]));
    study.ratio_pass = true;
    for (std::size_t ei = 1; ei < ne; ++ei) {
        const double ratio = study.errors[ei].mean / std::max(study.errors[ei - 1].mean, 1e-300);
        study.ratios.push_back(ratio);
        study.ratio_pass = study.ratio_pass && (ratio <= ratio_threshold);
    }
    study.monotone_pass = study.monotone_fraction >= 0.9;
    study.pass = study.ratio_pass && study.monotone_pass;
    return study;
}

}  // namespace parhom::multiscale
