#include "parhom/corrector.hpp"

#include <fftw3.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>

#include "json.hpp"
#include "parhom/fft.hpp"

namespace parhom::corrector {

using env::CoefficientField;
using env::EnvKind;

namespace {

bool field_time_dependent(const CoefficientField& f) {
    return f.params().temporal == env::TemporalStructure::RenewalJumps ||
           f.kind() == EnvKind::ShiftedLinear;
}

struct Strides {
    std::int64_t s[3];
    int n;
    int d;
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

// State for one periodic cell solve: preconditioner spectrum plus cached
// coefficient/drift slices at the staggered flux points.
class CellSolver {
  public:
    CellSolver(const CoefficientField& field, const VecN& p, double lambda,
               const CellGeometry& geom)
        : field_(field), p_(p), lambda_(lambda), geom_(geom), g_(geom.grid()), str_(g_) {
        nt_ = std::max(1, geom.time_slices);
        np_ = g_.points();
        ntot_ = nt_ * np_;
        dtc_ = geom.dt();
        alpha_ = field.monotone_const();
        beta_ = field.lipschitz_const();
        cpre_ = beta_ * beta_ / alpha_;

        std::vector<int> dims;
        dims.push_back(nt_);
        for (int a = 0; a < g_.d; ++a) dims.push_back(g_.n());
        fft_ = std::make_unique<TorusTransform>(dims);

        const std::int64_t ns = fft_->spec_size();
        symbol_.resize(static_cast<std::size_t>(ns));
        symbol_re_.resize(static_cast<std::size_t>(ns));
        parseval_.resize(static_cast<std::size_t>(ns));
        const double h2 = g_.h() * g_.h();
        std::vector<int> k(static_cast<std::size_t>(g_.d) + 1);
        const int n = g_.n();
        for (std::int64_t q = 0; q < ns; ++q) {
            fft_->freq(q, k.data());
            double re = lambda_;
            double im = 0.0;
            if (nt_ > 1) {
                const double th = 2.0 * M_PI * k[0] / nt_;
                re += lambda_ * (2.0 - 2.0 * std::cos(th)) / (dtc_ * dtc_);
                im += std::sin(th) / dtc_;
            }
            for (int a = 0; a < g_.d; ++a) {
                const double th = 2.0 * M_PI * k[static_cast<std::size_t>(a) + 1] / n;
                re += cpre_ * (2.0 - 2.0 * std::cos(th)) / h2;
            }
            symbol_[static_cast<std::size_t>(q)] = {re, im};
            symbol_re_[static_cast<std::size_t>(q)] = re;
            const int klast = k[static_cast<std::size_t>(g_.d)];
            const bool self = (klast == 0) || (n % 2 == 0 && klast == n / 2);
            parseval_[static_cast<std::size_t>(q)] = self ? 1.0 : 2.0;
        }
        cache_coefficients();
    }

    void stag_coord(std::int64_t x, double* y) const {
        for (int a = 0; a < g_.d; ++a) {
            const int ia = static_cast<int>((x / str_.s[a]) % g_.n());
            y[a] = (ia + 0.5) * g_.h();
        }
    }

    void cache_coefficients() {
        const bool needs_c = field_.kind() != EnvKind::Identity;
        const bool needs_z = field_.kind() == EnvKind::ShiftedLinear;
        c_cache_.assign(static_cast<std::size_t>(ntot_), 1.0);
        if (needs_z) z_cache_.assign(static_cast<std::size_t>(ntot_) * g_.d, 0.0);
        if (!needs_c && !needs_z) return;
        double y[3];
        for (int j = 0; j < nt_; ++j) {
            const double tau = j * dtc_;
            for (std::int64_t x = 0; x < np_; ++x) {
                stag_coord(x, y);
                const std::size_t idx = static_cast<std::size_t>(j * np_ + x);
                if (needs_c) c_cache_[idx] = field_.coefficient(y, tau);
                if (needs_z) field_.drift(y, tau, &z_cache_[idx * g_.d]);
            }
        }
    }

    void gradient(const std::vector<double>& chi, std::vector<double>& grad) const {
        const double inv_h = g_.m;
        for (int j = 0; j < nt_; ++j) {
            const double* u = chi.data() + static_cast<std::int64_t>(j) * np_;
            for (int a = 0; a < g_.d; ++a) {
                double* ga = grad.data() + (static_cast<std::int64_t>(j) * g_.d + a) * np_;
                for (std::int64_t x = 0; x < np_; ++x)
                    ga[x] = (u[str_.fwd(x, a)] - u[x]) * inv_h;
            }
        }
    }

    void flux_field(const std::vector<double>& grad, std::vector<double>& flux) const {
        const EnvKind kind = field_.kind();
        const double delta = field_.params().delta;
        const int d = g_.d;
        static const double zz[3] = {0, 0, 0};
        double q[3], out[3];
        for (int j = 0; j < nt_; ++j) {
            for (std::int64_t x = 0; x < np_; ++x) {
                const std::size_t idx = static_cast<std::size_t>(j * np_ + x);
                for (int a = 0; a < d; ++a)
                    q[a] = p_[a] + grad[(static_cast<std::size_t>(j) * d + a) * np_ + x];
                const double* z = z_cache_.empty() ? zz : &z_cache_[idx * d];
                env::flux_eval(kind, delta, c_cache_[idx], z, q, d, out);
                for (int a = 0; a < d; ++a)
                    flux[(static_cast<std::size_t>(j) * d + a) * np_ + x] = out[a];
            }
        }
    }

    // w = div(flux - cpre * grad)
    void divergence_rhs(const std::vector<double>& grad, const std::vector<double>& flux,
                        std::vector<double>& w) const {
        const double inv_h = g_.m;
        const int d = g_.d;
        for (int j = 0; j < nt_; ++j) {
            double* wj = w.data() + static_cast<std::int64_t>(j) * np_;
            std::fill(wj, wj + np_, 0.0);
            for (int a = 0; a < d; ++a) {
                const double* fa = flux.data() + (static_cast<std::int64_t>(j) * d + a) * np_;
                const double* ga = grad.data() + (static_cast<std::int64_t>(j) * d + a) * np_;
                for (std::int64_t x = 0; x < np_; ++x) {
                    const std::int64_t xb = str_.bwd(x, a);
                    const double rx = fa[x] - cpre_ * ga[x];
                    const double rb = fa[xb] - cpre_ * ga[xb];
                    wj[x] += (rx - rb) * inv_h;
                }
            }
        }
    }

    const CoefficientField& field_;
    VecN p_;
    double lambda_;
    CellGeometry geom_;
    GridSpec g_;
    Strides str_;
    int nt_ = 1;
    std::int64_t np_ = 0, ntot_ = 0;
    double dtc_ = 0.0, alpha_ = 1.0, beta_ = 1.0, cpre_ = 1.0;
    std::unique_ptr<TorusTransform> fft_;
    std::vector<std::complex<double>> symbol_;
    std::vector<double> symbol_re_, parseval_;
    std::vector<double> c_cache_, z_cache_;
};

}  // namespace

void cell_gradient(const GridSpec& g, std::span<const double> u, std::span<double> grad) {
    const Strides str(g);
    const double inv_h = g.m;
    const std::int64_t np = g.points();
    for (int a = 0; a < g.d; ++a) {
        double* ga = grad.data() + static_cast<std::int64_t>(a) * np;
        for (std::int64_t x = 0; x < np; ++x)
            ga[x] = (u[static_cast<std::size_t>(str.fwd(x, a))] - u[static_cast<std::size_t>(x)]) * inv_h;
    }
}

void cell_divergence(const GridSpec& g, std::span<const double> field, std::span<double> out) {
    const Strides str(g);
    const double inv_h = g.m;
    const std::int64_t np = g.points();
    std::fill(out.begin(), out.end(), 0.0);
    for (int a = 0; a < g.d; ++a) {
        const double* fa = field.data() + static_cast<std::int64_t>(a) * np;
        for (std::int64_t x = 0; x < np; ++x)
            out[static_cast<std::size_t>(x)] += (fa[x] - fa[str.bwd(x, a)]) * inv_h;
    }
}

CorrectorSolution solve_regularized_cell(const CoefficientField& field, const VecN& p,
                                         double lambda, const CellGeometry& geom,
                                         const SolveOptions& opts) {
    if (lambda <= 0) throw std::invalid_argument("corrector: lambda must be positive");
    if (field.dim() != geom.d) throw std::invalid_argument("corrector: dimension mismatch");
    if (geom.time_slices > 1 && geom.time_slices < 3)
        throw std::invalid_argument("corrector: time_slices must be 1 or >= 3");

    CellSolver S(field, p, lambda, geom);
    const std::int64_t ntot = S.ntot_;
    const std::int64_t nspec = S.fft_->spec_size();
    const int d = geom.d;

    std::vector<double> chi(static_cast<std::size_t>(ntot), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(ntot) * d, 0.0);
    std::vector<double> flux(static_cast<std::size_t>(ntot) * d, 0.0);
    std::vector<double> prev_grad, prev_flux;
    std::vector<double> w(static_cast<std::size_t>(ntot), 0.0);
    std::vector<std::complex<double>> what(static_cast<std::size_t>(nspec));
    std::vector<std::complex<double>> chihat(static_cast<std::size_t>(nspec), {0.0, 0.0});
    std::vector<std::complex<double>> chihat_new(static_cast<std::size_t>(nspec));

    CorrectorSolution sol;
    sol.p = p;
    sol.lambda = lambda;
    sol.geom = geom;

    const double norm = static_cast<double>(ntot);
    double residual = 0.0;
    int iter = 0;
    bool converged = false;
    for (; iter < opts.max_iters; ++iter) {
        S.gradient(chi, grad);
        S.flux_field(grad, flux);

        if (iter > 0) {
            double inner = 0, gn = 0;
            for (std::size_t i = 0; i < flux.size(); ++i) {
                const double df = flux[i] - prev_flux[i];
                const double dg = grad[i] - prev_grad[i];
                inner += df * dg;
                gn += dg * dg;
            }
            if (inner < -1e-10 * std::max(1.0, gn))
                throw MonotonicityError("corrector: flux increments violate monotonicity");
        }
        prev_grad = grad;
        prev_flux = flux;

        S.divergence_rhs(grad, flux, w);
        S.fft_->forward(w.data(), what.data());

        // exact residual at the current iterate: r = B(chi - B^{-1} w)
        double res2 = 0.0;
        for (std::int64_t q = 0; q < nspec; ++q) {
            const std::size_t qi = static_cast<std::size_t>(q);
            const auto rq = S.symbol_[qi] * chihat[qi] - what[qi];
            res2 += S.parseval_[qi] * std::norm(rq) / S.symbol_re_[qi];
        }
        residual = std::sqrt(res2) / norm;
        if (residual <= opts.tol) {
            converged = true;
            break;
        }

        double inc2 = 0.0;
        for (std::int64_t q = 0; q < nspec; ++q) {
            const std::size_t qi = static_cast<std::size_t>(q);
            chihat_new[qi] = what[qi] / S.symbol_[qi];
            inc2 += S.parseval_[qi] * S.symbol_re_[qi] * std::norm(chihat_new[qi] - chihat[qi]);
        }
        sol.iteration_energy.push_back(std::sqrt(inc2) / norm);
        chihat.swap(chihat_new);
        S.fft_->backward(chihat.data(), chi.data());
    }
    if (!converged)
        throw ConvergenceError("corrector: no convergence in " + std::to_string(opts.max_iters) +
                                   " iterations (residual " + std::to_string(residual) + ")",
                               residual);

    // chi is defined up to a constant; pin the cell average to zero
    double mean = 0;
    for (double v : chi) mean += v;
    mean /= norm;
    for (double& v : chi) v -= mean;

    S.gradient(chi, grad);
    S.flux_field(grad, flux);

    sol.iterations = iter;
    sol.residual_dual_norm = residual;

    const GridSpec g = geom.grid();
    const int nt = std::max(1, geom.time_slices);
    sol.chi = GridFunction(g, 1, nt, "chi");
    sol.chi.dt = geom.dt();
    std::copy(chi.begin(), chi.end(), sol.chi.values.begin());
    sol.grad_chi = GridFunction(g, d, nt, "Dchi");
    sol.grad_chi.dt = geom.dt();
    for (int j = 0; j < nt; ++j)
        for (int a = 0; a < d; ++a) {
            auto dst = sol.grad_chi.slice(j, a);
            const double* src = grad.data() + (static_cast<std::int64_t>(j) * d + a) * S.np_;
            std::copy(src, src + S.np_, dst.begin());
        }
    sol.flux = GridFunction(g, d, nt, "flux");
    sol.flux.dt = geom.dt();
    for (int j = 0; j < nt; ++j)
        for (int a = 0; a < d; ++a) {
            auto dst = sol.flux.slice(j, a);
            const double* src = flux.data() + (static_cast<std::int64_t>(j) * d + a) * S.np_;
            std::copy(src, src + S.np_, dst.begin());
        }

    sol.mean_flux = VecN(d);
    for (int a = 0; a < d; ++a) {
        double s = 0;
        for (int j = 0; j < nt; ++j) {
            const double* fa = flux.data() + (static_cast<std::int64_t>(j) * d + a) * S.np_;
            for (std::int64_t x = 0; x < S.np_; ++x) s += fa[x];
        }
        sol.mean_flux[a] = s / norm;
    }

    double e = 0;
    for (double v : chi) e += lambda * v * v;
    if (nt > 1) {
        const double inv2dt = 1.0 / (2.0 * geom.dt());
        for (int j = 0; j < nt; ++j) {
            const int jp = (j + 1) % nt, jm = (j + nt - 1) % nt;
            for (std::int64_t x = 0; x < S.np_; ++x) {
                const double dtv = (chi[static_cast<std::size_t>(jp * S.np_ + x)] -
                                    chi[static_cast<std::size_t>(jm * S.np_ + x)]) *
                                   inv2dt;
                e += lambda * dtv * dtv;
            }
        }
    }
    for (double v : grad) e += v * v;
    sol.lambda_energy = e / norm;
    return sol;
}

EffectiveEstimate estimate_effective(const CoefficientField& field, const VecN& p,
                                     std::span<const double> lambda_ladder,
                                     std::span<const int> cell_ladder, int m,
                                     const SolveOptions& opts, double want_tol) {
    if (lambda_ladder.empty() || cell_ladder.empty())
        throw std::invalid_argument("estimate_effective: empty ladder");
    std::vector<double> lambdas(lambda_ladder.begin(), lambda_ladder.end());
    std::vector<int> cells(cell_ladder.begin(), cell_ladder.end());
    std::sort(lambdas.rbegin(), lambdas.rend());
    std::sort(cells.begin(), cells.end());
    const bool timedep = field_time_dependent(field);

    EffectiveEstimate out;
    for (int L : cells) {
        for (double lam : lambdas) {
            CellGeometry geom;
            geom.d = field.dim();
            geom.cells = L;
            geom.m = m;
            if (timedep) {
                geom.time_extent = L;
                geom.time_slices = std::max(4, L * opts.slices_per_unit_time);
            }
            auto sol = solve_regularized_cell(field, p, lam, geom, opts);
            out.records.push_back({lam, L, sol.mean_flux});
        }
    }
    out.abar = out.records.back().abar;

    const std::size_t nl = lambdas.size();
    std::vector<VecN> corner;
    for (std::size_t ci = cells.size() >= 2 ? cells.size() - 2 : 0; ci < cells.size(); ++ci)
        for (std::size_t li = nl >= 2 ? nl - 2 : 0; li < nl; ++li)
            corner.push_back(out.records[ci * nl + li].abar);
    double err = 0;
    for (std::size_t i = 0; i < corner.size(); ++i)
        for (std::size_t j = i + 1; j < corner.size(); ++j)
            for (int a = 0; a < field.dim(); ++a)
                err = std::max(err, std::abs(corner[i][a] - corner[j][a]));
    out.error_estimate = err;
    out.within_tol = (want_tol <= 0) || (err <= want_tol);
    return out;
}

double flux_orthogonality(const CorrectorSolution& sol) {
    const auto& f = sol.flux.values;
    const auto& g = sol.grad_chi.values;
    double inner = 0, nf = 0, ng = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        inner += f[i] * g[i];
        nf += f[i] * f[i];
        ng += g[i] * g[i];
    }
    const double n = static_cast<double>(sol.chi.values.size());
    inner /= n;
    nf = std::sqrt(nf / n);
    ng = std::sqrt(ng / n);
    return inner / (nf * ng + 1e-300);
}

std::vector<SublinearityRow> sublinearity_diagnostic(const CoefficientField& field, const VecN& p,
                                                     std::span<const double> R_ladder,
                                                     double lambda, const CellGeometry& geom,
                                                     const SolveOptions& opts) {
    auto sol = solve_regularized_cell(field, p, lambda, geom, opts);
    const GridSpec g = geom.grid();
    const int nt = std::max(1, geom.time_slices);
    const int d = g.d;
    const double center = g.side() / 2.0;
    const double tcenter = geom.is_static() ? 0.0 : geom.time_extent / 2.0;

    std::vector<SublinearityRow> rows;
    for (double R : R_ladder) {
        if (R > g.side()) throw std::invalid_argument("sublinearity: window exceeds cell");
        std::vector<int> axis_idx;
        for (int i = 0; i < g.n(); ++i) {
            const double c = g.coord(i);
            if (c >= center - R / 2 - 1e-12 && c < center + R / 2 - 1e-12) axis_idx.push_back(i);
        }
        std::vector<int> slice_idx;
        if (geom.is_static()) {
            slice_idx.push_back(0);
        } else {
            for (int j = 0; j < nt; ++j) {
                const double t = j * geom.dt();
                if (t >= tcenter - R / 2 - 1e-12 && t < tcenter + R / 2 - 1e-12)
                    slice_idx.push_back(j);
            }
        }
        const double dv = g.site_volume();
        const double dtw = geom.is_static() ? R : geom.dt();
        const int center_slice = geom.is_static() ? 0 : nt / 2;

        double st = 0, t0 = 0;
        const std::int64_t nax = static_cast<std::int64_t>(axis_idx.size());
        std::int64_t win = 1;
        for (int a = 0; a < d; ++a) win *= nax;
        for (std::int64_t q = 0; q < win; ++q) {
            std::int64_t rem = q;
            int idx[3] = {0, 0, 0};
            for (int a = d - 1; a >= 0; --a) {
                idx[a] = axis_idx[static_cast<std::size_t>(rem % nax)];
                rem /= nax;
            }
            const std::int64_t site = g.flat(idx);
            for (int j : slice_idx) {
                const double v = sol.chi.at(j, 0, site);
                st += v * v * dv * dtw;
            }
            const double v0 = sol.chi.at(center_slice, 0, site);
            t0 += v0 * v0 * dv;
        }
        rows.push_back({R, st / std::pow(R, d + 3), t0 / std::pow(R, d + 2)});
    }
    return rows;
}

// --- effective law ----------------------------------------------------------

std::int64_t EffectiveLaw::grid_size() const {
    std::int64_t n = 1;
    for (const auto& ax : axes) n *= static_cast<std::int64_t>(ax.size());
    return n;
}

VecN EffectiveLaw::eval(const VecN& grad, bool* outside_hull) const {
    if (outside_hull) *outside_hull = false;
    int lo[3] = {0, 0, 0};
    double t[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a) {
        const auto& ax = axes[static_cast<std::size_t>(a)];
        const int na = static_cast<int>(ax.size());
        if (na == 1) continue;
        int i = static_cast<int>(std::upper_bound(ax.begin(), ax.end(), grad[a]) - ax.begin()) - 1;
        i = std::clamp(i, 0, na - 2);
        lo[a] = i;
        t[a] = (grad[a] - ax[static_cast<std::size_t>(i)]) /
               (ax[static_cast<std::size_t>(i) + 1] - ax[static_cast<std::size_t>(i)]);
        if ((t[a] < -1e-12 || t[a] > 1.0 + 1e-12) && outside_hull) *outside_hull = true;
    }
    VecN out(d);
    const int corners = 1 << d;
    for (int cbit = 0; cbit < corners; ++cbit) {
        double wgt = 1.0;
        std::int64_t flat = 0;
        bool skip = false;
        for (int a = 0; a < d; ++a) {
            const auto& ax = axes[static_cast<std::size_t>(a)];
            const int na = static_cast<int>(ax.size());
            const int hi_bit = (cbit >> a) & 1;
            if (na == 1) {
                if (hi_bit) skip = true;
                flat = flat * na;
                continue;
            }
            wgt *= hi_bit ? t[a] : (1.0 - t[a]);
            flat = flat * na + lo[a] + hi_bit;
        }
        if (skip) continue;
        const VecN& v = values[static_cast<std::size_t>(flat)];
        for (int a = 0; a < d; ++a) out[a] += wgt * v[a];
    }
    return out;
}

namespace {
LawCertificates certify_table(int d, const std::vector<VecN>& pts, const std::vector<VecN>& vals,
                              double cert_tol) {
    LawCertificates cert;
    cert.monotone_min = 1e300;
    cert.lipschitz_max = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double dp2 = 0, inner = 0, da2 = 0;
            for (int a = 0; a < d; ++a) {
                const double dp = pts[i][a] - pts[j][a];
                const double da = vals[i][a] - vals[j][a];
                dp2 += dp * dp;
                inner += da * dp;
                da2 += da * da;
            }
            if (dp2 < 1e-24) continue;
            cert.monotone_min = std::min(cert.monotone_min, inner / dp2);
            cert.lipschitz_max = std::max(cert.lipschitz_max, std::sqrt(da2 / dp2));
        }
    if (pts.size() < 2) {
        cert.monotone_min = 0;
        cert.lipschitz_max = 0;
    }
    cert.pass = cert.monotone_min >= -cert_tol;
    return cert;
}

std::vector<VecN> tensor_points(const std::vector<std::vector<double>>& axes) {
    const int d = static_cast<int>(axes.size());
    std::int64_t total = 1;
    for (const auto& ax : axes) total *= static_cast<std::int64_t>(ax.size());
    std::vector<VecN> pts;
    for (std::int64_t q = 0; q < total; ++q) {
        std::int64_t rem = q;
        VecN p(d);
        for (int a = d - 1; a >= 0; --a) {
            const auto& ax = axes[static_cast<std::size_t>(a)];
            p[a] = ax[static_cast<std::size_t>(rem % static_cast<std::int64_t>(ax.size()))];
            rem /= static_cast<std::int64_t>(ax.size());
        }
        pts.push_back(p);
    }
    return pts;
}
}  // namespace

EffectiveLaw build_effective_law(const CoefficientField& field,
                                 const std::vector<std::vector<double>>& p_axes,
                                 std::span<const double> lambda_ladder,
                                 std::span<const int> cell_ladder, int m,
                                 const SolveOptions& opts, double cert_tol) {
    const int d = field.dim();
    if (static_cast<int>(p_axes.size()) != d)
        throw std::invalid_argument("build_effective_law: need one p-axis per dimension");
    for (const auto& ax : p_axes)
        if (ax.empty()) throw std::invalid_argument("build_effective_law: empty p-axis");

    EffectiveLaw law;
    law.d = d;
    law.axes = p_axes;
    auto pts = tensor_points(p_axes);
    nlohmann::json prov;
    prov["lambda_ladder"] = std::vector<double>(lambda_ladder.begin(), lambda_ladder.end());
    prov["cell_ladder"] = std::vector<int>(cell_ladder.begin(), cell_ladder.end());
    prov["m"] = m;
    prov["error_estimates"] = nlohmann::json::array();
    for (const auto& p : pts) {
        auto est = estimate_effective(field, p, lambda_ladder, cell_ladder, m, opts);
        law.values.push_back(est.abar);
        prov["error_estimates"].push_back(est.error_estimate);
    }
    law.certificates = certify_table(d, pts, law.values, cert_tol);
    law.provenance_json = prov.dump();
    return law;
}

EffectiveLaw EffectiveLaw::from_table(std::vector<std::vector<double>> axes,
                                      std::vector<VecN> values) {
    EffectiveLaw law;
    law.d = static_cast<int>(axes.size());
    law.axes = std::move(axes);
    law.values = std::move(values);
    law.certificates = certify_table(law.d, tensor_points(law.axes), law.values, 1e-8);
    return law;
}

std::string EffectiveLaw::to_json_string() const {
    nlohmann::json j;
    j["d"] = d;
    j["axes"] = axes;
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& v : values) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < d; ++a) row.push_back(v[a]);
        vals.push_back(row);
    }
    j["abar_values"] = vals;
    j["certificates"] = {{"monotone_min", certificates.monotone_min},
                         {"lipschitz_max", certificates.lipschitz_max},
                         {"pass", certificates.pass}};
    j["provenance"] = nlohmann::json::parse(provenance_json);
    return j.dump(2);
}

EffectiveLaw EffectiveLaw::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EffectiveLaw law;
    law.d = j.at("d").get<int>();
    law.axes = j.at("axes").get<std::vector<std::vector<double>>>();
    for (const auto& row : j.at("abar_values")) {
        VecN v(law.d);
        for (int a = 0; a < law.d; ++a) v[a] = row.at(static_cast<std::size_t>(a)).get<double>();
        law.values.push_back(v);
    }
    law.certificates.monotone_min = j.at("certificates").at("monotone_min").get<double>();
    law.certificates.lipschitz_max = j.at("certificates").at("lipschitz_max").get<double>();
    law.certificates.pass = j.at("certificates").at("pass").get<bool>();
    law.provenance_json = j.at("provenance").dump();
    return law;
}

// --- zero-boundary weighted box ----------------------------------------------

namespace {
void dst_axis_inplace(std::vector<double>& data, std::int64_t nsp, int ni, int stride,
                      fftw_plan plan, std::vector<double>& buf) {
    // apply a 1D RODFT00 along the axis whose stride is given, over one slice
    const std::int64_t lines = nsp / ni;
    for (std::int64_t line = 0; line < lines; ++line) {
        // decompose line id into (outer, inner) around the strided axis
        const std::int64_t inner = line % stride;
        const std::int64_t outer = line / stride;
        const std::int64_t base = outer * static_cast<std::int64_t>(stride) * ni + inner;
        for (int i = 0; i < ni; ++i)
            buf[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(base + static_cast<std::int64_t>(i) * stride)];
        fftw_execute_r2r(plan, buf.data(), buf.data());
        for (int i = 0; i < ni; ++i)
            data[static_cast<std::size_t>(base + static_cast<std::int64_t>(i) * stride)] = buf[static_cast<std::size_t>(i)];
    }
}
}  // namespace

WeightedBoxReport solve_weighted_box(const CoefficientField& field, const VecN& p, double lambda,
                                     int L, int m, int time_slices, double theta,
                                     const SolveOptions& opts) {
    const int d = field.dim();
    if (time_slices < 2) throw std::invalid_argument("weighted box: time_slices >= 2");
    if (lambda <= 0) throw std::invalid_argument("weighted box: lambda must be positive");
    const int ni = L * m - 1;
    const int mt = time_slices - 1;
    const double h = 1.0 / m;
    const double dtb = static_cast<double>(L) / time_slices;
    const double cpre = field.lipschitz_const() * field.lipschitz_const() / field.monotone_const();

    std::int64_t nsp = 1;
    for (int a = 0; a < d; ++a) nsp *= ni;
    const std::int64_t ntot = nsp * mt;

    auto coord = [&](int i) { return -0.5 * L + (i + 1) * h; };
    auto tcoord = [&](int j) { return -0.5 * L + (j + 1) * dtb; };

    std::vector<double> buf(static_cast<std::size_t>(ni));
    fftw_plan dst_plan = fftw_plan_r2r_1d(ni, buf.data(), buf.data(), FFTW_RODFT00, FFTW_ESTIMATE);
    std::vector<double> eig(static_cast<std::size_t>(ni));
    for (int k = 0; k < ni; ++k)
        eig[static_cast<std::size_t>(k)] = (2.0 - 2.0 * std::cos(M_PI * (k + 1) / (ni + 1))) / (h * h);

    std::vector<double> u(static_cast<std::size_t>(ntot), 0.0);
    std::vector<double> w(static_cast<std::size_t>(ntot), 0.0);

    auto interior_index = [&](const int* idx) {
        std::int64_t f = 0;
        for (int a = 0; a < d; ++a) f = f * ni + idx[a];
        return f;
    };
    // value on the closed grid, zero outside the interior; idx_closed in [0, L*m]
    auto uval = [&](const std::vector<double>& vec, int j, const int* idx_closed) -> double {
        int idx[3];
        for (int a = 0; a < d; ++a) {
            if (idx_closed[a] <= 0 || idx_closed[a] > ni) return 0.0;
            idx[a] = idx_closed[a] - 1;
        }
        return vec[static_cast<std::size_t>(static_cast<std::int64_t>(j) * nsp + interior_index(idx))];
    };

    // flux at the edge whose low corner (closed index) is given
    auto edge_flux = [&](const std::vector<double>& uu, int j, const int* idxc, double* out) {
        double q[3];
        for (int b = 0; b < d; ++b) {
            int nb[3] = {idxc[0], idxc[1], idxc[2]};
            nb[b] += 1;
            q[b] = p[b] + (uval(uu, j, nb) - uval(uu, j, idxc)) / h;
        }
        double y[3];
        for (int b = 0; b < d; ++b) y[b] = -0.5 * L + idxc[b] * h + 0.5 * h;
        double z[3] = {0, 0, 0};
        if (field.kind() == EnvKind::ShiftedLinear) field.drift(y, tcoord(j), z);
        const double c = field.coefficient(y, tcoord(j));
        env::flux_eval(field.kind(), field.params().delta, c, z, q, d, out);
        for (int b = 0; b < d; ++b) out[b] -= cpre * (q[b] - p[b]);
    };

    auto assemble_rhs = [&](const std::vector<double>& uu) {
        double fx[3];
        for (int j = 0; j < mt; ++j) {
            for (std::int64_t x = 0; x < nsp; ++x) {
                std::int64_t rem = x;
                int idx[3] = {0, 0, 0};
                for (int a = d - 1; a >= 0; --a) {
                    idx[a] = static_cast<int>(rem % ni);
                    rem /= ni;
                }
                double div = 0;
                for (int a = 0; a < d; ++a) {
                    int idxc[3];
                    for (int b = 0; b < d; ++b) idxc[b] = idx[b] + 1;
                    edge_flux(uu, j, idxc, fx);
                    div += fx[a] / h;
                    idxc[a] -= 1;
                    edge_flux(uu, j, idxc, fx);
                    div -= fx[a] / h;
                }
                w[static_cast<std::size_t>(static_cast<std::int64_t>(j) * nsp + x)] = div;
            }
        }
    };

    std::vector<double> dl(static_cast<std::size_t>(mt)), dd(static_cast<std::size_t>(mt)),
        du(static_cast<std::size_t>(mt)), rhs(static_cast<std::size_t>(mt));
    auto apply_binv = [&](std::vector<double>& vec) {
        for (int j = 0; j < mt; ++j) {
            double* slice = vec.data() + static_cast<std::int64_t>(j) * nsp;
            std::vector<double> tmp(slice, slice + nsp);
            for (int a = 0; a < d; ++a) {
                int stride = 1;
                for (int b = a + 1; b < d; ++b) stride *= ni;
                dst_axis_inplace(tmp, nsp, ni, stride, dst_plan, buf);
            }
            std::copy(tmp.begin(), tmp.end(), slice);
        }
        for (std::int64_t x = 0; x < nsp; ++x) {
            std::int64_t rem = x;
            double lam_s = 0;
            for (int a = d - 1; a >= 0; --a) {
                lam_s += eig[static_cast<std::size_t>(rem % ni)];
                rem /= ni;
            }
            for (int j = 0; j < mt; ++j) {
                dd[static_cast<std::size_t>(j)] = lambda + 2 * lambda / (dtb * dtb) + cpre * lam_s;
                dl[static_cast<std::size_t>(j)] = -lambda / (dtb * dtb) - 1.0 / (2 * dtb);
                du[static_cast<std::size_t>(j)] = -lambda / (dtb * dtb) + 1.0 / (2 * dtb);
                rhs[static_cast<std::size_t>(j)] =
                    vec[static_cast<std::size_t>(static_cast<std::int64_t>(j) * nsp + x)];
            }
            const int info = LAPACKE_dgtsv(LAPACK_COL_MAJOR, mt, 1, dl.data() + 1, dd.data(),
                                           du.data(), rhs.data(), mt);
            if (info != 0) throw std::runtime_error("weighted box: tridiagonal solve failed");
            for (int j = 0; j < mt; ++j)
                vec[static_cast<std::size_t>(static_cast<std::int64_t>(j) * nsp + x)] =
                    rhs[static_cast<std::size_t>(j)];
        }
        const double scale = 1.0 / std::pow(2.0 * (ni + 1), d);
        for (int j = 0; j < mt; ++j) {
            double* slice = vec.data() + static_cast<std::int64_t>(j) * nsp;
            std::vector<double> tmp(slice, slice + nsp);
            for (int a = 0; a < d; ++a) {
                int stride = 1;
                for (int b = a + 1; b < d; ++b) stride *= ni;
                dst_axis_inplace(tmp, nsp, ni, stride, dst_plan, buf);
            }
            for (std::int64_t x = 0; x < nsp; ++x)
                slice[x] = tmp[static_cast<std::size_t>(x)] * scale;
        }
    };

    WeightedBoxReport rep;
    double last_inc = 1e300;
    int iter = 0;
    std::vector<double> unew;
    for (; iter < opts.max_iters; ++iter) {
        assemble_rhs(u);
        unew = w;
        apply_binv(unew);
        double inc2 = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double dvi = unew[i] - u[i];
            inc2 += dvi * dvi;
        }
        u.swap(unew);
        last_inc = std::sqrt(inc2 / static_cast<double>(ntot));
        if (last_inc <= opts.tol) break;
    }
    fftw_destroy_plan(dst_plan);
    if (last_inc > opts.tol) throw ConvergenceError("weighted box: no convergence", last_inc);
    rep.iterations = iter + 1;
    rep.residual = last_inc;

    auto weight = [&](const double* y, double t) {
        double s = 1.0 + t * t;
        for (int a = 0; a < d; ++a) s += y[a] * y[a];
        return std::exp(-theta * std::sqrt(s));
    };
    double energy = 0, rhsw = 0;
    const double vol = std::pow(h, d) * dtb;
    for (int j = 0; j < mt; ++j) {
        for (std::int64_t x = 0; x < nsp; ++x) {
            std::int64_t rem = x;
            int idx[3] = {0, 0, 0};
            double y[3] = {0, 0, 0};
            for (int a = d - 1; a >= 0; --a) {
                idx[a] = static_cast<int>(rem % ni);
                rem /= ni;
            }
            for (int a = 0; a < d; ++a) y[a] = coord(idx[a]);
            const double t = tcoord(j);
            const double rho = weight(y, t);
            const double uv = u[static_cast<std::size_t>(static_cast<std::int64_t>(j) * nsp + x)];
            double g2 = 0;
            for (int a = 0; a < d; ++a) {
                int idxc[3];
                for (int b = 0; b < d; ++b) idxc[b] = idx[b] + 1;
                idxc[a] += 1;
                const double up = uval(u, j, idxc);
                const double dg = (up - uv) / h;
                g2 += dg * dg;
            }
            const double upj =
                (j + 1 < mt) ? u[static_cast<std::size_t>((static_cast<std::int64_t>(j) + 1) * nsp + x)] : 0.0;
            const double umj =
                (j - 1 >= 0) ? u[static_cast<std::size_t>((static_cast<std::int64_t>(j) - 1) * nsp + x)] : 0.0;
            const double dtu = (upj - umj) / (2 * dtb);
            energy += (lambda * uv * uv + lambda * dtu * dtu + g2) * rho * vol;
            double a0[3], zero[3] = {0, 0, 0};
            field.evaluate(zero, y, t, a0);
            double a0n = 0;
            for (int a = 0; a < d; ++a) a0n += a0[a] * a0[a];
            rhsw += a0n * rho * vol;
        }
    }
    rep.weighted_energy = energy;
    rep.weighted_rhs = 1.0 + rhsw;
    rep.ratio = energy / rep.weighted_rhs;
    return rep;
}

}  // namespace parhom::corrector
