#include "parhom/spde.hpp"

#include <cmath>
#include <stdexcept>

#include "parhom/parallel.hpp"
#include "parhom/rng.hpp"

namespace parhom::spde {

namespace {
constexpr std::uint64_t kNoiseStream = 7001;

std::uint64_t zw(long v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }

int wrap_cell(long c, int cells) {
    long r = c % cells;
    return static_cast<int>(r < 0 ? r + cells : r);
}
}  // namespace

double BumpSpec::value(const double* x, int d) const {
    double r2 = 0;
    for (int a = 0; a < d; ++a) r2 += x[a] * x[a];
    const double s = r2 / (r0 * r0);
    if (s >= 1.0) return 0.0;
    return kappa * std::exp(-1.0 / (1.0 - s));
}

double NoiseRealization::increment(const int* site, long step, int comp) const {
    if (step < active_lo || step >= active_hi) return 0.0;
    int s[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a) s[a] = wrap_cell(site[a] + site_offset[a], cells);
    const std::uint64_t h = rng::key(seed, kNoiseStream, zw(s[0]), zw(s[1]), zw(s[2]), zw(step),
                                     static_cast<std::uint64_t>(comp));
    return std::sqrt(dt) * rng::gaussian(h);
}

namespace {

// (I - dt*Laplacian_h)^{-1} via the FFT-diagonalized finite-difference symbol.
class HeatStepper {
  public:
    HeatStepper(const GridSpec& g, double dt)
        : grid_(g), fft_(std::vector<int>(static_cast<std::size_t>(g.d), g.n())) {
        mult_.resize(static_cast<std::size_t>(fft_.spec_size()));
        spec_.resize(static_cast<std::size_t>(fft_.spec_size()));
        const double h2 = g.h() * g.h();
        const int n = g.n();
        int k[3] = {0, 0, 0};
        for (std::int64_t i = 0; i < fft_.spec_size(); ++i) {
            fft_.freq(i, k);
            double lam = 0;
            for (int a = 0; a < g.d; ++a)
                lam += (2.0 - 2.0 * std::cos(2.0 * M_PI * k[a] / n)) / h2;
            mult_[static_cast<std::size_t>(i)] = 1.0 / (1.0 + dt * lam);
        }
    }

    void apply(std::vector<double>& v) {
        fft_.forward(v.data(), spec_.data());
        for (std::int64_t i = 0; i < fft_.spec_size(); ++i)
            spec_[static_cast<std::size_t>(i)] *= mult_[static_cast<std::size_t>(i)];
        fft_.backward(spec_.data(), v.data());
    }

  private:
    GridSpec grid_;
    TorusTransform fft_;
    std::vector<double> mult_;
    std::vector<std::complex<double>> spec_;
};

// Per-step forcing sum_k A(x-k) . dB^k over the included sites.  The bump
// values on grid offsets are precomputed; site order is fixed so runs are
// bit-reproducible and a filter admitting every site is arithmetically
// identical to the unfiltered sum.
class ForcingAssembler {
  public:
    ForcingAssembler(const GridSpec& g, const BumpSpec& bump, const SiteFilter& filter)
        : grid_(g) {
        reach_ = static_cast<int>(std::ceil(bump.r0 * g.m)) - 1;
        if (reach_ < 0) reach_ = 0;
        const int w = 2 * reach_ + 1;
        int wbox = 1;
        for (int a = 0; a < g.d; ++a) wbox *= w;
        stencil_.resize(static_cast<std::size_t>(wbox));
        for (int q = 0; q < wbox; ++q) {
            int rem = q;
            double x[3] = {0, 0, 0};
            for (int a = g.d - 1; a >= 0; --a) {
                x[a] = (rem % w - reach_) * g.h();
                rem /= w;
            }
            stencil_[static_cast<std::size_t>(q)] = bump.value(x, g.d);
        }
        // Included sites, ascending flat cell order.
        const int C = g.cells;
        long ncells = 1;
        for (int a = 0; a < g.d; ++a) ncells *= C;
        for (long c = 0; c < ncells; ++c) {
            int cc[3] = {0, 0, 0};
            long rem = c;
            for (int a = g.d - 1; a >= 0; --a) {
                cc[a] = static_cast<int>(rem % C);
                rem /= C;
            }
            if (filter.enabled) {
                double dist2 = 0;
                for (int a = 0; a < g.d; ++a) {
                    int dd = std::abs(cc[a] - filter.center[a]);
                    dd = std::min(dd, C - dd);
                    dist2 += static_cast<double>(dd) * dd;
                }
                if (dist2 > filter.radius * filter.radius) continue;
            }
            sites_.insert(sites_.end(), {cc[0], cc[1], cc[2]});
        }
    }

    void add(const NoiseSource& noise, long step, std::vector<double>& f) const {
        const int d = grid_.d;
        const int n = grid_.n();
        const int w = 2 * reach_ + 1;
        for (std::size_t si = 0; si + 2 < sites_.size() + 2 && si < sites_.size(); si += 3) {
            const int* cc = &sites_[si];
            double db = 0;
            for (int i = 0; i < d; ++i) db += noise.increment(cc, step, i);
            if (db == 0.0) continue;
            // base grid index of the site center
            int base[3];
            for (int a = 0; a < d; ++a) base[a] = cc[a] * grid_.m;
            int off[3] = {0, 0, 0};
            const int wbox = static_cast<int>(stencil_.size());
            for (int q = 0; q < wbox; ++q) {
                const double a_val = stencil_[static_cast<std::size_t>(q)];
                if (a_val != 0.0) {
                    std::int64_t flat = 0;
                    int rem = q;
                    for (int a = 0; a < d; ++a) {
                        int div = 1;
                        for (int b = a + 1; b < d; ++b) div *= w;
                        off[a] = (rem / div) - reach_;
                        rem %= div;
                        int idx = base[a] + off[a];
                        if (idx < 0) idx += n;
                        if (idx >= n) idx -= n;
                        flat = flat * n + idx;
                    }
                    f[static_cast<std::size_t>(flat)] += a_val * db;
                }
            }
        }
    }

  private:
    GridSpec grid_;
    int reach_ = 0;
    std::vector<double> stencil_;
    std::vector<int> sites_;
};

void check_finite(const std::vector<double>& v, long step) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error("spde: non-finite state at step " + std::to_string(step));
}

}  // namespace

void simulate(const SimOptions& opt, const NoiseSource& noise, std::vector<double>& v,
              const Observer& observer) {
    if (opt.dt <= 0) throw std::invalid_argument("spde: dt must be positive");
    if (v.size() != static_cast<std::size_t>(opt.grid.points()))
        throw std::invalid_argument("spde: state size mismatch");
    HeatStepper stepper(opt.grid, opt.dt);
    ForcingAssembler forcing(opt.grid, opt.bump, opt.filter);
    std::vector<double> f(v.size());
    for (long s = 0; s < opt.nsteps; ++s) {
        const long step = opt.step0 + s;
        std::fill(f.begin(), f.end(), 0.0);
        forcing.add(noise, step, f);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += f[i];
        stepper.apply(v);
        if ((s & 255) == 255) check_finite(v, step);
        if (observer) observer(step + 1, (step + 1) * opt.dt, v);
    }
    check_finite(v, opt.step0 + opt.nsteps);
}

GridFunction simulate_trajectory(const SimOptions& opt, const NoiseSource& noise,
                                 const std::vector<double>* v_init, int store_every,
                                 const char* tag) {
    if (store_every < 1) store_every = 1;
    const std::int64_t slices = opt.nsteps / store_every + 1;
    GridFunction traj(opt.grid, 1, slices, tag);
    traj.dt = opt.dt * store_every;
    traj.t0 = opt.step0 * opt.dt;
    std::vector<double> v(static_cast<std::size_t>(opt.grid.points()), 0.0);
    if (v_init) v = *v_init;
    auto s0 = traj.slice(0, 0);
    std::copy(v.begin(), v.end(), s0.begin());
    std::int64_t stored = 1;
    simulate(opt, noise, v, [&](long step, double, std::span<const double> state) {
        const long done = step - opt.step0;
        if (done % store_every == 0 && stored < slices) {
            auto dst = traj.slice(stored, 0);
            std::copy(state.begin(), state.end(), dst.begin());
            ++stored;
        }
    });
    return traj;
}

// --- measurements ----------------------------------------------------------

double mean(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double mean_sq(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s / static_cast<double>(v.size());
}

double mean_sq_fluctuation(std::span<const double> v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

namespace {
template <typename F>
void for_each_grad(const GridSpec& g, F&& f) {
    const int n = g.n();
    const std::int64_t np = g.points();
    std::int64_t stride[3];
    std::int64_t s = 1;
    for (int a = g.d - 1; a >= 0; --a) {
        stride[a] = s;
        s *= n;
    }
    for (std::int64_t x = 0; x < np; ++x) {
        for (int a = 0; a < g.d; ++a) {
            const int ia = static_cast<int>((x / stride[a]) % n);
            const std::int64_t nb = (ia == n - 1) ? x - (n - 1) * stride[a] : x + stride[a];
            f(x, a, nb);
        }
    }
}
}  // namespace

double mean_grad_sq(const GridSpec& g, std::span<const double> v) {
    const double inv_h = g.m;
    double s = 0;
    for_each_grad(g, [&](std::int64_t x, int, std::int64_t nb) {
        const double dv = (v[static_cast<std::size_t>(nb)] - v[static_cast<std::size_t>(x)]) * inv_h;
        s += dv * dv;
    });
    return s / static_cast<double>(g.points());
}

double mean_grad_diff_sq(const GridSpec& g, std::span<const double> a, std::span<const double> b) {
    const double inv_h = g.m;
    double s = 0;
    for_each_grad(g, [&](std::int64_t x, int, std::int64_t nb) {
        const double da = (a[static_cast<std::size_t>(nb)] - a[static_cast<std::size_t>(x)]) * inv_h;
        const double db = (b[static_cast<std::size_t>(nb)] - b[static_cast<std::size_t>(x)]) * inv_h;
        s += (da - db) * (da - db);
    });
    return s / static_cast<double>(g.points());
}

double mean_grad_diff_sq_cell(const GridSpec& g, std::span<const double> a,
                              std::span<const double> b, const std::array<int, 3>& l) {
    const int n = g.n();
    const int m = g.m;
    const double inv_h = m;
    std::int64_t count = 0;
    double s = 0;
    int idx[3] = {0, 0, 0};
    long pts = 1;
    for (int ax = 0; ax < g.d; ++ax) pts *= m;
    for (long q = 0; q < pts; ++q) {
        long rem = q;
        for (int ax = g.d - 1; ax >= 0; --ax) {
            const int local = static_cast<int>(rem % m);
            rem /= m;
            idx[ax] = ((l[ax] * m + local - m / 2) % n + n) % n;
        }
        const std::int64_t x = g.flat(idx);
        for (int ax = 0; ax < g.d; ++ax) {
            int nb_idx[3] = {idx[0], idx[1], idx[2]};
            nb_idx[ax] = (idx[ax] + 1) % n;
            const std::int64_t nb = g.flat(nb_idx);
            const double da = (a[static_cast<std::size_t>(nb)] - a[static_cast<std::size_t>(x)]) * inv_h;
            const double db = (b[static_cast<std::size_t>(nb)] - b[static_cast<std::size_t>(x)]) * inv_h;
            s += (da - db) * (da - db);
        }
        ++count;
    }
    return s / static_cast<double>(count);
}

void forward_gradient(const GridSpec& g, std::span<const double> v, GridFunction& out) {
    if (out.grid.points() != g.points() || out.components != g.d)
        out = GridFunction(g, g.d, 1, "grad");
    const double inv_h = g.m;
    for_each_grad(g, [&](std::int64_t x, int a, std::int64_t nb) {
        out.at(0, a, x) = (v[static_cast<std::size_t>(nb)] - v[static_cast<std::size_t>(x)]) * inv_h;
    });
}

// --- studies ----------------------------------------------------------------

MomentProfile moment_growth_profile(const GridSpec& grid, const BumpSpec& bump, double dt,
                                    std::span<const double> t_list, int n_replicas,
                                    std::uint64_t seed_base, int workers) {
    if (n_replicas < 2) throw std::invalid_argument("moment_growth_profile: need >= 2 replicas");
    const std::size_t nt = t_list.size();
    std::vector<long> target_steps(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        target_steps[i] = std::lround(t_list[i] / dt);
        if (target_steps[i] < 1) throw std::invalid_argument("moment time below dt");
    }
    const long total = target_steps.back();
    std::vector<std::vector<double>> v2(nt, std::vector<double>(n_replicas));
    std::vector<std::vector<double>> dv2(nt, std::vector<double>(n_replicas));

    parallel_for(n_replicas, workers, [&](int r) {
        NoiseRealization noise;
        noise.seed = seed_base + static_cast<std::uint64_t>(r);
        noise.dt = dt;
        noise.d = grid.d;
        noise.cells = grid.cells;
        SimOptions opt{grid, bump, dt, 0, total, {}};
        std::vector<double> v(static_cast<std::size_t>(grid.points()), 0.0);
        std::size_t next = 0;
        simulate(opt, noise, v, [&](long step, double, std::span<const double> state) {
            while (next < nt && step == target_steps[next]) {
                v2[next][static_cast<std::size_t>(r)] = mean_sq_fluctuation(state);
                dv2[next][static_cast<std::size_t>(r)] = mean_grad_sq(grid, state);
                ++next;
            }
        });
    });

    MomentProfile out;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < nt; ++i) {
        auto mv = stats::mean_stderr(v2[i]);
        auto md = stats::mean_stderr(dv2[i]);
        out.rows.push_back({t_list[i], mv.mean, mv.stderr_, md.mean, md.stderr_});
        xs.push_back(t_list[i]);
        ys.push_back(mv.mean);
    }
    out.v2_fit = stats::fit_loglog_top_decade(xs, ys);
    return out;
}

DecorrelationResult decorrelation_profile(const GridSpec& grid, const BumpSpec& bump, double dt,
                                          double t, std::span<const double> R_list,
                                          int n_replicas, std::uint64_t seed_base, int workers) {
    const long nsteps = std::lround(t / dt);
    const std::size_t nR = R_list.size();
    std::vector<std::vector<double>> gaps(nR, std::vector<double>(n_replicas));
    const std::array<int, 3> l{0, 0, 0};

    parallel_for(n_replicas, workers, [&](int r) {
        NoiseRealization noise;
        noise.seed = seed_base + static_cast<std::uint64_t>(r);
        noise.dt = dt;
        noise.d = grid.d;
        noise.cells = grid.cells;
        SimOptions full{grid, bump, dt, 0, nsteps, {}};
        std::vector<double> vfull(static_cast<std::size_t>(grid.points()), 0.0);
        simulate(full, noise, vfull);
        for (std::size_t iR = 0; iR < nR; ++iR) {
            SimOptions loc = full;
            loc.filter.enabled = true;
            loc.filter.center = {0, 0, 0};
            loc.filter.radius = R_list[iR];
            std::vector<double> vloc(static_cast<std::size_t>(grid.points()), 0.0);
            simulate(loc, noise, vloc);
            gaps[iR][static_cast<std::size_t>(r)] =
                mean_grad_diff_sq_cell(grid, vfull, vloc, l);
        }
    });

    DecorrelationResult out;
    out.t = t;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < nR; ++i) {
        auto g = stats::mean_stderr(gaps[i]);
        out.rows.push_back({R_list[i], g.mean, g.stderr_});
        if (R_list[i] * R_list[i] <= t && g.mean > 0) {
            xs.push_back(R_list[i]);
            ys.push_back(g.mean);
        }
    }
    if (xs.size() >= 2) out.fit = stats::fit_loglog(xs, ys);
    return out;
}

EternalResult eternal_gradient(const GridSpec& grid, const BumpSpec& bump, double dt,
                               std::span<const int> n_list, double t_eval, int n_replicas,
                               std::uint64_t seed_base, int workers) {
    const std::size_t nn = n_list.size();
    if (nn < 2) throw std::invalid_argument("eternal_gradient: need >= 2 starts");
    std::vector<std::vector<double>> gaps(nn - 1, std::vector<double>(n_replicas));
    GridFunction z_estimate;

    parallel_for(n_replicas, workers, [&](int r) {
        NoiseRealization noise;
        noise.seed = seed_base + static_cast<std::uint64_t>(r);
        noise.dt = dt;
        noise.d = grid.d;
        noise.cells = grid.cells;
        std::vector<std::vector<double>> finals(nn);
        for (std::size_t i = 0; i < nn; ++i) {
            const long n2 = static_cast<long>(n_list[i]) * n_list[i];
            const long step0 = -std::lround(n2 / dt);
            const long nsteps = std::lround(t_eval / dt) - step0;
            SimOptions opt{grid, bump, dt, step0, nsteps, {}};
            finals[i].assign(static_cast<std::size_t>(grid.points()), 0.0);
            simulate(opt, noise, finals[i]);
        }
        for (std::size_t i = 0; i + 1 < nn; ++i)
            gaps[i][static_cast<std::size_t>(r)] =
                mean_grad_diff_sq(grid, finals[i], finals[i + 1]);
        if (r == 0) {
            GridFunction z(grid, grid.d, 1, "Z");
            forward_gradient(grid, finals[nn - 1], z);
            z.t0 = t_eval;
            z_estimate = std::move(z);
        }
    });

    EternalResult out;
    out.z_estimate = std::move(z_estimate);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i + 1 < nn; ++i) {
        const double x = t_eval + static_cast<double>(n_list[i]) * n_list[i];
        auto g = stats::mean_stderr(gaps[i]);
        out.cauchy.push_back({x, g.mean, g.stderr_});
        if (g.mean > 0) {
            xs.push_back(x);
            ys.push_back(g.mean);
        }
    }
    if (xs.size() >= 2) out.fit = stats::fit_loglog(xs, ys);
    return out;
}

AttractorResult attractor_decay(const GridSpec& grid, const BumpSpec& bump, double dt,
                                int n_eternal, std::span<const double> t_list, int n_replicas,
                                std::uint64_t seed_base, int workers) {
    const std::size_t nt = t_list.size();
    std::vector<long> targets(nt);
    for (std::size_t i = 0; i < nt; ++i) targets[i] = std::lround(t_list[i] / dt);
    const long n2_steps = std::lround(static_cast<double>(n_eternal) * n_eternal / dt);
    std::vector<std::vector<double>> gaps(nt, std::vector<double>(n_replicas));

    parallel_for(n_replicas, workers, [&](int r) {
        NoiseRealization noise;
        noise.seed = seed_base + static_cast<std::uint64_t>(r);
        noise.dt = dt;
        noise.d = grid.d;
        noise.cells = grid.cells;
        // Old-start solution carried to t=0, then co-evolved with the zero-start
        // solution on the same increments.
        std::vector<double> ve(static_cast<std::size_t>(grid.points()), 0.0);
        SimOptions warm{grid, bump, dt, -n2_steps, n2_steps, {}};
        simulate(warm, noise, ve);

        HeatStepper stepper(grid, dt);
        ForcingAssembler forcing(grid, bump, {});
        std::vector<double> v0(ve.size(), 0.0), f(ve.size());
        std::size_t next = 0;
        for (long s = 0; s < targets.back(); ++s) {
            std::fill(f.begin(), f.end(), 0.0);
            forcing.add(noise, s, f);
            for (std::size_t i = 0; i < ve.size(); ++i) ve[i] += f[i];
            for (std::size_t i = 0; i < v0.size(); ++i) v0[i] += f[i];
            stepper.apply(ve);
            stepper.apply(v0);
            while (next < nt && s + 1 == targets[next]) {
                gaps[next][static_cast<std::size_t>(r)] = mean_grad_diff_sq(grid, v0, ve);
                ++next;
            }
        }
    });

    AttractorResult out;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < nt; ++i) {
        auto g = stats::mean_stderr(gaps[i]);
        out.rows.push_back({t_list[i], g.mean, g.stderr_});
        if (g.mean > 0) {
            xs.push_back(t_list[i]);
            ys.push_back(g.mean);
        }
    }
    if (xs.size() >= 2) out.fit = stats::fit_loglog(xs, ys);
    return out;
}

GridFunction eternal_gradient_trajectory(const GridSpec& grid, const BumpSpec& bump, double dt,
                                         int n_start, double t_lo, double t_hi, int store_every,
                                         std::uint64_t seed) {
    NoiseRealization noise;
    noise.seed = seed;
    noise.dt = dt;
    noise.d = grid.d;
    noise.cells = grid.cells;
    const long step0 = -std::lround(static_cast<double>(n_start) * n_start / dt);
    const long step_lo = std::lround(t_lo / dt);
    const long step_hi = std::lround(t_hi / dt);
    SimOptions opt{grid, bump, dt, step0, step_hi - step0, {}};
    std::vector<double> v(static_cast<std::size_t>(grid.points()), 0.0);

    const std::int64_t slices = (step_hi - step_lo) / store_every + 1;
    GridFunction z(grid, grid.d, slices, "Z");
    z.dt = dt * store_every;
    z.t0 = t_lo;
    GridFunction tmp(grid, grid.d, 1, "grad");
    simulate(opt, noise, v, [&](long step, double, std::span<const double> state) {
        if (step >= step_lo && (step - step_lo) % store_every == 0) {
            const std::int64_t slot = (step - step_lo) / store_every;
            if (slot < slices) {
                forward_gradient(grid, state, tmp);
                for (int c = 0; c < grid.d; ++c) {
                    auto src = tmp.slice(0, c);
                    auto dst = z.slice(slot, c);
                    std::copy(src.begin(), src.end(), dst.begin());
                }
            }
        }
    });
    return z;
}

namespace {
// 1D heat kernel periodized over a torus of side L.
double heat_kernel_1d_torus(double z, double tau, double L) {
    double s = 0;
    const int W = std::max(2, static_cast<int>(std::ceil(6.0 * std::sqrt(tau) / L)));
    for (int w = -W; w <= W; ++w) {
        const double zz = z + w * L;
        s += std::exp(-zz * zz / (4.0 * tau));
    }
    return s / std::sqrt(4.0 * M_PI * tau);
}

double kernel_site_integral(const GridSpec& g, const BumpSpec& bump, const int* site,
                            const VecN& x, double tau, int quad_factor) {
    // Midpoint quadrature of p(x-y,tau) A(y-k) over the bump support.
    const double hq = g.h() / quad_factor;
    const int reach = static_cast<int>(std::ceil(bump.r0 / hq));
    const double L = g.side();
    double total = 0;
    int off[3];
    const int w = 2 * reach;
    long pts = 1;
    for (int a = 0; a < g.d; ++a) pts *= w;
    for (long q = 0; q < pts; ++q) {
        long rem = q;
        double u[3] = {0, 0, 0};
        for (int a = g.d - 1; a >= 0; --a) {
            off[a] = static_cast<int>(rem % w) - reach;
            rem /= w;
            u[a] = (off[a] + 0.5) * hq;
        }
        const double av = bump.value(u, g.d);
        if (av == 0.0) continue;
        double p = 1.0;
        for (int a = 0; a < g.d; ++a)
            p *= heat_kernel_1d_torus(x[a] - (site[a] + u[a]), tau, L);
        total += av * p;
    }
    double vol = 1;
    for (int a = 0; a < g.d; ++a) vol *= hq;
    return total * vol;
}

double duhamel_sum(const GridSpec& g, const BumpSpec& bump, const NoiseRealization& noise,
                   const VecN& x, double t, int quad_factor) {
    const long nsteps = std::lround(t / noise.dt);
    double v = 0;
    const int C = g.cells;
    long ncells = 1;
    for (int a = 0; a < g.d; ++a) ncells *= C;
    for (long c = 0; c < ncells; ++c) {
        int cc[3] = {0, 0, 0};
        long rem = c;
        for (int a = g.d - 1; a >= 0; --a) {
            cc[a] = static_cast<int>(rem % C);
            rem /= C;
        }
        for (long j = 0; j < nsteps; ++j) {
            double db = 0;
            for (int i = 0; i < g.d; ++i) db += noise.increment(cc, j, i);
            if (db == 0.0) continue;
            const double tau = t - j * noise.dt;
            v += kernel_site_integral(g, bump, cc, x, tau, quad_factor) * db;
        }
    }
    return v;
}
}  // namespace

HeatKernelResult heat_kernel_value(const GridSpec& grid, const BumpSpec& bump,
                                   const NoiseRealization& noise, const VecN& x, double t,
                                   int quad_factor, double tol) {
    if (t <= 0) throw std::invalid_argument("heat_kernel_value: t must be positive");
    if (quad_factor < 2) quad_factor = 2;
    HeatKernelResult res;
    res.value = duhamel_sum(grid, bump, noise, x, t, quad_factor);
    const double coarse = duhamel_sum(grid, bump, noise, x, t, quad_factor / 2);
    res.quad_error_estimate = std::abs(res.value - coarse);
    res.quad_ok = res.quad_error_estimate <= tol * std::max(1e-300, std::abs(res.value));
    return res;
}

}  // namespace parhom::spde
