#include "parhom/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace parhom::stats {

MeanStderr mean_stderr(std::span<const double> xs) {
    MeanStderr r;
    r.n = static_cast<int>(xs.size());
    if (r.n == 0) return r;
    double s = 0;
    for (double x : xs) s += x;
    r.mean = s / r.n;
    if (r.n < 2) return r;
    double ss = 0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stderr_ = std::sqrt(ss / (r.n - 1) / r.n);
    return r;
}

LineFit fit_linear(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("fit_linear: need >= 2 matched points");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) throw std::invalid_argument("fit_linear: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            rss += r * r;
        }
        f.slope_stderr = std::sqrt(rss / (n - 2) / sxx);
    }
    return f;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0 || y[i] <= 0) throw std::invalid_argument("fit_loglog: nonpositive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_linear(lx, ly);
}

LineFit fit_loglog_top_decade(std::span<const double> x, std::span<const double> y) {
    double xmax = 0;
    for (double v : x) xmax = std::max(xmax, v);
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= xmax / 10.0) {
            fx.push_back(x[i]);
            fy.push_back(y[i]);
        }
    }
    return fit_loglog(fx, fy);
}

}  // namespace parhom::stats
