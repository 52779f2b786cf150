#pragma once

#include <span>
#include <vector>

namespace parhom::stats {

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    int n = 0;
};

MeanStderr mean_stderr(std::span<const double> xs);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Ordinary least squares of y against x.
LineFit fit_linear(std::span<const double> x, std::span<const double> y);

// OLS on (log x, log y); inputs must be positive.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

// Restrict a log-log fit to the largest decade [x_max/10, x_max].
LineFit fit_loglog_top_decade(std::span<const double> x, std::span<const double> y);

}  // namespace parhom::stats
