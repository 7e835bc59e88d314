#pragma once

#include <functional>
#include <vector>

namespace frd {

struct GaussRule {
    std::vector<double> x, w;  // on [-1, 1]
};

GaussRule gauss_legendre(int n);

// Adaptive Simpson with relative tolerance; throws NumericalError past max_depth
// unless the local error is already at rounding level.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10, int max_depth = 48);

// Composite Gauss-Legendre: panels equal subintervals, n nodes each.
double composite_gauss(const std::function<double(double)>& f, double a, double b, int panels, int n = 8);

// Cubic interpolation on a uniform table starting at 0; even extension below 0, zero past the end.
double interp_uniform(const std::vector<double>& tab, double step, double x);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace frd
