#pragma once

#include "frd/weights.hpp"

#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace frd {

// (2 pi)^-d int_{R^d} e^{i xi.x} f(|xi|) d xi at |x| = rho, for f supported on [0, s_max].
double radial_inverse_transform(const std::function<double(double)>& f, int d, double rho, double s_max);

// Inverse transform of xi -> phi(|xi|)^power on rho = 0 .. rho_max, step 1 / per_unit.
// Supported on rho <= 2 h power; q_t and q_t * q_t are rescalings of these shapes.
struct RadialShape {
    int d = 3;
    int power = 1;
    double step = 0.0;
    double support = 0.0;
    std::vector<double> values;

    double value(double rho) const;  // cubic interpolation, 0 beyond the table
    // f''(0) of the radial profile and value at 0, from moments rather than the table.
    double at_origin = 0.0;
    double curvature_at_origin = 0.0;
};

std::shared_ptr<const RadialShape> radial_shape(std::shared_ptr<const BumpProfile> profile, int d, int power,
                                                double rho_max = 4.0, int per_unit = 512);

struct RadialKernel {
    double t = 0.0;
    int d = 3;
    double gamma = 1.0;
    double r_step = 0.0;
    double support = 0.0;        // declared radius, t for h = 1/2
    std::vector<double> values;  // r = i r_step

    double r_max() const { return r_step * (values.size() - 1); }
    double value(double r) const;
    double max_abs() const;
    // max |q(r)| over r > support, relative to max |q|
    double leakage() const;
    // first radius where |q| drops below half its maximum
    double half_radius() const;
    // int_{R^d} q^2
    double l2_norm2() const;
};

// q_t(r) = t^((2-gamma)/(2 gamma)) sqrt(c0) t^-d K(r / t) with K the phi shape; radial step t / 512, r_max = 4t.
RadialKernel radial_kernel(double t, int d, double gamma, std::shared_ptr<const BumpProfile> profile);

// Normalized radial bump c (1 - r^2 / eps^2)^4 on |x| < eps; C^3 across the boundary.
struct Mollifier {
    int d = 3;
    double radius = 0.1;
    double norm = 0.0;

    Mollifier(int d, double radius);
    double value(double r) const;
};

// Radial convolution of two radial tables sharing the step; output on the same grid up to out_points.
std::vector<double> radial_convolve(const std::vector<double>& f, const std::vector<double>& g, double step, int d,
                                    std::size_t out_points);

// eta * q; support grows by the mollifier radius.
RadialKernel mollify(const RadialKernel& kernel, const Mollifier& eta);

// (q_t * q_t)(r) = c0 t^((2-gamma)/gamma - d) K2(r / t) with K2 the phi^2 shape.
double kernel_autocorrelation(double t, int d, double gamma, double c0, const RadialShape& sq_shape, double r);

struct ContinuumOptions {
    double t_max = 64.0;
    int intervals = 512;  // log-Simpson intervals from the support edge to t_max
};

struct ContinuumGreensValue {
    double value = 0.0;
    double error = 0.0;
    double quadrature = 0.0;
    double tail = 0.0;
};

// G_rec(r) = int (q_t * q_t)(r) dt, log grid plus a two-term analytic tail.
std::map<double, ContinuumGreensValue> continuum_reconstruct(int d, double gamma,
                                                             std::shared_ptr<const BumpProfile> profile,
                                                             const std::vector<double>& rs,
                                                             const ContinuumOptions& opt = {});

// Green's function of (-Delta)^p on R^d, d > 2p.
double continuum_green(int d, int p, double r);

}  // namespace frd
