#pragma once

#include <complex>
#include <vector>

namespace frd {

// Real polynomial, coefficients in ascending degree. Arithmetic keeps raw
// coefficients; degree() applies the relative zero tolerance.
class Poly {
public:
    static constexpr double kZeroTol = 1e-14;

    Poly() = default;
    explicit Poly(std::vector<double> coeffs);
    static Poly constant(double a);
    static Poly monomial(int k, double a = 1.0);

    // Index of the last coefficient above kZeroTol * max|c|; -1 for the zero polynomial.
    int degree() const;
    bool is_zero() const { return degree() < 0; }
    double lead() const;
    double max_abs_coeff() const;

    const std::vector<double>& coeffs() const { return c_; }
    std::size_t size() const { return c_.size(); }
    double operator[](std::size_t i) const { return i < c_.size() ? c_[i] : 0.0; }

    double operator()(double x) const;
    std::complex<double> operator()(std::complex<double> z) const;

    // Copy with coefficients beyond degree() dropped.
    Poly trimmed() const;
    Poly derivative() const;

    Poly& operator+=(const Poly& q);
    Poly& operator-=(const Poly& q);
    Poly& operator*=(double a);

private:
    std::vector<double> c_;
};

Poly operator+(Poly p, const Poly& q);
Poly operator-(Poly p, const Poly& q);
Poly operator*(Poly p, double a);
Poly operator*(double a, Poly p);
Poly operator*(const Poly& p, const Poly& q);

double poly_eval(const Poly& p, double x);
Poly poly_mul(const Poly& p, const Poly& q);
Poly chebyshev_T(int k);
// x -> p(a + b x)
Poly poly_compose_affine(const Poly& p, double a, double b);
// Monomial coefficients of sum_k alpha_k T_k(x).
Poly chebyshev_to_monomial(const std::vector<double>& alpha);

enum class RootKind { RealNegative, RealPositive, ComplexUpper };

struct Root {
    std::complex<double> z;
    int multiplicity = 1;
    RootKind kind = RootKind::RealNegative;
};

struct RootSet {
    std::vector<Root> roots;
    double scale = 0.0;  // leading coefficient

    int count() const;  // with multiplicity
    double max_modulus() const;
    // scale * prod (x - z)^m, conjugates included.
    Poly reconstruct() const;
};

struct RootOptions {
    int max_iter = 500;
    double snap_tol = 1e-9;     // |Im z| < snap_tol (1 + |z|) -> real
    double cluster_tol = 1e-6;  // merge roots closer than cluster_tol (1 + |z|); 0 disables
};

RootSet poly_roots(const Poly& p, const RootOptions& opt = {});

// Aberth simultaneous iteration on the trimmed coefficients, from Newton-polygon
// guesses or from `start` (then only roots above the rounding floor move).
// Throws NumericalError when the cap is hit.
std::vector<std::complex<double>> aberth_roots(const std::vector<double>& c, int max_iter,
                                               const std::vector<std::complex<double>>& start = {});
// Eigenvalues of the companion matrix.
std::vector<std::complex<double>> companion_roots(const std::vector<double>& c);
// Roots of sum alpha_k T_k from the colleague matrix, Newton-polished on the series.
// Far better conditioned than the monomial route when the roots sit near [-1, 1].
std::vector<std::complex<double>> colleague_roots(const std::vector<double>& alpha);
RootSet chebyshev_roots(const std::vector<double>& alpha, const RootOptions& opt = {});

}  // namespace frd
