#pragma once

#include "frd/poly.hpp"

#include <utility>

namespace frd {

// s = a1^2 + a2^2 + x (a3^2 + a4^2)
struct SosQuadruple {
    Poly a1, a2, a3, a4;

    double eval(double x) const;
};

// s = prefactor (b1 + x b2), b1 and b2 nonnegative on all of R.
struct HalfLinePair {
    Poly b1, b2;
    double prefactor = 0.0;
};

struct SosOptions {
    double cluster_tol = 1e-6;
    double snap_tol = 1e-9;
};

HalfLinePair halfline_split(const Poly& s, const SosOptions& opt = {});
std::pair<Poly, Poly> two_square_split(const Poly& b, const SosOptions& opt = {});
SosQuadruple sos_decompose(const Poly& s, const SosOptions& opt = {});

// Binary law on pairs representing b1 + x b2.
std::pair<Poly, Poly> halfline_compose(const std::pair<Poly, Poly>& f, const std::pair<Poly, Poly>& g);
// Gauss two-square product law.
std::pair<Poly, Poly> gauss_compose(const std::pair<Poly, Poly>& f, const std::pair<Poly, Poly>& g);

}  // namespace frd
