// quadrature.hpp — adaptive Gauss-Kronrod and fixed Gauss-Legendre rules for complex integrands

#pragma once

#include <functional>
#include <vector>

#include "tsb/types.hpp"

namespace tsb::quad {

struct Result {
    cplx value{0.0, 0.0};
    double error{0.0};
    int intervals{0};
};

struct Options {
    double abs_tol{1e-10};
    double rel_tol{1e-10};
    int max_intervals{2000};
};

using ComplexFn = std::function<cplx(double)>;

/// Adaptive G7/K15 on [a, b] with global bisection of the worst interval.
Result gauss_kronrod(const ComplexFn& f, double a, double b, const Options& opt = {});

/// Integrates piecewise over the given breakpoints (sorted, at least two).
Result gauss_kronrod_panels(const ComplexFn& f, const std::vector<double>& breaks,
                            const Options& opt = {});

struct GaussLegendre {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton iteration on P_n).
GaussLegendre gauss_legendre(int n);

}  // namespace tsb::quad
