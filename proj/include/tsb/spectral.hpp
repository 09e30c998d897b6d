// spectral.hpp — closed-form environment functions for the (sub-)Ohmic bath
//
// Spectral density J(w) = (pi/2) alpha wc^(1-s) w^s exp(-w/wc), its zero-temperature
// bath correlation function, the half-sided Fourier transform F(w) = J(w) + i S(w),
// the small-argument expansion of S, and the counterterm coefficient.

#pragma once

#include <vector>

#include "tsb/types.hpp"

namespace tsb::spectral {

struct SpectralParams {
    double alpha{0.0};      // dimensionless coupling
    double s{1.0};          // exponent, 0 < s <= 1
    double omega_c{10.0};   // cutoff frequency
    double omega_ref{1.0};  // frequency unit used for the rescaled coupling

    /// Throws std::invalid_argument when outside alpha >= 0, wc > 0, 0 < s <= 1.
    void validate() const;

    /// Build parameters from the rescaled coupling alpha~ = alpha (wc/w_ref)^(1-s).
    static SpectralParams from_rescaled(double alpha_tilde, double s, double omega_c,
                                        double omega_ref = 1.0);
};

struct HalfFourierValue {
    double frequency{0.0};
    double j_part{0.0};  // J(w), zero for w < 0
    double s_part{0.0};  // S(w)
    cplx value() const { return {j_part, s_part}; }
};

double spectral_density(const SpectralParams& p, double omega);

/// alpha_bcf(tau) = (alpha/2) Gamma(s+1) wc^2 (1 + i wc tau)^-(s+1), valid for tau of either sign.
cplx bcf_exact(const SpectralParams& p, double tau);

/// F(w) from the analytic continuation of the incomplete-gamma representation.
HalfFourierValue half_fourier_asymptotic(const SpectralParams& p, double omega);

/// Imaginary part S(w) of the half-sided transform.
double lamb_function(const SpectralParams& p, double omega);

/// S(w) = Im int_0^inf alpha_bcf(tau) exp(i w tau) dtau by double-exponential Fourier quadrature.
double lamb_function_numeric(const SpectralParams& p, double omega);

/// F_t(w) = int_0^t alpha_bcf(tau) exp(i w tau) dtau by adaptive quadrature.
cplx half_fourier_finite(const SpectralParams& p, double omega, double t);

/// Small-x expansion of S(x = w/wc), accurate to O(x^2).
double s_expansion(const SpectralParams& p, double x);

/// (alpha wc / 2) Gamma(s); equals -S(0).
double counterterm_coefficient(const SpectralParams& p);

double rescaled_coupling(const SpectralParams& p);
double solve_alpha(double alpha_tilde, double s, double omega_c, double omega_ref = 1.0);

/// Tabulated F_t(w_i) for a fixed frequency set on [0, t_max].
///
/// The integral is accumulated over Gauss-Legendre panels whose width grows
/// geometrically from ~0.05/wc until it is capped by the fastest oscillation;
/// any t inside the table is then one partial-panel quadrature away.
class FiniteFourierTable {
public:
    FiniteFourierTable(const SpectralParams& p, std::vector<double> omegas, double t_max);

    /// F_t for every tabulated frequency, t clamped to [0, t_max].
    std::vector<cplx> at(double t) const;
    void at(double t, std::vector<cplx>& out) const;

    const std::vector<double>& omegas() const { return omegas_; }
    double t_max() const { return t_max_; }

private:
    SpectralParams p_;
    std::vector<double> omegas_;
    double t_max_;
    std::vector<double> breaks_;
    std::vector<std::vector<cplx>> cumulative_;  // [panel][omega]
    std::vector<double> gl_nodes_, gl_weights_;
};

}  // namespace tsb::spectral
