#include "tsb/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "tsb/quadrature.hpp"

namespace tsb::spectral {

namespace {

constexpr double kOhmicGuard = 1e-6;

bool is_ohmic(double s) { return s == 1.0; }

void check_not_near_ohmic(double s, const char* where) {
    if (!is_ohmic(s) && std::abs(1.0 - s) < kOhmicGuard) {
        throw std::domain_error(std::string(where) +
                                ": s is within 1e-6 of 1 but not equal; use s = 1 exactly");
    }
}

// e^a a^s Gamma(-s, a) for a > 1 by the Legendre continued fraction (modified Lentz).
double scaled_upper_gamma_cf(double s, double a) {
    const double b = -s;
    constexpr double tiny = 1e-300;
    double bn = a + 1.0 - b;
    double c = 1.0 / tiny;
    double d = 1.0 / bn;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - b);
        bn += 2.0;
        d = an * d + bn;
        if (std::abs(d) < tiny) d = tiny;
        c = bn + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h;
}

// -S / ((alpha/2) wc Gamma(s+1)) for 0 < s < 1, x = w / wc.
double reduced_principal_value(double s, double x) {
    if (x == 0.0) return 1.0 / s;
    if (x < -1.0) return scaled_upper_gamma_cf(s, -x);
    // g Gamma(-s) |x|^s e^-x - e^-x E(x), E(x) = sum x^n / (n! (n - s))
    const double g = x > 0.0 ? std::cos(kPi * s) : 1.0;
    const double singular = g * std::tgamma(-s) * std::pow(std::abs(x), s) * std::exp(-x);
    double regular = 0.0;
    if (x > 0.0) {
        // Poisson weights p_n = e^-x x^n / n! keep the sum finite for any x
        const double lx = std::log(x);
        const int n_max = static_cast<int>(x + 40.0 * std::sqrt(x) + 60.0);
        for (int n = 0; n <= n_max; ++n) {
            const double pn = std::exp(-x + n * lx - std::lgamma(n + 1.0));
            regular += pn / (n - s);
        }
    } else {
        double term = 1.0;
        double sum = 0.0;
        for (int n = 0; n < 200; ++n) {
            const double add = term / (n - s);
            sum += add;
            if (n > 2 && std::abs(add) < 1e-18 * std::abs(sum)) break;
            term *= x / (n + 1.0);
        }
        regular = std::exp(-x) * sum;
    }
    return singular - regular;
}

// e^-x Ei(x), with asymptotic series for |x| > 50
double scaled_ei(double x) {
    if (std::abs(x) > 50.0) {
        double term = 1.0 / x;
        double sum = term;
        for (int k = 1; k < 60; ++k) {
            const double next = term * k / x;
            if (std::abs(next) > std::abs(term)) break;
            term = next;
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    return std::exp(-x) * std::expint(x);
}

double lamb_function_impl(const SpectralParams& p, double omega) {
    const double x = omega / p.omega_c;
    const double pref = -0.5 * p.alpha * p.omega_c;
    if (is_ohmic(p.s)) {
        if (x == 0.0) return pref;
        return pref * (1.0 - x * scaled_ei(x));
    }
    check_not_near_ohmic(p.s, "half_fourier_asymptotic");
    return pref * std::tgamma(p.s + 1.0) * reduced_principal_value(p.s, x);
}

}  // namespace

void SpectralParams::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("SpectralParams: alpha must be finite and >= 0");
    if (!(omega_c > 0.0) || !std::isfinite(omega_c))
        throw std::invalid_argument("SpectralParams: omega_c must be > 0");
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("SpectralParams: s must lie in (0, 1]");
    if (!(omega_ref > 0.0)) throw std::invalid_argument("SpectralParams: omega_ref must be > 0");
}

SpectralParams SpectralParams::from_rescaled(double alpha_tilde, double s, double omega_c,
                                             double omega_ref) {
    SpectralParams p{solve_alpha(alpha_tilde, s, omega_c, omega_ref), s, omega_c, omega_ref};
    p.validate();
    return p;
}

double spectral_density(const SpectralParams& p, double omega) {
    if (omega < 0.0) throw std::domain_error("spectral_density: omega must be >= 0");
    if (omega == 0.0) return 0.0;
    return 0.5 * kPi * p.alpha * std::pow(p.omega_c, 1.0 - p.s) * std::pow(omega, p.s) *
           std::exp(-omega / p.omega_c);
}

cplx bcf_exact(const SpectralParams& p, double tau) {
    const double amp = 0.5 * p.alpha * std::tgamma(p.s + 1.0) * p.omega_c * p.omega_c;
    return amp * std::pow(cplx(1.0, p.omega_c * tau), -(p.s + 1.0));
}

HalfFourierValue half_fourier_asymptotic(const SpectralParams& p, double omega) {
    HalfFourierValue v;
    v.frequency = omega;
    v.j_part = omega > 0.0 ? spectral_density(p, omega) : 0.0;
    v.s_part = lamb_function_impl(p, omega);
    return v;
}

double lamb_function(const SpectralParams& p, double omega) { return lamb_function_impl(p, omega); }

cplx half_fourier_finite(const SpectralParams& p, double omega, double t) {
    if (t < 0.0) throw std::domain_error("half_fourier_finite: t must be >= 0");
    if (t == 0.0 || p.alpha == 0.0) return {0.0, 0.0};
    // geometric panels resolve the 1/wc head, then half-period panels follow the oscillation
    std::vector<double> breaks{0.0};
    double h = 0.1 / p.omega_c;
    const double cap = omega != 0.0 ? kPi / std::abs(omega) : std::numeric_limits<double>::infinity();
    while (breaks.back() < t) {
        breaks.push_back(std::min(t, breaks.back() + h));
        h = std::min(2.0 * h, cap);
    }
    auto f = [&](double tau) { return bcf_exact(p, tau) * std::exp(I * (omega * tau)); };
    quad::Options opt;
    opt.abs_tol = 1e-12 * std::abs(bcf_exact(p, 0.0)) / p.omega_c;
    opt.rel_tol = 1e-12;
    return quad::gauss_kronrod_panels(f, breaks, opt).value;
}

double s_expansion(const SpectralParams& p, double x) {
    const double s = p.s;
    double f;
    if (is_ohmic(s)) {
        f = x == 0.0 ? 1.0 : 1.0 - x * std::log(std::abs(x)) + (1.0 - kEulerGamma) * x;
    } else {
        check_not_near_ohmic(s, "s_expansion");
        const double g = x > 0.0 ? std::cos(kPi * s) : 1.0;
        f = 1.0 + s * g * std::tgamma(-s) * std::pow(std::abs(x), s) + s * x / (s - 1.0);
    }
    return -0.5 * p.alpha * std::tgamma(s) * p.omega_c * std::exp(-x) * f;
}

double counterterm_coefficient(const SpectralParams& p) {
    return 0.5 * p.alpha * p.omega_c * std::tgamma(p.s);
}

double rescaled_coupling(const SpectralParams& p) {
    return p.alpha * std::pow(p.omega_c / p.omega_ref, 1.0 - p.s);
}

double solve_alpha(double alpha_tilde, double s, double omega_c, double omega_ref) {
    return alpha_tilde * std::pow(omega_c / omega_ref, s - 1.0);
}

FiniteFourierTable::FiniteFourierTable(const SpectralParams& p, std::vector<double> omegas,
                                       double t_max)
    : p_(p), omegas_(std::move(omegas)), t_max_(t_max) {
    if (!(t_max > 0.0)) throw std::invalid_argument("FiniteFourierTable: t_max must be > 0");
    const auto rule = quad::gauss_legendre(16);
    gl_nodes_ = rule.nodes;
    gl_weights_ = rule.weights;

    double wmax = 0.0;
    for (double w : omegas_) wmax = std::max(wmax, std::abs(w));
    const double cap = wmax > 0.0 ? std::min(1.0 / wmax, t_max / 16.0) : t_max / 16.0;
    double h = std::min(0.05 / p.omega_c, cap);
    breaks_.push_back(0.0);
    while (breaks_.back() < t_max) {
        breaks_.push_back(std::min(t_max, breaks_.back() + h));
        h = std::min(1.15 * h, cap);
    }
    cumulative_.assign(breaks_.size(), std::vector<cplx>(omegas_.size(), cplx{}));
    for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
        const double a = breaks_[k], b = breaks_[k + 1];
        const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
        for (std::size_t m = 0; m < omegas_.size(); ++m) cumulative_[k + 1][m] = cumulative_[k][m];
        for (std::size_t q = 0; q < gl_nodes_.size(); ++q) {
            const double tau = c + hw * gl_nodes_[q];
            const cplx kern = bcf_exact(p_, tau) * (hw * gl_weights_[q]);
            for (std::size_t m = 0; m < omegas_.size(); ++m)
                cumulative_[k + 1][m] += kern * std::exp(I * (omegas_[m] * tau));
        }
    }
}

std::vector<cplx> FiniteFourierTable::at(double t) const {
    std::vector<cplx> out;
    at(t, out);
    return out;
}

void FiniteFourierTable::at(double t, std::vector<cplx>& out) const {
    t = std::clamp(t, 0.0, t_max_);
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    const std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - breaks_.begin()) - 1));
    out = cumulative_[k];
    const double a = breaks_[k];
    if (t <= a) return;
    const double c = 0.5 * (a + t), hw = 0.5 * (t - a);
    for (std::size_t q = 0; q < gl_nodes_.size(); ++q) {
        const double tau = c + hw * gl_nodes_[q];
        const cplx kern = bcf_exact(p_, tau) * (hw * gl_weights_[q]);
        for (std::size_t m = 0; m < omegas_.size(); ++m) out[m] += kern * std::exp(I * (omegas_[m] * tau));
    }
}

double lamb_function_numeric(const SpectralParams& p, double omega) {
    p.validate();
    if (p.alpha == 0.0) return 0.0;
    auto re = [&](double t) { return bcf_exact(p, t).real(); };
    auto im = [&](double t) { return bcf_exact(p, t).imag(); };
    if (omega == 0.0) {
        boost::math::quadrature::exp_sinh<double> es;
        return es.integrate(im, 0.0, std::numeric_limits<double>::infinity());
    }
    // Im[(re + i im)(cos + i sg sin)] = sg re sin + im cos
    const double aw = std::abs(omega), sg = omega > 0.0 ? 1.0 : -1.0;
    static thread_local boost::math::quadrature::ooura_fourier_cos<double> fc(1e-13, 12);
    static thread_local boost::math::quadrature::ooura_fourier_sin<double> fs(1e-13, 12);
    return sg * fs.integrate(re, aw).first + fc.integrate(im, aw).first;
}

}  // namespace tsb::spectral
