// bcf_fit.hpp — sum-of-exponentials representation of the bath correlation function
//
// alpha_bcf(tau) ~ sum_j G_j exp(-W_j tau), Re W_j > 0, fitted in the sup norm on a
// log-spaced grid by weighted least squares (Lawson reweighting) followed by an
// L_p refinement with increasing p.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsb/spectral.hpp"
#include "tsb/types.hpp"

namespace tsb::bcf {

struct ExpTerm {
    cplx g;
    cplx w;
};

struct ExponentialBcf {
    std::vector<ExpTerm> terms;
    double t_max{0.0};
    double max_abs_err{0.0};  // absolute, same units as alpha_bcf
    double norm_scale{1.0};   // |alpha_bcf(0)|

    cplx eval(double tau) const;
    double normalized_error() const { return max_abs_err / norm_scale; }
    std::size_t size() const { return terms.size(); }
};

struct FitOptions {
    std::uint64_t seed{20240101};
    int random_starts{4};
    int lawson_iterations{40};
    bool lp_refine{true};
    double time_scale{1.0};  // characteristic decay time, used only for conditioning
};

class FitNotConverged : public std::runtime_error {
public:
    FitNotConverged(const std::string& what, ExponentialBcf best)
        : std::runtime_error(what), best_(std::move(best)) {}
    const ExponentialBcf& best() const { return best_; }

private:
    ExponentialBcf best_;
};

using Kernel = std::function<cplx(double)>;

/// tau = 0 followed by n-1 log-spaced points on [tau_min, t_max].
std::vector<double> fit_grid(double tau_min, double t_max, int n);

/// Fit an arbitrary decaying kernel.
ExponentialBcf fit_kernel(const Kernel& k, int n_terms, double t_max, int grid_points,
                          const FitOptions& opt = {});

/// Fit the exact BCF of p. t_max <= 0 selects default_t_max(p).
ExponentialBcf fit_bcf(const spectral::SpectralParams& p, int n_terms, double t_max = 0.0,
                       int grid_points = 400, FitOptions opt = {});

/// Window end where |alpha_bcf(t)| / alpha_bcf(0) = 1e-4.
double default_t_max(const spectral::SpectralParams& p);

cplx eval_fit(const ExponentialBcf& f, double tau);

struct FitReport {
    std::vector<double> tau;  // log grid on [0, extent * t_max]; tau > t_max is extrapolation
    std::vector<double> abs_err;
    std::vector<double> rel_err;
    double max_abs_err{0.0};       // within the fit window only
    double tracking_horizon{0.0};  // largest tau with rel_err < 0.1 on all of [0, tau]
};

FitReport fit_report(const ExponentialBcf& f, const spectral::SpectralParams& p, int points = 1600,
                     double extent = 1.0);

/// sum_j G_j / (W_j - i w)
cplx half_fourier(const ExponentialBcf& f, double omega);

/// sum_j G_j (1 - exp((i w - W_j) t)) / (W_j - i w)
cplx half_fourier_finite(const ExponentialBcf& f, double omega, double t);

std::string to_json(const ExponentialBcf& f, const spectral::SpectralParams& p);

struct FitDocument {
    ExponentialBcf fit;
    spectral::SpectralParams params;
};

FitDocument from_json(const std::string& text);

}  // namespace tsb::bcf
