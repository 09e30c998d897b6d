// noise.hpp — complex Gaussian driving noise with E[z_t z_s^*] = alpha_bcf(t - s)
//
// Spectral synthesis z_t = sum_k sqrt(J(w_k) dw / pi) xi_k exp(-i w_k t) on a periodic
// FFT grid. The covariance error is the truncated spectral tail plus the aliased
// periodic images alpha(tau - m T); both are checked against the requested budget.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tsb/spectral.hpp"
#include "tsb/types.hpp"

namespace tsb::noise {

/// SplitMix64 mix of (master seed, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct NoiseRealization {
    double dt{0.0};                 // spacing of the stored grid, starting at t = 0
    std::vector<cplx> values;       // z(n dt)
    std::uint64_t seed{0};
    bool antithetic{false};
    std::string method{"fft-spectral"};
    double omega_max{0.0};
    double d_omega{0.0};
    std::size_t n_freq{0};

    /// Catmull-Rom interpolation; t must lie inside the stored range.
    cplx at(double t) const;
    double t_end() const { return values.empty() ? 0.0 : dt * (values.size() - 1); }
};

struct NoiseOptions {
    double tolerance{1e-3};    // covariance error budget relative to |alpha_bcf(0)|
    double alias_fraction{0.05};  // share of the budget for the periodic images (the tail gets half)
    double max_dt{0.0};        // extra cap on the grid spacing (0: none)
    double period_factor{8.0}; // minimum FFT period in units of t_end
    std::size_t max_points{std::size_t{1} << 25};
};

/// Reusable sampler for one (SpectralParams, t_end); sample() is thread safe.
class NoiseGenerator {
public:
    NoiseGenerator(const spectral::SpectralParams& p, double t_end, const NoiseOptions& opt = {});
    ~NoiseGenerator();
    NoiseGenerator(const NoiseGenerator&) = delete;
    NoiseGenerator& operator=(const NoiseGenerator&) = delete;

    NoiseRealization sample(std::uint64_t seed, bool antithetic = false) const;

    double dt() const { return dt_; }
    double omega_max() const { return omega_max_; }
    double d_omega() const { return d_omega_; }
    std::size_t fft_size() const { return n_fft_; }
    std::size_t n_freq() const { return amplitude_.size(); }
    /// Bound on |E[z_t z_s^*] - alpha_bcf(t - s)| / |alpha_bcf(0)| for |t - s| <= t_end.
    double covariance_error_bound() const { return error_bound_; }

private:
    spectral::SpectralParams p_;
    double t_end_;
    double dt_{0.0};
    double omega_max_{0.0};
    double d_omega_{0.0};
    double error_bound_{0.0};
    std::size_t n_fft_{0};
    std::size_t n_keep_{0};
    std::vector<double> amplitude_;
    struct Plan;
    std::unique_ptr<Plan> plan_;
};

/// One realization on a uniform grid covering t_grid.
NoiseRealization generate_noise(const spectral::SpectralParams& p, const std::vector<double>& t_grid,
                                std::uint64_t seed, const NoiseOptions& opt = {});

}  // namespace tsb::noise
