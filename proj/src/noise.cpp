#include "tsb/noise.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>
#include <fftw3.h>

namespace tsb::noise {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// sum_{m >= 1} 2 |alpha(m T - t_end)|, bounding sum_{m != 0} |alpha(tau + m T)| for |tau| <= t_end
double image_sum(const spectral::SpectralParams& p, double period, double t_end) {
    constexpr int kTerms = 64;
    double sum = 0.0;
    for (int m = 1; m <= kTerms; ++m) sum += std::abs(spectral::bcf_exact(p, m * period - t_end));
    // remainder by the integral of the algebraic envelope a0 (wc x)^-(s+1)
    const double a0 = std::abs(spectral::bcf_exact(p, 0.0));
    const double x0 = kTerms * period - t_end;
    sum += a0 * std::pow(p.omega_c * x0, -(p.s + 1.0)) * x0 / (p.s * period);
    return 2.0 * sum;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t x = master;
    splitmix(x);
    x ^= index * 0xD1B54A32D192ED03ULL;
    splitmix(x);
    return splitmix(x);
}

cplx NoiseRealization::at(double t) const {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    const double u = t / dt;
    if (!(u >= -1e-9) || u > (n - 1) + 1e-9)
        throw std::out_of_range("NoiseRealization::at: t outside the generated window");
    if (n == 1) return values[0];
    std::size_t i = static_cast<std::size_t>(std::floor(std::max(0.0, u)));
    if (i >= n - 1) i = n - 2;
    const double x = u - i;
    const cplx p1 = values[i], p2 = values[i + 1];
    const cplx p0 = i > 0 ? values[i - 1] : 2.0 * p1 - p2;
    const cplx p3 = i + 2 < n ? values[i + 2] : 2.0 * p2 - p1;
    return p1 + 0.5 * x * (p2 - p0 + x * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + x * (3.0 * (p1 - p2) + p3 - p0)));
}

struct NoiseGenerator::Plan {
    fftw_plan plan{nullptr};
};

NoiseGenerator::NoiseGenerator(const spectral::SpectralParams& p, double t_end, const NoiseOptions& opt)
    : p_(p), t_end_(t_end), plan_(std::make_unique<Plan>()) {
    p.validate();
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("NoiseGenerator: t_end must be >= 0");
    if (!(opt.tolerance > 0.0)) throw std::invalid_argument("NoiseGenerator: tolerance must be > 0");
    if (!(opt.alias_fraction > 0.0 && opt.alias_fraction <= 0.5))
        throw std::invalid_argument("NoiseGenerator: alias_fraction must be in (0, 0.5]");
    if (p.alpha == 0.0) {
        dt_ = t_end > 0.0 ? t_end : 1.0;
        n_keep_ = t_end > 0.0 ? 2 : 1;
        return;
    }
    // half the budget for the spectral tail: Q(s+1, w_max/wc) = tol/2
    omega_max_ = p.omega_c * boost::math::gamma_q_inv(p.s + 1.0, 0.5 * opt.tolerance);
    double dt_cap = 0.25 / omega_max_;
    if (opt.max_dt > 0.0) dt_cap = std::min(dt_cap, opt.max_dt);
    const double a0 = std::abs(spectral::bcf_exact(p, 0.0));
    // periodic images alpha(tau - m T) add up secularly under time integrals, so they get a
    // tighter share; lengthen the period until their sum fits
    double period = std::max(opt.period_factor * t_end, 200.0 / p.omega_c);
    while (image_sum(p, period, t_end) / a0 > opt.alias_fraction * opt.tolerance) {
        period *= 2.0;
        if (period / dt_cap > double(opt.max_points))
            throw std::range_error("NoiseGenerator: t_end exceeds the resolvable correlation window (period too long)");
    }
    std::size_t n = 1024;
    while (period / n > dt_cap) {
        n *= 2;
        if (n > opt.max_points)
            throw std::range_error("NoiseGenerator: t_end exceeds the resolvable correlation window (grid too large)");
    }
    n_fft_ = n;
    dt_ = period / n;
    d_omega_ = 2.0 * kPi / period;
    const std::size_t m = static_cast<std::size_t>(std::ceil(omega_max_ / d_omega_));
    if (m >= n) throw std::logic_error("NoiseGenerator: frequency grid exceeds FFT size");
    amplitude_.resize(m);
    for (std::size_t k = 0; k < m; ++k)
        amplitude_[k] = std::sqrt(spectral::spectral_density(p, k * d_omega_) * d_omega_ / kPi);

    // dropped comb terms k >= m: integral from m dw plus the first term (J decreasing there)
    const double tail = boost::math::gamma_q(p.s + 1.0, m * d_omega_ / p.omega_c) +
                        spectral::spectral_density(p, m * d_omega_) * d_omega_ / kPi / a0;
    const double alias = image_sum(p, period, t_end) / a0;
    error_bound_ = tail + alias;
    if (error_bound_ > opt.tolerance)
        throw std::range_error("NoiseGenerator: t_end exceeds the resolvable correlation window");
    n_keep_ = static_cast<std::size_t>(std::ceil(t_end / dt_ - 1e-9)) + 2;

    std::lock_guard<std::mutex> lock(planner_mutex());
    auto* in = fftw_alloc_complex(n_fft_);
    auto* out = fftw_alloc_complex(n_fft_);
    plan_->plan = fftw_plan_dft_1d(static_cast<int>(n_fft_), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
}

NoiseGenerator::~NoiseGenerator() {
    if (plan_ && plan_->plan) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan_->plan);
    }
}

NoiseRealization NoiseGenerator::sample(std::uint64_t seed, bool antithetic) const {
    NoiseRealization r;
    r.dt = dt_;
    r.seed = seed;
    r.antithetic = antithetic;
    r.omega_max = omega_max_;
    r.d_omega = d_omega_;
    r.n_freq = amplitude_.size();
    if (p_.alpha == 0.0) {
        r.values.assign(n_keep_, 0.0);
        return r;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double sign = antithetic ? -1.0 : 1.0;
    auto* in = fftw_alloc_complex(n_fft_);
    auto* out = fftw_alloc_complex(n_fft_);
    const double scale = sign * std::sqrt(0.5);
    for (std::size_t k = 0; k < n_fft_; ++k) {
        if (k < amplitude_.size()) {
            const double a = normal(rng), b = normal(rng);
            in[k][0] = scale * amplitude_[k] * a;
            in[k][1] = scale * amplitude_[k] * b;
        } else {
            in[k][0] = in[k][1] = 0.0;
        }
    }
    // forward DFT: out_n = sum_k in_k exp(-2 pi i k n / N) = z(n dt)
    fftw_execute_dft(plan_->plan, in, out);
    r.values.resize(n_keep_);
    for (std::size_t i = 0; i < n_keep_; ++i) r.values[i] = {out[i][0], out[i][1]};
    fftw_free(in);
    fftw_free(out);
    return r;
}

NoiseRealization generate_noise(const spectral::SpectralParams& p, const std::vector<double>& t_grid,
                                std::uint64_t seed, const NoiseOptions& opt) {
    if (t_grid.empty()) throw std::invalid_argument("generate_noise: empty time grid");
    if (t_grid.front() != 0.0) throw std::invalid_argument("generate_noise: time grid must start at 0");
    if (t_grid.size() > 2) {
        const double h = t_grid[1] - t_grid[0];
        for (std::size_t i = 1; i < t_grid.size(); ++i)
            if (std::abs((t_grid[i] - t_grid[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(t_grid.back())))
                throw std::invalid_argument("generate_noise: time grid must be uniform");
    }
    NoiseOptions o = opt;
    if (t_grid.size() > 1) {
        const double h = t_grid[1] - t_grid[0];
        o.max_dt = o.max_dt > 0.0 ? std::min(o.max_dt, h) : h;
    }
    NoiseGenerator gen(p, t_grid.back(), o);
    return gen.sample(seed);
}

}  // namespace tsb::noise
