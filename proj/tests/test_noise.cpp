#include "doctest.h"

#include <cmath>
#include <set>

#include "tsb/noise.hpp"

using namespace tsb;
using namespace tsb::noise;

namespace {

struct Moments {
    cplx mean{0.0};
    double se_re{0.0}, se_im{0.0};
};

Moments moments(const std::vector<cplx>& x) {
    Moments m;
    for (const auto& v : x) m.mean += v;
    m.mean /= double(x.size());
    double vr = 0, vi = 0;
    for (const auto& v : x) {
        vr += std::pow(v.real() - m.mean.real(), 2);
        vi += std::pow(v.imag() - m.mean.imag(), 2);
    }
    const double n = double(x.size());
    m.se_re = std::sqrt(vr / (n - 1) / n);
    m.se_im = std::sqrt(vi / (n - 1) / n);
    return m;
}

}  // namespace

TEST_CASE("seed derivation") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(42, 7) == derive_seed(42, 7));
    CHECK(derive_seed(42, 7) != derive_seed(43, 7));
}

TEST_CASE("zero coupling gives zero noise") {
    spectral::SpectralParams p{0.0, 0.5, 10.0};
    const auto z = generate_noise(p, {0.0, 0.5, 1.0, 1.5, 2.0}, 3);
    for (const auto& v : z.values) CHECK(v == cplx(0.0));
    CHECK(z.at(1.3) == cplx(0.0));
}

TEST_CASE("grid construction and reproducibility") {
    const auto p = spectral::SpectralParams::from_rescaled(0.1, 0.3, 10.0);
    NoiseGenerator g(p, 20.0);
    CHECK(g.dt() <= 0.25 / g.omega_max());
    CHECK(g.fft_size() * g.dt() >= 8.0 * 20.0 - 1e-9);
    CHECK(g.covariance_error_bound() <= 1e-3);
    CHECK(g.omega_max() > 5.0 * p.omega_c);
    const auto a = g.sample(11), b = g.sample(11), c = g.sample(11, true), d = g.sample(12);
    CHECK(a.values == b.values);
    CHECK(a.t_end() >= 20.0);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(c.values[i] == -a.values[i]);
    CHECK(a.values[5] != d.values[5]);
    CHECK_THROWS_AS(a.at(a.t_end() + 1.0), std::out_of_range);

    NoiseOptions tight;
    tight.max_points = 1 << 12;
    CHECK_THROWS_AS(NoiseGenerator(p, 1e4, tight), std::range_error);
    CHECK_THROWS_AS(generate_noise(p, {0.0, 0.1, 0.3}, 1), std::invalid_argument);
}

TEST_CASE("interpolation is exact on the grid and smooth between") {
    NoiseRealization r;
    r.dt = 0.05;
    for (int i = 0; i <= 200; ++i) r.values.push_back(std::exp(I * (0.7 * i * r.dt)));
    for (int i = 0; i <= 200; ++i) CHECK(std::abs(r.at(i * r.dt) - r.values[i]) < 1e-14);
    double worst = 0;
    for (double t = 0.0; t <= 10.0; t += 0.0137) worst = std::max(worst, std::abs(r.at(t) - std::exp(I * 0.7 * t)));
    CHECK(worst < 1e-4);
}

TEST_CASE("ensemble covariance reproduces the bath correlation function") {
    const auto p = spectral::SpectralParams::from_rescaled(0.1, 0.5, 10.0);
    NoiseGenerator g(p, 4.0);
    const int n = 10000;
    const double t0 = 1.0;
    const std::vector<double> lags{0.0, 0.05, 0.3, 2.0};
    std::vector<std::vector<cplx>> conj_prod(lags.size()), plain_prod(lags.size());
    std::vector<cplx> first;
    for (int k = 0; k < n; ++k) {
        const auto z = g.sample(derive_seed(7, k));
        first.push_back(z.at(t0));
        for (std::size_t l = 0; l < lags.size(); ++l) {
            conj_prod[l].push_back(z.at(t0 + lags[l]) * std::conj(z.at(t0)));
            plain_prod[l].push_back(z.at(t0 + lags[l]) * z.at(t0));
        }
    }
    const auto m0 = moments(first);
    CHECK(std::abs(m0.mean.real()) < 3 * m0.se_re);
    CHECK(std::abs(m0.mean.imag()) < 3 * m0.se_im);
    for (std::size_t l = 0; l < lags.size(); ++l) {
        const cplx a = spectral::bcf_exact(p, lags[l]);
        const auto c = moments(conj_prod[l]);
        INFO("lag " << lags[l] << " estimate " << c.mean << " exact " << a);
        CHECK(std::abs(c.mean.real() - a.real()) < 3 * c.se_re);
        CHECK(std::abs(c.mean.imag() - a.imag()) < 3 * c.se_im + 1e-12);
        const auto q = moments(plain_prod[l]);
        CHECK(std::abs(q.mean.real()) < 3 * q.se_re);
        CHECK(std::abs(q.mean.imag()) < 3 * q.se_im);
    }
}

TEST_CASE("frequency-comb covariance stays within the reported bound") {
    // E[z_t z_s^*] of the synthesis is sum_k J(k dw) dw / pi exp(-i k dw (t - s)) exactly
    for (double s : {0.1, 0.5, 1.0})
        for (double t_end : {2.0, 30.0}) {
            const auto p = spectral::SpectralParams::from_rescaled(0.05, s, 10.0);
            NoiseGenerator g(p, t_end);
            const double dw = g.d_omega(), a0 = std::abs(spectral::bcf_exact(p, 0.0));
            double worst = 0.0;
            for (double tau = 0.0; tau <= t_end; tau += t_end / 50) {
                cplx c = 0.0;
                for (std::size_t k = 1; k < g.n_freq(); ++k)
                    c += spectral::spectral_density(p, k * dw) * dw / kPi * std::exp(-I * (k * dw * tau));
                worst = std::max(worst, std::abs(c - spectral::bcf_exact(p, tau)) / a0);
            }
            CAPTURE(s);
            CAPTURE(t_end);
            CHECK(worst <= g.covariance_error_bound());
            CHECK(g.covariance_error_bound() <= 1e-3);
        }
}

TEST_CASE("periodic images get the tighter share of the budget") {
    // for an algebraic tail the image sum exceeds the nearest image by about zeta(s + 1)
    const auto p = spectral::SpectralParams::from_rescaled(0.05, 0.3, 10.0);
    NoiseGenerator g(p, 40.0);
    const double period = g.fft_size() * g.dt();
    const double a0 = std::abs(spectral::bcf_exact(p, 0.0));
    double images = 0.0;
    for (int m = 1; m <= 20000; ++m) images += 2.0 * std::abs(spectral::bcf_exact(p, m * period - 40.0));
    CHECK(images / a0 <= 0.05 * 1e-3);
    NoiseOptions bad;
    bad.alias_fraction = 0.0;
    CHECK_THROWS_AS(NoiseGenerator(p, 1.0, bad), std::invalid_argument);
}
