#include "doctest.h"

#include <cmath>
#include <random>

#include "tsb/bcf_fit.hpp"
#include "tsb/quadrature.hpp"

using namespace tsb;
using namespace tsb::bcf;
using spectral::SpectralParams;

TEST_CASE("single exponential kernel is recovered exactly") {
    const cplx G{1.0, 0.0}, W{1.0, 1.0};
    auto k = [&](double t) { return G * std::exp(-W * t); };
    const auto f = fit_kernel(k, 1, 10.0, 40);
    REQUIRE(f.size() == 1);
    CHECK(std::abs(f.terms[0].g - G) < 1e-9);
    CHECK(std::abs(f.terms[0].w - W) < 1e-9);
    CHECK(f.max_abs_err <= 1e-9);
}

TEST_CASE("eval_fit") {
    ExponentialBcf empty;
    CHECK(eval_fit(empty, 0.0) == cplx{});
    CHECK(eval_fit(empty, 3.0) == cplx{});

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    ExponentialBcf f;
    cplx sum0 = 0;
    for (int j = 0; j < 3; ++j) {
        ExpTerm t{{n(rng), n(rng)}, {std::abs(n(rng)) + 0.1, n(rng)}};
        f.terms.push_back(t);
        sum0 += t.g;
    }
    CHECK(std::abs(eval_fit(f, 0.0) - sum0) < 1e-15);
    cplx direct = 0;
    for (const auto& t : f.terms) direct += t.g * std::exp(-t.w * 2.5);
    CHECK(std::abs(eval_fit(f, 2.5) - direct) < 1e-12);
}

TEST_CASE("ohmic five-term fit meets 1e-3") {
    SpectralParams p{0.1, 1.0, 10.0};
    const auto f = fit_bcf(p, 5);
    CHECK(f.normalized_error() <= 1e-3);
    CHECK(f.norm_scale == doctest::Approx(std::abs(spectral::bcf_exact(p, 0.0))));
    CHECK(std::abs(f.eval(0.0) - spectral::bcf_exact(p, 0.0)) <= f.max_abs_err);
    for (const auto& t : f.terms) CHECK(t.w.real() > 0.0);
    // certified error holds on the optimization grid as well
    for (double tau : fit_grid(0.01 / p.omega_c, f.t_max, 400))
        CHECK(std::abs(f.eval(tau) - spectral::bcf_exact(p, tau)) <= f.max_abs_err * (1 + 1e-12));
}

TEST_CASE("more terms track the algebraic tail longer") {
    SpectralParams p{0.1, 0.3, 10.0};
    const auto f5 = fit_bcf(p, 5), f7 = fit_bcf(p, 7);
    CHECK(f7.max_abs_err < f5.max_abs_err);
    CHECK(fit_report(f7, p).tracking_horizon > fit_report(f5, p).tracking_horizon);
}

TEST_CASE("tracking horizon grows with the term count") {
    SpectralParams p{0.1, 0.5, 10.0};
    double prev = 0;
    for (int n : {3, 5, 7}) {
        const auto f = fit_bcf(p, n);
        const auto rep = fit_report(f, p);
        CAPTURE(n);
        CHECK(rep.tracking_horizon > prev);
        prev = rep.tracking_horizon;
        if (n == 5) CHECK(rep.max_abs_err / f.norm_scale <= 1e-3);
    }
}

TEST_CASE("report of a perfect fit") {
    SpectralParams p{0.0, 0.5, 10.0};
    ExponentialBcf f;
    f.t_max = 20.0;
    const auto rep = fit_report(f, p);
    CHECK(rep.max_abs_err == 0.0);
    CHECK(rep.tracking_horizon == doctest::Approx(20.0));
    CHECK(fit_report(f, p, 100, 10.0).tracking_horizon == doctest::Approx(200.0));
}

TEST_CASE("zero coupling fits to an empty sum") {
    SpectralParams p{0.0, 0.5, 10.0};
    const auto f = fit_bcf(p, 5);
    CHECK(f.size() == 0);
    CHECK(f.max_abs_err == 0.0);
}

TEST_CASE("fitted transform stays close to the exact one") {
    // |F_fit - F| <= C max_abs_err t_max with C = 2
    SpectralParams p{0.1, 0.3, 10.0};
    const auto f = fit_bcf(p, 5);
    for (double w = -3.0; w <= 3.0; w += 0.25) {
        const cplx d = half_fourier(f, w) - spectral::half_fourier_asymptotic(p, w).value();
        CHECK(std::abs(d) <= 2.0 * f.max_abs_err * f.t_max);
    }
}

TEST_CASE("finite-time transform of an exponential kernel") {
    ExponentialBcf f;
    f.terms.push_back({{0.7, -0.2}, {1.3, 0.4}});
    for (double w : {-1.0, 0.0, 2.0}) {
        for (double t : {0.0, 0.5, 4.0}) {
            quad::Options o;
            o.abs_tol = 1e-13;
            const cplx ref = t == 0.0 ? cplx{} : quad::gauss_kronrod([&](double tau) { return f.eval(tau) * std::exp(I * w * tau); }, 0.0, t, o).value;
            CHECK(std::abs(half_fourier_finite(f, w, t) - ref) < 1e-10);
        }
    }
    CHECK(std::abs(half_fourier_finite(f, 0.5, 200.0) - half_fourier(f, 0.5)) < 1e-12);
}

TEST_CASE("fits are deterministic for a fixed seed") {
    SpectralParams p{0.1, 0.7, 10.0};
    FitOptions o;
    o.seed = 99;
    const auto a = fit_bcf(p, 4, 0.0, 200, o), b = fit_bcf(p, 4, 0.0, 200, o);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(a.terms[j].g == b.terms[j].g);
        CHECK(a.terms[j].w == b.terms[j].w);
    }
    for (std::size_t j = 1; j < a.size(); ++j) CHECK(std::abs(a.terms[j - 1].g) >= std::abs(a.terms[j].g));
}

TEST_CASE("json round trip") {
    SpectralParams p{0.1, 0.7, 10.0};
    const auto f = fit_bcf(p, 3, 0.0, 100);
    const auto doc = from_json(to_json(f, p));
    CHECK(doc.params.alpha == p.alpha);
    CHECK(doc.params.s == p.s);
    CHECK(doc.params.omega_c == p.omega_c);
    CHECK(doc.fit.t_max == f.t_max);
    CHECK(doc.fit.max_abs_err == f.max_abs_err);
    REQUIRE(doc.fit.size() == f.size());
    for (std::size_t j = 0; j < f.size(); ++j) {
        CHECK(doc.fit.terms[j].g == f.terms[j].g);
        CHECK(doc.fit.terms[j].w == f.terms[j].w);
    }
    CHECK_THROWS(from_json(R"({"alpha":0.1,"s":1,"omega_c":10,"terms":[[1,0,-1,0]],"t_max":1,"max_abs_err":0})"));
}

TEST_CASE("default window") {
    SpectralParams p{0.1, 0.3, 10.0};
    const double t = default_t_max(p);
    CHECK(std::abs(spectral::bcf_exact(p, t)) / std::abs(spectral::bcf_exact(p, 0.0)) == doctest::Approx(1e-4).epsilon(1e-9));
}

TEST_CASE("argument validation") {
    auto k = [](double t) { return cplx(std::exp(-t)); };
    CHECK_THROWS_AS(fit_kernel(k, 0, 1.0, 100), std::invalid_argument);
    CHECK_THROWS_AS(fit_kernel(k, 13, 1.0, 200), std::invalid_argument);
    CHECK_THROWS_AS(fit_kernel(k, 2, -1.0, 100), std::invalid_argument);
    CHECK_THROWS_AS(fit_kernel(k, 5, 1.0, 40), std::invalid_argument);
}
