#include "tsb/ode.hpp"

#include <algorithm>
#include <cmath>

namespace tsb::ode {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

double error_norm(const VecX& err, const VecX& y0, const VecX& y1, const Options& opt) {
    double acc = 0.0;
    const Eigen::Index n = err.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double r = std::abs(err(i)) / sc;
        acc += r * r;
    }
    return n > 0 ? std::sqrt(acc / n) : 0.0;
}

double initial_step(const Rhs& f, double t0, const VecX& y0, const VecX& f0, const Options& opt, long& calls) {
    auto scaled = [&](const VecX& v) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = opt.atol + opt.rtol * std::abs(y0(i));
            acc += std::norm(v(i)) / (sc * sc);
        }
        return std::sqrt(acc / std::max<Eigen::Index>(1, v.size()));
    };
    const double d0 = scaled(y0), d1n = scaled(f0);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    VecX y1 = y0 + h0 * f0, f1(y0.size());
    f(t0 + h0, y1, f1);
    ++calls;
    const double d2 = scaled(f1 - f0) / h0;
    const double h1 = std::max(d1n, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1n, d2), 0.2);
    return std::min({100 * h0, h1, opt.h_max});
}

}  // namespace

Stats integrate(const Rhs& f, VecX& y, double t0, const std::vector<double>& t_out, const Options& opt,
                const Observer& observe, const StepHook& hook) {
    Stats st;
    if (t_out.empty()) return st;
    if (t_out.front() < t0) throw std::invalid_argument("ode::integrate: output times precede t0");
    const Eigen::Index n = y.size();
    VecX k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), y1(n), err(n);
    VecX r1(n), r2(n), r3(n), r4(n), r5(n);

    double t = t0;
    std::size_t next = 0;
    while (next < t_out.size() && t_out[next] <= t0) observe(next, t_out[next], y), ++next;
    if (next == t_out.size()) return st;
    const double t_end = t_out.back();

    f(t, y, k1);
    ++st.rhs_calls;
    if (!k1.allFinite()) throw IntegrationError("ode::integrate: non-finite derivative", t);
    double h = opt.h_init > 0.0 ? opt.h_init : initial_step(f, t, y, k1, opt, st.rhs_calls);
    bool last_rejected = false;

    while (next < t_out.size()) {
        if (st.accepted + st.rejected >= opt.max_steps) throw IntegrationError("ode::integrate: step budget exhausted", t);
        h = std::min({h, opt.h_max, t_end - t});
        if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) throw IntegrationError("ode::integrate: step size underflow", t);

        yt = y + h * (a21 * k1);
        f(t + c2 * h, yt, k2);
        yt = y + h * (a31 * k1 + a32 * k2);
        f(t + c3 * h, yt, k3);
        yt = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * h, yt, k4);
        yt = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * h, yt, k5);
        yt = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, yt, k6);
        y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f(t + h, y1, k7);
        st.rhs_calls += 6;
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = error_norm(err, y, y1, opt);

        if (!std::isfinite(en)) {
            h *= 0.1;
            last_rejected = true;
            ++st.rejected;
            continue;
        }
        if (en > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
            ++st.rejected;
            continue;
        }

        const double t_new = (t_end - (t + h) <= 1e-13 * std::max(1.0, std::abs(t_end))) ? t_end : t + h;
        // dense output on [t, t_new]
        while (next < t_out.size() && t_out[next] <= t_new) {
            const double th = (t_out[next] - t) / h;
            if (th >= 1.0 || t_out[next] == t_new) {
                observe(next, t_out[next], y1);
            } else {
                r1 = y;
                r2 = y1 - y;
                r3 = h * k1 - r2;
                r4 = r2 - h * k7 - r3;
                r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                const double th1 = 1.0 - th;
                const VecX yi = r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
                observe(next, t_out[next], yi);
            }
            ++next;
        }
        ++st.accepted;
        t = t_new;
        y = y1;
        k1 = k7;
        if (hook && hook(t, y)) {
            f(t, y, k1);
            ++st.rhs_calls;
        }
        const double fac_max = last_rejected ? 1.0 : 10.0;
        h *= std::min(fac_max, std::max(0.2, 0.9 * std::pow(std::max(en, 1e-10), -0.2)));
        last_rejected = false;
    }
    return st;
}

}  // namespace tsb::ode
