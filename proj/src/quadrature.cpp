#include "tsb/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace tsb::quad {

namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b;
    cplx value;
    double error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

Segment kronrod15(const ComplexFn& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const cplx fc = f(c);
    cplx k = fc * kWgk[7];
    cplx g = fc * kWg[3];
    for (int i = 0; i < 7; ++i) {
        const double dx = h * kXgk[i];
        const cplx s = f(c - dx) + f(c + dx);
        k += kWgk[i] * s;
        if (i % 2 == 1) g += kWg[i / 2] * s;
    }
    return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace

Result gauss_kronrod(const ComplexFn& f, double a, double b, const Options& opt) {
    if (a == b) return {};
    std::priority_queue<Segment> heap;
    Segment first = kronrod15(f, a, b);
    cplx total = first.value;
    double err = first.error;
    heap.push(first);
    int n = 1;
    while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) && n < opt.max_intervals) {
        Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid == worst.a || mid == worst.b) {
            heap.push(worst);
            break;
        }
        Segment left = kronrod15(f, worst.a, mid);
        Segment right = kronrod15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++n;
    }
    // re-sum to shed accumulated cancellation in the running totals
    Result r;
    r.intervals = n;
    while (!heap.empty()) {
        r.value += heap.top().value;
        r.error += heap.top().error;
        heap.pop();
    }
    return r;
}

Result gauss_kronrod_panels(const ComplexFn& f, const std::vector<double>& breaks,
                            const Options& opt) {
    if (breaks.size() < 2) throw std::invalid_argument("gauss_kronrod_panels: need two breakpoints");
    Result total;
    const auto panels = static_cast<double>(breaks.size() - 1);
    Options per = opt;
    per.abs_tol = opt.abs_tol / panels;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        Result r = gauss_kronrod(f, breaks[i], breaks[i + 1], per);
        total.value += r.value;
        total.error += r.error;
        total.intervals += r.intervals;
    }
    return total;
}

GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    GaussLegendre rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace tsb::quad
