#include "tsb/bcf_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"

namespace tsb::bcf {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using ResidualFn = std::function<void(const VectorXd&, VectorXd&, MatrixXd*)>;

// Levenberg-Marquardt with Marquardt diagonal scaling.
double levenberg_marquardt(const ResidualFn& fn, VectorXd& x, int max_iter) {
    VectorXd r;
    MatrixXd J;
    fn(x, r, &J);
    double cost = r.squaredNorm();
    double lambda = -1.0;
    for (int it = 0; it < max_iter; ++it) {
        const MatrixXd A = J.transpose() * J;
        const VectorXd g = J.transpose() * r;
        VectorXd d = A.diagonal().cwiseMax(1e-300);
        if (lambda < 0.0) lambda = 1e-3;
        bool accepted = false;
        for (int tries = 0; tries < 12; ++tries) {
            MatrixXd M = A;
            M.diagonal() += lambda * d;
            const VectorXd step = M.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            VectorXd xn = x + step;
            VectorXd rn;
            fn(xn, rn, nullptr);
            const double cn = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
            if (cn < cost) {
                const double rel = (cost - cn) / cost;
                x = xn;
                cost = cn;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < 1e-12) return cost;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) break;
        fn(x, r, &J);
    }
    return cost;
}

struct Problem {
    std::vector<double> u;  // scaled times
    std::vector<cplx> y;    // scaled kernel values
    int n_terms{0};

    std::size_t size() const { return u.size(); }

    cplx rate(const VectorXd& th, int j) const { return {std::exp(th(4 * j + 2)), th(4 * j + 3)}; }
    cplx amp(const VectorXd& th, int j) const { return {th(4 * j), th(4 * j + 1)}; }

    // residual m_i - y_i and its derivatives with respect to the 4n real parameters
    void residuals(const VectorXd& th, std::vector<cplx>& r, Eigen::MatrixXcd* D) const {
        const std::size_t n = size();
        r.assign(n, cplx{});
        if (D) D->resize(static_cast<Eigen::Index>(n), 4 * n_terms);
        for (std::size_t i = 0; i < n; ++i) {
            cplx m = 0.0;
            for (int j = 0; j < n_terms; ++j) {
                const cplx w = rate(th, j), g = amp(th, j);
                const cplx e = std::exp(-w * u[i]);
                m += g * e;
                if (D) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    (*D)(ii, 4 * j) = e;
                    (*D)(ii, 4 * j + 1) = I * e;
                    (*D)(ii, 4 * j + 2) = -g * u[i] * std::exp(th(4 * j + 2)) * e;
                    (*D)(ii, 4 * j + 3) = -I * g * u[i] * e;
                }
            }
            r[i] = m - y[i];
        }
    }

    double max_error(const VectorXd& th) const {
        std::vector<cplx> r;
        residuals(th, r, nullptr);
        double e = 0.0;
        for (const auto& v : r) e = std::max(e, std::abs(v));
        return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
    }

    // amplitudes by linear least squares for fixed rates
    void solve_amplitudes(VectorXd& th, const std::vector<double>& weight) const {
        const auto n = static_cast<Eigen::Index>(size());
        Eigen::MatrixXcd A(n, n_terms);
        Eigen::VectorXcd b(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sw = std::sqrt(weight[static_cast<std::size_t>(i)]);
            for (int j = 0; j < n_terms; ++j) A(i, j) = sw * std::exp(-rate(th, j) * u[static_cast<std::size_t>(i)]);
            b(i) = sw * y[static_cast<std::size_t>(i)];
        }
        const Eigen::VectorXcd g = A.completeOrthogonalDecomposition().solve(b);
        for (int j = 0; j < n_terms; ++j) {
            th(4 * j) = g(j).real();
            th(4 * j + 1) = g(j).imag();
        }
    }

    ResidualFn weighted(const std::vector<double>& weight) const {
        return [this, &weight](const VectorXd& th, VectorXd& out, MatrixXd* J) {
            std::vector<cplx> r;
            Eigen::MatrixXcd D;
            residuals(th, r, J ? &D : nullptr);
            const auto n = static_cast<Eigen::Index>(size());
            out.resize(2 * n);
            if (J) J->resize(2 * n, 4 * n_terms);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sw = std::sqrt(weight[static_cast<std::size_t>(i)]);
                out(2 * i) = sw * r[static_cast<std::size_t>(i)].real();
                out(2 * i + 1) = sw * r[static_cast<std::size_t>(i)].imag();
                if (J) {
                    J->row(2 * i) = sw * D.row(i).real();
                    J->row(2 * i + 1) = sw * D.row(i).imag();
                }
            }
        };
    }

    // sum_i (|r_i| / e_ref)^p written as a least-squares problem
    ResidualFn lp(double p, double e_ref) const {
        return [this, p, e_ref](const VectorXd& th, VectorXd& out, MatrixXd* J) {
            std::vector<cplx> r;
            Eigen::MatrixXcd D;
            residuals(th, r, J ? &D : nullptr);
            const auto n = static_cast<Eigen::Index>(size());
            out.resize(n);
            if (J) J->resize(n, 4 * n_terms);
            for (Eigen::Index i = 0; i < n; ++i) {
                const cplx ri = r[static_cast<std::size_t>(i)];
                const double a = std::abs(ri) / e_ref;
                out(i) = std::pow(a, 0.5 * p);
                if (J) {
                    if (a == 0.0) {
                        J->row(i).setZero();
                    } else {
                        const double f = 0.5 * p * std::pow(a, 0.5 * p - 1.0) / e_ref;
                        const cplx ph = std::conj(ri) / std::abs(ri);
                        J->row(i) = f * (ph * D.row(i)).real();
                    }
                }
            }
        };
    }
};

VectorXd params_from_rates(const std::vector<cplx>& rates) {
    VectorXd th = VectorXd::Zero(4 * static_cast<Eigen::Index>(rates.size()));
    for (std::size_t j = 0; j < rates.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(4 * j);
        th(k + 2) = std::log(std::max(rates[j].real(), 1e-8));
        th(k + 3) = rates[j].imag();
    }
    return th;
}

// rank-reduced matrix pencil on a uniform grid
std::vector<cplx> matrix_pencil_rates(const Kernel& k, double scale, int n_terms, double u_end, double u_floor) {
    const int N = std::max(60, 12 * n_terms);
    const int L = N / 3;
    const double h = u_end / (N - 1);
    Eigen::VectorXcd s(N);
    for (int i = 0; i < N; ++i) s(i) = k(i * h * scale);
    Eigen::MatrixXcd Y0(N - L, L), Y1(N - L, L);
    for (int r = 0; r < N - L; ++r)
        for (int c = 0; c < L; ++c) {
            Y0(r, c) = s(r + c);
            Y1(r, c) = s(r + c + 1);
        }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Y0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int m = std::min<int>(n_terms, static_cast<int>(svd.singularValues().size()));
    const Eigen::MatrixXcd U = svd.matrixU().leftCols(m);
    const Eigen::MatrixXcd V = svd.matrixV().leftCols(m);
    Eigen::MatrixXcd Z = U.adjoint() * Y1 * V;
    for (int i = 0; i < m; ++i) Z.row(i) /= std::max(svd.singularValues()(i), 1e-300);
    const Eigen::VectorXcd z = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(Z).eigenvalues();
    std::vector<cplx> rates;
    for (int i = 0; i < m; ++i) {
        cplx w = -std::log(z(i)) / h;
        if (!std::isfinite(w.real()) || w.real() < u_floor) w = {u_floor, std::isfinite(w.imag()) ? w.imag() : 0.0};
        rates.push_back(w);
    }
    while (static_cast<int>(rates.size()) < n_terms) rates.push_back({u_floor * (rates.size() + 1), 0.0});
    return rates;
}

struct Candidate {
    VectorXd th;
    double err{std::numeric_limits<double>::infinity()};
};

Candidate lawson(const Problem& prob, VectorXd th, int iterations) {
    const std::size_t n = prob.size();
    std::vector<double> w(n, 1.0 / n);
    prob.solve_amplitudes(th, w);
    Candidate best{th, prob.max_error(th)};
    for (int it = 0; it < iterations; ++it) {
        levenberg_marquardt(prob.weighted(w), th, 30);
        std::vector<cplx> r;
        prob.residuals(th, r, nullptr);
        double emax = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::abs(r[i]);
            emax = std::max(emax, e);
            w[i] *= e;
            sum += w[i];
        }
        if (!std::isfinite(emax)) break;
        if (emax < best.err) best = {th, emax};
        if (emax < 1e-13 || !(sum > 0.0)) break;
        for (auto& wi : w) wi = 0.95 * wi / sum + 0.05 / n;
    }
    return best;
}

Candidate lp_refine(const Problem& prob, Candidate c) {
    if (c.err < 1e-12) return c;
    for (double p : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
        for (int pass = 0; pass < 3; ++pass) {
            VectorXd th = c.th;
            levenberg_marquardt(prob.lp(p, c.err), th, 40);
            const double e = prob.max_error(th);
            if (e < c.err) {
                c = {th, e};
            } else {
                break;
            }
        }
    }
    return c;
}

ExponentialBcf assemble(const Problem& prob, const VectorXd& th, double scale, double norm) {
    ExponentialBcf f;
    for (int j = 0; j < prob.n_terms; ++j) f.terms.push_back({prob.amp(th, j) * norm, prob.rate(th, j) / scale});
    std::sort(f.terms.begin(), f.terms.end(), [](const ExpTerm& a, const ExpTerm& b) {
        const double ga = std::abs(a.g), gb = std::abs(b.g);
        if (ga != gb) return ga > gb;
        return a.w.real() < b.w.real();
    });
    return f;
}

}  // namespace

cplx ExponentialBcf::eval(double tau) const {
    cplx v = 0.0;
    for (const auto& t : terms) v += t.g * std::exp(-t.w * tau);
    return v;
}

cplx eval_fit(const ExponentialBcf& f, double tau) { return f.eval(tau); }

std::vector<double> fit_grid(double tau_min, double t_max, int n) {
    std::vector<double> g{0.0};
    if (n < 2) return g;
    const double l0 = std::log(tau_min), l1 = std::log(t_max);
    for (int i = 0; i < n - 1; ++i) g.push_back(std::exp(l0 + (l1 - l0) * i / std::max(1, n - 2)));
    return g;
}

ExponentialBcf fit_kernel(const Kernel& k, int n_terms, double t_max, int grid_points, const FitOptions& opt) {
    if (n_terms < 1 || n_terms > 12) throw std::invalid_argument("fit_kernel: n_terms must lie in [1, 12]");
    if (!(t_max > 0.0)) throw std::invalid_argument("fit_kernel: t_max must be > 0");
    if (grid_points < 10 * n_terms) throw std::invalid_argument("fit_kernel: grid_points must be >= 10 n_terms");
    if (!(opt.time_scale > 0.0)) throw std::invalid_argument("fit_kernel: time_scale must be > 0");

    const double scale = opt.time_scale;
    const double norm = std::abs(k(0.0));
    ExponentialBcf out;
    out.t_max = t_max;
    out.norm_scale = norm;
    if (norm == 0.0) return out;

    const double u_max = t_max / scale;
    const double u_min = std::min(0.01, 0.01 * u_max);
    Problem prob;
    prob.n_terms = n_terms;
    for (double tau : fit_grid(u_min * scale, t_max, grid_points)) {
        prob.u.push_back(tau / scale);
        prob.y.push_back(k(tau) / norm);
    }

    std::vector<VectorXd> starts;
    {
        // log-spaced real rates, with and without an oscillating part
        std::vector<cplx> r0, r1;
        const double lo = 1.0 / u_max, hi = 3.0;
        for (int j = 0; j < n_terms; ++j) {
            const double x = n_terms == 1 ? 1.0 : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * j / (n_terms - 1));
            r0.push_back({x, 0.0});
            r1.push_back({x, 0.5 * x});
        }
        starts.push_back(params_from_rates(r0));
        starts.push_back(params_from_rates(r1));
    }
    for (double frac : {1.0, 0.1}) {
        starts.push_back(params_from_rates(matrix_pencil_rates(k, scale, n_terms, frac * u_max, 0.5 / u_max)));
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < opt.random_starts; ++s) {
        std::vector<cplx> r;
        for (int j = 0; j < n_terms; ++j) {
            const double x = std::exp(std::log(1.0 / u_max) + unit(rng) * (std::log(10.0) - std::log(1.0 / u_max)));
            r.push_back({x, (2.0 * unit(rng) - 1.0) * x});
        }
        starts.push_back(params_from_rates(r));
    }

    Candidate best;
    for (const auto& th : starts) {
        Candidate c = lawson(prob, th, opt.lawson_iterations);
        if (c.err < best.err) best = c;
    }
    if (opt.lp_refine) best = lp_refine(prob, best);

    if (best.th.size() == 0) {
        throw FitNotConverged("fit_kernel: no start produced a finite fit", out);
    }
    ExponentialBcf fit = assemble(prob, best.th, scale, norm);
    fit.t_max = t_max;
    fit.norm_scale = norm;
    double err = 0.0;
    for (double tau : fit_grid(u_min * scale, t_max, 4 * grid_points)) err = std::max(err, std::abs(fit.eval(tau) - k(tau)));
    fit.max_abs_err = err;
    bool decaying = true;
    for (const auto& t : fit.terms) decaying = decaying && t.w.real() > 0.0 && std::isfinite(std::abs(t.g));
    if (!std::isfinite(err) || !decaying) throw FitNotConverged("fit_kernel: optimizer did not converge", fit);
    return fit;
}

double default_t_max(const spectral::SpectralParams& p) {
    return std::sqrt(std::pow(1e-4, -2.0 / (p.s + 1.0)) - 1.0) / p.omega_c;
}

ExponentialBcf fit_bcf(const spectral::SpectralParams& p, int n_terms, double t_max, int grid_points, FitOptions opt) {
    if (!(t_max > 0.0)) t_max = default_t_max(p);
    opt.time_scale = 1.0 / p.omega_c;
    return fit_kernel([&p](double tau) { return spectral::bcf_exact(p, tau); }, n_terms, t_max, grid_points, opt);
}

FitReport fit_report(const ExponentialBcf& f, const spectral::SpectralParams& p, int points, double extent) {
    FitReport rep;
    const double t_max = f.t_max > 0.0 ? f.t_max : default_t_max(p);
    const double t_end = extent * t_max;
    rep.tau = fit_grid(std::min(0.01 / p.omega_c, 0.01 * t_max), t_end, points);
    rep.tracking_horizon = t_end;
    bool tracking = true;
    for (std::size_t i = 0; i < rep.tau.size(); ++i) {
        const double tau = rep.tau[i];
        const cplx ex = spectral::bcf_exact(p, tau);
        const double e = std::abs(f.eval(tau) - ex);
        const double rel = std::abs(ex) > 0.0 ? e / std::abs(ex) : 0.0;
        rep.abs_err.push_back(e);
        rep.rel_err.push_back(rel);
        if (tau <= t_max) rep.max_abs_err = std::max(rep.max_abs_err, e);
        if (tracking && rel >= 0.1) {
            tracking = false;
            rep.tracking_horizon = i > 0 ? rep.tau[i - 1] : 0.0;
        }
    }
    return rep;
}

cplx half_fourier(const ExponentialBcf& f, double omega) {
    cplx v = 0.0;
    for (const auto& t : f.terms) v += t.g / (t.w - I * omega);
    return v;
}

cplx half_fourier_finite(const ExponentialBcf& f, double omega, double t) {
    cplx v = 0.0;
    for (const auto& term : f.terms) {
        const cplx d = term.w - I * omega;
        v += term.g * (1.0 - std::exp(-d * t)) / d;
    }
    return v;
}

std::string to_json(const ExponentialBcf& f, const spectral::SpectralParams& p) {
    nlohmann::json j;
    j["alpha"] = p.alpha;
    j["s"] = p.s;
    j["omega_c"] = p.omega_c;
    j["omega_ref"] = p.omega_ref;
    auto terms = nlohmann::json::array();
    for (const auto& t : f.terms) terms.push_back({t.g.real(), t.g.imag(), t.w.real(), t.w.imag()});
    j["terms"] = terms;
    j["t_max"] = f.t_max;
    j["max_abs_err"] = f.max_abs_err;
    j["norm_scale"] = f.norm_scale;
    return j.dump(2);
}

FitDocument from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    FitDocument doc;
    doc.params.alpha = j.at("alpha").get<double>();
    doc.params.s = j.at("s").get<double>();
    doc.params.omega_c = j.at("omega_c").get<double>();
    doc.params.omega_ref = j.value("omega_ref", 1.0);
    for (const auto& t : j.at("terms")) {
        if (t.size() != 4) throw std::invalid_argument("from_json: each term needs [ReG, ImG, ReW, ImW]");
        ExpTerm term{{t[0].get<double>(), t[1].get<double>()}, {t[2].get<double>(), t[3].get<double>()}};
        if (!(term.w.real() > 0.0)) throw std::invalid_argument("from_json: rates must have Re W > 0");
        doc.fit.terms.push_back(term);
    }
    doc.fit.t_max = j.at("t_max").get<double>();
    doc.fit.max_abs_err = j.at("max_abs_err").get<double>();
    doc.fit.norm_scale = j.value("norm_scale", std::abs(spectral::bcf_exact(doc.params, 0.0)));
    return doc;
}

}  // namespace tsb::bcf
