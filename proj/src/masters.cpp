#include "tsb/masters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "tsb/ode.hpp"
#include "tsb/quadrature.hpp"

namespace tsb::masters {

using quantum::Transition;

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::QOME: return "QOME";
        case Kind::PRWA: return "PRWA";
        case Kind::RFE_asym: return "RFE_asym";
        case Kind::RFE_t: return "RFE_t";
        case Kind::GAME: return "GAME";
        case Kind::CGME: return "CGME";
    }
    throw std::invalid_argument("unknown master equation kind");
}

Kind parse_kind(const std::string& name) {
    std::string u;
    for (char c : name) u += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == "QOME") return Kind::QOME;
    if (u == "PRWA") return Kind::PRWA;
    if (u == "RFE_ASYM" || u == "RFE") return Kind::RFE_asym;
    if (u == "RFE_T") return Kind::RFE_t;
    if (u == "GAME") return Kind::GAME;
    if (u == "CGME") return Kind::CGME;
    throw std::invalid_argument("unknown master equation kind: " + name);
}

std::string Parts::str() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(hamiltonian, "hamiltonian");
    add(lamb_shift, "lamb_shift");
    add(dissipator, "dissipator");
    add(counterterm, "counterterm");
    return out;
}

Parts Parts::parse(const std::string& text) {
    Parts p{false, false, false, false};
    std::string tok;
    std::istringstream in(text);
    while (std::getline(in, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (tok == "full") {
            p.hamiltonian = p.lamb_shift = p.dissipator = true;
        } else if (tok == "dissipator-only" || tok == "dissipator_only") {
            p.hamiltonian = p.dissipator = true;
        } else if (tok == "unitary-only" || tok == "unitary_only" || tok == "unitary") {
            p.hamiltonian = p.lamb_shift = true;
        } else if (tok == "hamiltonian") {
            p.hamiltonian = true;
        } else if (tok == "lamb_shift" || tok == "lamb-shift") {
            p.lamb_shift = true;
        } else if (tok == "dissipator") {
            p.dissipator = true;
        } else if (tok == "counterterm") {
            p.counterterm = true;
        } else if (!tok.empty()) {
            throw std::invalid_argument("unknown part: " + tok);
        }
    }
    if (!(p.hamiltonian || p.lamb_shift || p.dissipator || p.counterterm))
        throw std::invalid_argument("parts must not be empty");
    return p;
}

void MasterEquationSpec::validate() const {
    sys.validate();
    p.validate();
    if (!(parts.hamiltonian || parts.lamb_shift || parts.dissipator || parts.counterterm))
        throw std::invalid_argument("MasterEquationSpec: parts must not be empty");
    if (kind == Kind::CGME && !(cg_tau >= 0.0 && std::isfinite(cg_tau)))
        throw std::invalid_argument("MasterEquationSpec: cg_tau must be positive (0 selects the default)");
}

Vec16 vec(const Mat4& rho) {
    Vec16 v;
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 4; ++r) v(4 * c + r) = rho(r, c);
    return v;
}

Mat4 unvec(const Vec16& v) {
    Mat4 m;
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 4; ++r) m(r, c) = v(4 * c + r);
    return m;
}

Mat4 Generator::apply(const Mat4& rho) const {
    Mat4 out = -I * (H * rho - rho * H);
    const int n = static_cast<int>(ops.size());
    if (rates.size() == 0) return out;
    Mat4 K = Mat4::Zero();
    for (int i = 0; i < n; ++i) {
        Mat4 B = Mat4::Zero();  // sum_j c_ij A_j^+
        for (int j = 0; j < n; ++j) {
            const cplx c = rates(i, j);
            if (c == cplx(0.0)) continue;
            B += c * ops[j].adjoint();
            K += c * ops[j].adjoint() * ops[i];
        }
        out += ops[i] * rho * B;
    }
    out -= 0.5 * (K * rho + rho * K);
    return out;
}

Mat16 Generator::superoperator() const {
    return superoperator_of([this](const Mat4& r) { return apply(r); });
}

namespace {

void check_kind_transitions(const MasterEquationSpec& spec, const std::vector<Transition>& T) {
    if (spec.f_values && spec.f_values->size() != T.size())
        throw std::invalid_argument("f_values must have one entry per transition");
}

Mat4 base_hamiltonian(const MasterEquationSpec& spec) {
    Mat4 H = Mat4::Zero();
    if (spec.parts.hamiltonian) H += quantum::system_hamiltonian(spec.sys);
    if (spec.parts.counterterm || spec.sys.include_counterterm) H += quantum::counterterm(spec.p);
    return H;
}

bool pair_kept(Kind k, double wi, double wj, std::size_t i, std::size_t j) {
    switch (k) {
        case Kind::QOME: return i == j;
        case Kind::PRWA: return (wi > 0) == (wj > 0);
        default: return true;
    }
}

// sum over kept pairs of 1/2 (S_i + S_j) A_j^+ A_i
Mat4 shift_from(Kind k, const std::vector<Transition>& T, const std::vector<cplx>& F) {
    Mat4 H = Mat4::Zero();
    for (std::size_t i = 0; i < T.size(); ++i)
        for (std::size_t j = 0; j < T.size(); ++j)
            if (pair_kept(k, T[i].omega, T[j].omega, i, j))
                H += 0.5 * (F[i].imag() + F[j].imag()) * T[j].op.adjoint() * T[i].op;
    return H;
}

// Hermitian remainder of the Redfield generator once the S-only shift is split off
Mat4 redfield_rate_shift(const std::vector<Transition>& T, const std::vector<cplx>& F) {
    Mat4 H = Mat4::Zero();
    for (std::size_t i = 0; i < T.size(); ++i)
        for (std::size_t j = 0; j < T.size(); ++j)
            H += cplx(0.0, -0.5 * (F[i].real() - F[j].real())) * T[j].op.adjoint() * T[i].op;
    return H;
}

Generator generator_from_coefficients(const MasterEquationSpec& spec, const std::vector<Transition>& T,
                                      const std::vector<cplx>& F) {
    const Kind k = spec.kind;
    const std::size_t n = T.size();
    Generator g;
    g.H = base_hamiltonian(spec);
    for (const auto& t : T) g.ops.push_back(t.op);
    g.rates = MatX::Zero(n, n);
    if (spec.parts.lamb_shift) g.H += shift_from(k, T, F);
    if (!spec.parts.dissipator) return g;

    switch (k) {
        case Kind::QOME:
            for (std::size_t i = 0; i < n; ++i) g.rates(i, i) = 2.0 * F[i].real();
            break;
        case Kind::PRWA: {
            // one jump operator per sign group, rate = group mean
            for (int sign : {+1, -1}) {
                double sum = 0.0;
                int cnt = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if ((T[i].omega > 0) == (sign > 0)) sum += F[i].real(), ++cnt;
                if (cnt == 0) continue;
                const double rate = 2.0 * sum / cnt;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        if ((T[i].omega > 0) == (sign > 0) && (T[j].omega > 0) == (sign > 0)) g.rates(i, j) = rate;
            }
            break;
        }
        case Kind::GAME:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g.rates(i, j) = 2.0 * std::sqrt(std::max(0.0, F[i].real()) * std::max(0.0, F[j].real()));
            break;
        case Kind::RFE_asym:
        case Kind::RFE_t:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) g.rates(i, j) = F[i] + std::conj(F[j]);
            g.H += redfield_rate_shift(T, F);
            break;
        case Kind::CGME:
            throw std::logic_error("CGME is not built from F values");
    }
    return g;
}

double default_tau_env1(const spectral::SpectralParams& p) { return std::pow(10.0, 1.0 / (p.s + 1.0)) / p.omega_c; }

double default_tau_ind(const MasterEquationSpec& spec) {
    const double at = spectral::rescaled_coupling(spec.p);
    if (!(at > 0.0)) return std::numeric_limits<double>::infinity();
    return 0.2 / (at * spec.sys.omega_A);
}

double effective_cg_tau(const MasterEquationSpec& spec) { return spec.cg_tau > 0.0 ? spec.cg_tau : default_cg_tau(spec); }

Generator cgme_generator(const MasterEquationSpec& spec, const std::vector<Transition>& T, const CoarseGrained& cg,
                         double t) {
    const std::size_t n = T.size();
    Generator g;
    g.H = base_hamiltonian(spec);
    for (const auto& tr : T) g.ops.push_back(tr.op);
    g.rates = MatX::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const cplx ph = std::exp(I * (T[i].omega - T[j].omega) * t);
            if (spec.parts.dissipator) g.rates(i, j) = cg.rates(i, j) * ph;
            if (spec.parts.lamb_shift) g.H += cg.shift(i, j) * ph * T[j].op.adjoint() * T[i].op;
        }
    return g;
}

std::vector<double> omegas_of(const std::vector<Transition>& T) {
    std::vector<double> w;
    for (const auto& t : T) w.push_back(t.omega);
    return w;
}

}  // namespace

std::vector<cplx> transition_coefficients(const MasterEquationSpec& spec, const std::vector<Transition>& T) {
    check_kind_transitions(spec, T);
    if (spec.f_values) return *spec.f_values;
    std::vector<cplx> F;
    for (const auto& t : T) F.push_back(spectral::half_fourier_asymptotic(spec.p, t.omega).value());
    return F;
}

Mat4 lamb_shift(const MasterEquationSpec& spec) {
    if (spec.kind == Kind::CGME) throw std::invalid_argument("lamb_shift: CGME carries its own window-dependent shift");
    const auto T = quantum::transition_decomposition(spec.sys);
    return shift_from(spec.kind, T, transition_coefficients(spec, T));
}

CoarseGrained coarse_grained_coefficients(const spectral::SpectralParams& p, const std::vector<double>& omegas,
                                          double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("coarse_grained_coefficients: tau must be positive");
    const std::size_t n = omegas.size();
    CoarseGrained cg;
    cg.omegas = omegas;
    cg.rates = MatX::Zero(n, n);
    cg.shift = MatX::Zero(n, n);
    if (p.alpha == 0.0 || n == 0) return cg;

    double wmax = 0.0;
    for (double w : omegas) wmax = std::max(wmax, std::abs(w));
    const double cap = kPi / std::max(3.0 * wmax, 1e-300);
    std::vector<double> pos{0.0};
    double h = 0.1 / p.omega_c;
    while (pos.back() < tau) {
        pos.push_back(std::min(tau, pos.back() + std::min(h, cap)));
        h *= 2.0;
    }
    std::vector<double> breaks;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it)
        if (*it > 0.0) breaks.push_back(-*it);
    breaks.insert(breaks.end(), pos.begin(), pos.end());

    quad::Options qo;
    qo.rel_tol = 1e-8;
    qo.abs_tol = 1e-10 * std::abs(spectral::bcf_exact(p, 0.0)) * std::max(tau, 1.0 / p.omega_c) / 64.0;
    qo.max_intervals = 20000;

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double wj = omegas[j];
            const double d = omegas[j] - omegas[i];
            // h(u) = int_a^b e^{i d t2} dt2 over the square's diagonal strip
            auto window = [&](double u) -> cplx {
                const double a = std::max(0.0, -u), b = std::min(tau, tau - u);
                if (b <= a) return 0.0;
                if (std::abs(d) * (b - a) < 1e-8) return cplx(b - a) * std::exp(I * d * 0.5 * (a + b));
                return (std::exp(I * d * b) - std::exp(I * d * a)) / (I * d);
            };
            auto rate_f = [&](double u) { return spectral::bcf_exact(p, u) * std::exp(I * wj * u) * window(u); };
            auto shift_f = [&](double u) {
                const double sg = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
                return sg * rate_f(u);
            };
            cg.rates(i, j) = quad::gauss_kronrod_panels(rate_f, breaks, qo).value / tau;
            cg.shift(i, j) = quad::gauss_kronrod_panels(shift_f, breaks, qo).value / (2.0 * I * tau);
        }
    return cg;
}

Generator build_generator(const MasterEquationSpec& spec, double t) {
    spec.validate();
    const auto T = quantum::transition_decomposition(spec.sys);
    if (spec.kind == Kind::CGME) {
        const auto cg = coarse_grained_coefficients(spec.p, omegas_of(T), effective_cg_tau(spec));
        return cgme_generator(spec, T, cg, t);
    }
    if (spec.kind == Kind::RFE_t && !spec.f_values) {
        if (!(t >= 0.0)) throw std::invalid_argument("build_generator: RFE_t needs t >= 0");
        std::vector<cplx> F;
        for (const auto& tr : T) F.push_back(spectral::half_fourier_finite(spec.p, tr.omega, t));
        return generator_from_coefficients(spec, T, F);
    }
    return generator_from_coefficients(spec, T, transition_coefficients(spec, T));
}

std::vector<Mat4> propagate(const MasterEquationSpec& spec, const Mat4& rho0, const std::vector<double>& t_grid,
                            const PropagateOptions& opt) {
    spec.validate();
    if (t_grid.empty()) return {};
    if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw std::invalid_argument("propagate: t_grid must be sorted");
    const auto T = quantum::transition_decomposition(spec.sys);
    const std::size_t n = T.size();

    // rho' = (S0 + sum_k c_k(t) S_k) rho with scalar time dependence c_k(t)
    Mat16 S0 = Mat16::Zero();
    std::vector<Mat16> Sk;
    std::function<void(double, std::vector<cplx>&)> coeffs;

    if (spec.kind == Kind::RFE_t && !spec.f_values) {
        // generator is linear in (J_i, S_i): one superoperator per unit J and unit S
        MasterEquationSpec base = spec;
        base.f_values = std::vector<cplx>(n, 0.0);
        S0 = generator_from_coefficients(base, T, *base.f_values).superoperator();
        for (std::size_t i = 0; i < n; ++i)
            for (cplx unit : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
                std::vector<cplx> F(n, 0.0);
                F[i] = unit;
                Sk.push_back(generator_from_coefficients(base, T, F).superoperator() - S0);
            }
        auto table = std::make_shared<spectral::FiniteFourierTable>(spec.p, omegas_of(T), t_grid.back());
        auto buf = std::make_shared<std::vector<cplx>>();
        coeffs = [table, buf, n](double t, std::vector<cplx>& c) {
            table->at(t, *buf);
            c.resize(2 * n);
            for (std::size_t i = 0; i < n; ++i) {
                c[2 * i] = (*buf)[i].real();
                c[2 * i + 1] = (*buf)[i].imag();
            }
        };
    } else if (spec.kind == Kind::CGME) {
        const auto cg = coarse_grained_coefficients(spec.p, omegas_of(T), effective_cg_tau(spec));
        MasterEquationSpec bare = spec;
        bare.parts.dissipator = bare.parts.lamb_shift = false;
        S0 = cgme_generator(bare, T, cg, 0.0).superoperator();
        // group pair terms by their rotation frequency w_i - w_j
        std::map<long long, std::pair<double, Mat16>> groups;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                CoarseGrained one = cg;
                one.rates.setZero();
                one.shift.setZero();
                one.rates(i, j) = cg.rates(i, j);
                one.shift(i, j) = cg.shift(i, j);
                const Mat16 term = cgme_generator(spec, T, one, 0.0).superoperator() - cgme_generator(bare, T, one, 0.0).superoperator();
                const double d = T[i].omega - T[j].omega;
                const long long key = std::llround(d * 1e9);
                auto it = groups.find(key);
                if (it == groups.end())
                    groups.emplace(key, std::make_pair(d, term));
                else
                    it->second.second += term;
            }
        std::vector<double> freqs;
        for (auto& [key, g] : groups) {
            if (key == 0) {
                S0 += g.second;
            } else {
                freqs.push_back(g.first);
                Sk.push_back(g.second);
            }
        }
        coeffs = [freqs](double t, std::vector<cplx>& c) {
            c.resize(freqs.size());
            for (std::size_t k = 0; k < freqs.size(); ++k) c[k] = std::exp(I * freqs[k] * t);
        };
    } else {
        S0 = build_generator(spec).superoperator();
    }

    std::vector<cplx> c;
    auto rhs = [&](double t, const VecX& y, VecX& dy) {
        dy.resize(16);
        dy.noalias() = S0 * y;
        if (Sk.empty()) return;
        coeffs(t, c);
        for (std::size_t k = 0; k < Sk.size(); ++k)
            if (c[k] != cplx(0.0)) dy.noalias() += c[k] * (Sk[k] * y);
    };

    VecX y = vec(rho0);
    std::vector<Mat4> out(t_grid.size());
    ode::Options o;
    o.rtol = opt.rtol;
    o.atol = opt.atol;
    ode::integrate(rhs, y, t_grid.front(), t_grid, o, [&](std::size_t i, double, const VecX& v) {
        out[i] = unvec(v);
    });
    return out;
}

double default_cg_tau(const MasterEquationSpec& spec) {
    const double env = default_tau_env1(spec.p);
    const double ind = default_tau_ind(spec);
    if (!std::isfinite(ind)) return 10.0 * env;
    return std::sqrt(env * ind);
}

TimescaleReport timescale_report(const MasterEquationSpec& spec) {
    TimescaleReport r;
    r.tau_env1 = default_tau_env1(spec.p);
    r.tau_ind = default_tau_ind(spec);
    r.cg_tau = effective_cg_tau(spec);
    r.separation_ok = 3.0 * r.tau_env1 <= r.cg_tau && 3.0 * r.cg_tau <= r.tau_ind;
    return r;
}

CancellationMetrics counterterm_cancellation_metrics(const quantum::SystemSpec& sys, const spectral::SpectralParams& p) {
    sys.validate();
    p.validate();
    CancellationMetrics m;
    m.delta_S = -spectral::counterterm_coefficient(p) - spectral::lamb_function(p, sys.omega_A);
    m.gamma = spectral::spectral_density(p, sys.omega_A);
    m.ratio = m.delta_S != 0.0 ? m.gamma / m.delta_S : 0.0;
    return m;
}

}  // namespace tsb::masters
