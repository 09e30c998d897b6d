// masters.hpp — perturbative master equations for the two-qubit model
//
// Every kind is written as
//   rho' = -i[H, rho] + sum_ij c_ij (A_i rho A_j^+ - 1/2 {A_j^+ A_i, rho})
// over the transition operators A_i = L_{w_i}. The kinds differ in the pair rule and
// rate matrix c_ij and in which Hermitian shift enters H.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsb/quantum.hpp"
#include "tsb/spectral.hpp"
#include "tsb/types.hpp"

namespace tsb::masters {

enum class Kind { QOME, PRWA, RFE_asym, RFE_t, GAME, CGME };

std::string kind_name(Kind k);
Kind parse_kind(const std::string& name);

struct Parts {
    bool hamiltonian{true};
    bool lamb_shift{true};
    bool dissipator{true};
    bool counterterm{false};

    static Parts full() { return {}; }
    static Parts dissipator_only() { return {true, false, true, false}; }
    static Parts unitary_only() { return {true, true, false, false}; }
    Parts with_counterterm(bool on = true) const {
        Parts p = *this;
        p.counterterm = on;
        return p;
    }
    std::string str() const;
    static Parts parse(const std::string& text);
};

struct MasterEquationSpec {
    Kind kind{Kind::QOME};
    double cg_tau{0.0};  // CGME window, 0 selects the default
    Parts parts{};
    quantum::SystemSpec sys{};
    spectral::SpectralParams p{};
    std::optional<std::vector<cplx>> f_values;  // per-transition F override, same order as the decomposition

    void validate() const;
};

/// Constant generator in double-sum form.
struct Generator {
    Mat4 H{Mat4::Zero()};
    std::vector<Mat4> ops;
    MatX rates;

    Mat4 apply(const Mat4& rho) const;
    Mat16 superoperator() const;
};

/// Column-major vec(rho) <-> rho.
Vec16 vec(const Mat4& rho);
Mat4 unvec(const Vec16& v);

/// Superoperator of rho -> f(rho), built column by column.
template <class F>
Mat16 superoperator_of(const F& f) {
    Mat16 S;
    for (int k = 0; k < 16; ++k) {
        Vec16 e = Vec16::Zero();
        e(k) = 1.0;
        S.col(k) = vec(f(unvec(e)));
    }
    return S;
}

/// Per-transition F(w_i) used by the kind (asymptotic or override).
std::vector<cplx> transition_coefficients(const MasterEquationSpec& spec,
                                          const std::vector<quantum::Transition>& T);

/// H_LS = sum_(i,j) kept 1/2 (S_i + S_j) L_j^+ L_i; not defined for CGME.
Mat4 lamb_shift(const MasterEquationSpec& spec);

/// Generator at time t (t is used by RFE_t and by the rotating CGME terms).
Generator build_generator(const MasterEquationSpec& spec, double t = 0.0);

/// CGME rate matrix and Hermitian shift coefficients in the interaction picture.
struct CoarseGrained {
    MatX rates;  // acts on A_i rho A_j^+
    MatX shift;  // H_tau = sum_ij shift_ij A_j^+ A_i
    std::vector<double> omegas;
};
CoarseGrained coarse_grained_coefficients(const spectral::SpectralParams& p, const std::vector<double>& omegas,
                                          double tau);

struct PropagateOptions {
    double rtol{1e-9};
    double atol{1e-11};
};

/// States on t_grid (t_grid[0] is the initial time).
std::vector<Mat4> propagate(const MasterEquationSpec& spec, const Mat4& rho0, const std::vector<double>& t_grid,
                            const PropagateOptions& opt = {});

struct TimescaleReport {
    double tau_env1{0.0};
    double tau_ind{0.0};
    double cg_tau{0.0};
    bool separation_ok{false};
};

TimescaleReport timescale_report(const MasterEquationSpec& spec);
double default_cg_tau(const MasterEquationSpec& spec);

struct CancellationMetrics {
    double delta_S{0.0};
    double gamma{0.0};
    double ratio{0.0};
};

CancellationMetrics counterterm_cancellation_metrics(const quantum::SystemSpec& sys, const spectral::SpectralParams& p);

}  // namespace tsb::masters
