// quantum.hpp — two-qubit operators, transition decomposition and concurrence
//
// Basis order {|uu>, |ud>, |du>, |dd>} in the sigma_z product basis, qubit A first.

#pragma once

#include <stdexcept>
#include <vector>

#include "tsb/spectral.hpp"
#include "tsb/types.hpp"

namespace tsb::quantum {

struct SystemSpec {
    double omega_A{1.0};
    double omega_B{1.0};
    bool include_counterterm{false};

    void validate() const;
    bool resonant(double tol = 1e-12) const;
};

Eigen::Matrix2cd sigma_x();
Eigen::Matrix2cd sigma_y();
Eigen::Matrix2cd sigma_z();

MatX kron(const MatX& a, const MatX& b);
Mat4 kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b);

/// (sigma_z^A + sigma_z^B) / 2 = diag(1, 0, 0, -1)
Mat4 coupling_operator();

/// -(w_A/2) sigma_x^A - (w_B/2) sigma_x^B
Mat4 system_hamiltonian(const SystemSpec& sys);

/// (alpha wc / 2) Gamma(s) L^2
Mat4 counterterm(const spectral::SpectralParams& p);

/// H_sys, plus the counterterm when sys.include_counterterm is set.
Mat4 build_hamiltonian(const SystemSpec& sys, const spectral::SpectralParams& p);

Vec4 ket_up_up();
Vec4 bell_minus();  // (|ud> - |du>)/sqrt 2
Vec4 bell_plus();   // (|uu> + |dd>)/sqrt 2
Mat4 projector(const Vec4& psi);

struct Transition {
    double omega{0.0};
    Mat4 op;
};

/// L = sum_w L_w with [H_sys, L_w] = -w L_w; frequencies sorted descending.
std::vector<Transition> transition_decomposition(const SystemSpec& sys, double merge_tol = 1e-9);

class NonPositiveSpectrum : public std::runtime_error {
public:
    explicit NonPositiveSpectrum(double a_min)
        : std::runtime_error("concurrence: eigenvalue of rho rho~ below -1e-9; apply positivity_fix"),
          a_min_(a_min) {}
    double a_min() const { return a_min_; }

private:
    double a_min_;
};

/// (sigma_y x sigma_y) rho* (sigma_y x sigma_y)
Mat4 spin_flip(const Mat4& rho);

/// Decreasingly sorted sqrt of the eigenvalues of rho rho~.
std::vector<double> concurrence_lambdas(const Mat4& rho);

/// Signed concurrence l1 - l2 - l3 - l4.
double concurrence(const Mat4& rho);

/// Same quantity from the eigenvalues of R = sqrt(sqrt(rho) rho~ sqrt(rho)).
double concurrence_r_matrix(const Mat4& rho);

inline double concurrence_clamped(const Mat4& rho) { return std::max(0.0, concurrence(rho)); }

struct PositivityFix {
    Mat4 rho;
    double trace_before{1.0};  // trace of sqrt(rho rho^dagger) before renormalization
};

PositivityFix positivity_fix(const Mat4& rho);

/// Concurrence of rho, routed through positivity_fix when rho rho~ has negative spectrum.
double concurrence_with_fix(const Mat4& rho, bool* fixed = nullptr);

bool bell_dfs_check(const SystemSpec& sys, double tol = 1e-12);

double hilbert_schmidt_distance(const Mat4& a, const Mat4& b);

}  // namespace tsb::quantum
