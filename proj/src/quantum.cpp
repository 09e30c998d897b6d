#include "tsb/quantum.hpp"

#include <algorithm>
#include <cmath>

namespace tsb::quantum {

void SystemSpec::validate() const {
    if (!(omega_A > 0.0) || !(omega_B > 0.0)) throw std::invalid_argument("SystemSpec: frequencies must be > 0");
}

bool SystemSpec::resonant(double tol) const { return std::abs(omega_A - omega_B) <= tol * omega_A; }

Eigen::Matrix2cd sigma_x() {
    Eigen::Matrix2cd m;
    m << 0, 1, 1, 0;
    return m;
}

Eigen::Matrix2cd sigma_y() {
    Eigen::Matrix2cd m;
    m << 0, -I, I, 0;
    return m;
}

Eigen::Matrix2cd sigma_z() {
    Eigen::Matrix2cd m;
    m << 1, 0, 0, -1;
    return m;
}

MatX kron(const MatX& a, const MatX& b) {
    MatX out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Mat4 kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) { return kron(a, b); }

Mat4 coupling_operator() {
    Mat4 L = Mat4::Zero();
    L(0, 0) = 1.0;
    L(3, 3) = -1.0;
    return L;
}

Mat4 system_hamiltonian(const SystemSpec& sys) {
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    return -0.5 * sys.omega_A * kron2(sigma_x(), id) - 0.5 * sys.omega_B * kron2(id, sigma_x());
}

Mat4 counterterm(const spectral::SpectralParams& p) {
    const Mat4 L = coupling_operator();
    return spectral::counterterm_coefficient(p) * L * L;
}

Mat4 build_hamiltonian(const SystemSpec& sys, const spectral::SpectralParams& p) {
    Mat4 H = system_hamiltonian(sys);
    if (sys.include_counterterm) H += counterterm(p);
    return H;
}

Vec4 ket_up_up() { return Vec4(1, 0, 0, 0); }

Vec4 bell_minus() { return Vec4(0, 1, -1, 0) / std::sqrt(2.0); }

Vec4 bell_plus() { return Vec4(1, 0, 0, 1) / std::sqrt(2.0); }

Mat4 projector(const Vec4& psi) { return psi * psi.adjoint(); }

std::vector<Transition> transition_decomposition(const SystemSpec& sys, double merge_tol) {
    const Mat4 H = system_hamiltonian(sys);
    const Mat4 L = coupling_operator();
    Eigen::SelfAdjointEigenSolver<Mat4> es(H);
    const auto& ev = es.eigenvalues();
    const Mat4& V = es.eigenvectors();
    const double tol = merge_tol * sys.omega_A;

    // eigenspace projectors
    std::vector<double> levels;
    std::vector<Mat4> proj;
    for (int i = 0; i < 4; ++i) {
        const Vec4 v = V.col(i);
        if (!levels.empty() && std::abs(ev(i) - levels.back()) <= tol) {
            proj.back() += v * v.adjoint();
        } else {
            levels.push_back(ev(i));
            proj.push_back(v * v.adjoint());
        }
    }

    std::vector<Transition> out;
    for (std::size_t a = 0; a < levels.size(); ++a) {
        for (std::size_t b = 0; b < levels.size(); ++b) {
            const double w = levels[b] - levels[a];
            const Mat4 block = proj[a] * L * proj[b];
            auto it = std::find_if(out.begin(), out.end(), [&](const Transition& t) { return std::abs(t.omega - w) <= tol; });
            if (it == out.end()) {
                out.push_back({w, block});
            } else {
                it->op += block;
            }
        }
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const Transition& t) { return t.op.norm() < 1e-12; }), out.end());
    std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) { return a.omega > b.omega; });
    return out;
}

Mat4 spin_flip(const Mat4& rho) {
    const Mat4 yy = kron2(sigma_y(), sigma_y());
    return yy * rho.conjugate() * yy;
}

std::vector<double> concurrence_lambdas(const Mat4& rho) {
    const Mat4 m = rho * spin_flip(rho);
    Eigen::ComplexEigenSolver<Mat4> es(m, false);
    std::vector<double> lam;
    for (int i = 0; i < 4; ++i) {
        const double a = es.eigenvalues()(i).real();
        if (a < -1e-9) throw NonPositiveSpectrum(a);
        lam.push_back(std::sqrt(std::max(0.0, a)));
    }
    std::sort(lam.begin(), lam.end(), std::greater<>());
    return lam;
}

double concurrence(const Mat4& rho) {
    const auto l = concurrence_lambdas(rho);
    return l[0] - l[1] - l[2] - l[3];
}

double concurrence_r_matrix(const Mat4& rho) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (rho + rho.adjoint()));
    const Eigen::Vector4d d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat4 sq = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    const Mat4 m = sq * spin_flip(rho) * sq;
    Eigen::SelfAdjointEigenSolver<Mat4> er(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    std::vector<double> l;
    for (int i = 0; i < 4; ++i) l.push_back(std::sqrt(std::max(0.0, er.eigenvalues()(i))));
    std::sort(l.begin(), l.end(), std::greater<>());
    return l[0] - l[1] - l[2] - l[3];
}

PositivityFix positivity_fix(const Mat4& rho) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (rho + rho.adjoint()));
    const Eigen::Vector4d d = es.eigenvalues().cwiseAbs();
    PositivityFix out;
    out.trace_before = d.sum();
    out.rho = es.eigenvectors() * (d / out.trace_before).asDiagonal() * es.eigenvectors().adjoint();
    return out;
}

double concurrence_with_fix(const Mat4& rho, bool* fixed) {
    if (fixed) *fixed = false;
    try {
        return concurrence(rho);
    } catch (const NonPositiveSpectrum&) {
        if (fixed) *fixed = true;
        return concurrence(positivity_fix(rho).rho);
    }
}

bool bell_dfs_check(const SystemSpec& sys, double tol) {
    const Vec4 phi = bell_minus();
    const Mat4 H = system_hamiltonian(sys);
    const bool annihilated = (coupling_operator() * phi).norm() <= tol;
    const Vec4 hphi = H * phi;
    const cplx e = phi.dot(hphi);
    const bool invariant = (hphi - e * phi).norm() <= tol * std::max(1.0, H.norm());
    return annihilated && invariant;
}

double hilbert_schmidt_distance(const Mat4& a, const Mat4& b) { return (a - b).norm(); }

}  // namespace tsb::quantum
