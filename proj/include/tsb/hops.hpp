// hops.hpp — hierarchy of pure states for the nonlinear (or linear) NMQSD equation
//
// For multi-indices k with |k| <= k_max,
//   d/dt psi^(k) = (-iH - k.W + L z~*_t) psi^(k) + L sum_j k_j G_j psi^(k-e_j) - Lbar sum_j psi^(k+e_j)
// with z~*_t = z*_t + sum_j s_j, d/dt s_j = -W_j^* s_j + G_j^* <L>_t and Lbar = L - <L>_t
// in the nonlinear variant (z~* = z*, Lbar = L and s_j absent in the linear one).

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsb/bcf_fit.hpp"
#include "tsb/noise.hpp"
#include "tsb/ode.hpp"
#include "tsb/quantum.hpp"
#include "tsb/spectral.hpp"
#include "tsb/types.hpp"

namespace tsb::hops {

struct HopsConfig {
    spectral::SpectralParams p{};  // exact environment: noise statistics and counterterm
    bcf::ExponentialBcf bcf{};     // hierarchy coefficients
    int k_max{2};
    int n_samples{2000};
    double dt{0.1};  // output spacing
    double t_end{10.0};
    std::uint64_t seed{1};
    bool nonlinear{true};
    double rtol{1e-8};
    double atol{1e-10};
    bool antithetic{false};  // pair trajectories with sign-flipped noise
    bool ladder{true};       // rerun at k_max - 1 for the convergence ladder
    int workers{0};          // 0: TSB_WORKERS or hardware concurrency
    noise::NoiseOptions noise{};

    void validate() const;
    std::vector<double> time_grid() const;
};

/// Simplex multi-index set with neighbour tables.
class HierarchyIndex {
public:
    HierarchyIndex(int n_terms, int k_max);
    std::size_t size() const { return index_.size(); }
    int n_terms() const { return n_terms_; }
    const std::vector<int>& multi_index(std::size_t a) const { return index_[a]; }
    /// position of k - e_j (or -1)
    int lower(std::size_t a, int j) const { return lower_[a * n_terms_ + j]; }
    /// position of k + e_j (or -1 beyond the truncation surface)
    int upper(std::size_t a, int j) const { return upper_[a * n_terms_ + j]; }

private:
    int n_terms_;
    std::vector<std::vector<int>> index_;
    std::vector<int> lower_, upper_;
};

/// C(k_max + J, J)
std::size_t hierarchy_size(int n_terms, int k_max);

class TrajectoryError : public std::runtime_error {
public:
    TrajectoryError(const std::string& what, double t, std::uint64_t seed = 0)
        : std::runtime_error(what), t_(t), seed_(seed) {}
    double time() const { return t_; }
    std::uint64_t seed() const { return seed_; }

private:
    double t_;
    std::uint64_t seed_;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec4> psi;  // normalized psi^(0) (linear: unnormalized)
    ode::Stats stats{};
};

/// Integrate with an explicit Hamiltonian and coupling operator.
Trajectory integrate_hierarchy(const HopsConfig& cfg, const Mat4& H, const Mat4& L, const Vec4& psi0,
                               const noise::NoiseRealization& z);

/// Two-qubit model: H = H_sys (+ H_c when sys asks for it), L = coupling operator.
Trajectory integrate_trajectory(const HopsConfig& cfg, const quantum::SystemSpec& sys, const Vec4& psi0,
                                const noise::NoiseRealization& z);

struct LadderRecord {
    int k_low{-1};                         // -1 when no rerun was made
    std::vector<double> concurrence_k_low;
    double sup_diff_k{0.0};                // sup_t |c(k_max) - c(k_max - 1)|
    int n_half{0};
    std::vector<double> concurrence_half_n;
    double sup_diff_half_n{0.0};           // sup_t |c(N) - c(N/2)|
};

struct EnsembleResult {
    std::vector<double> t;
    std::vector<Mat4> rho;
    std::vector<Mat4> rho_stderr;            // entrywise (SE of Re) + i (SE of Im), over blocks
    std::vector<double> concurrence;         // signed, of the averaged state
    std::vector<double> concurrence_stderr;  // block jackknife
    std::vector<bool> positivity_fixed;
    LadderRecord ladder;
    int n_samples{0};
    int block_size{32};
    int workers{1};
    double wall_time{0.0};
    long rhs_calls{0};
};

/// Projector average over n_samples trajectories seeded by derive_seed(seed, index).
EnsembleResult run_ensemble(const HopsConfig& cfg, const quantum::SystemSpec& sys, const Vec4& psi0);

/// Same with explicit H and L.
EnsembleResult run_ensemble(const HopsConfig& cfg, const Mat4& H, const Mat4& L, const Vec4& psi0);

/// Worker count from TSB_WORKERS, falling back to hardware concurrency.
int default_workers();

/// Block jackknife standard error of f(mean) from per-block sums and counts; NaN below two blocks.
template <class T, class F>
double jackknife(const std::vector<T>& block_sums, const std::vector<int>& counts, const F& f) {
    const std::size_t b = block_sums.size();
    if (b < 2) return std::numeric_limits<double>::quiet_NaN();
    T total = block_sums[0];
    long n = counts[0];
    for (std::size_t i = 1; i < b; ++i) total += block_sums[i], n += counts[i];
    std::vector<double> loo(b);
    double mean = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        loo[i] = f(T((total - block_sums[i]) / double(n - counts[i])));
        mean += loo[i];
    }
    mean /= double(b);
    double acc = 0.0;
    for (double v : loo) acc += (v - mean) * (v - mean);
    return std::sqrt((b - 1.0) / b * acc);
}

}  // namespace tsb::hops
