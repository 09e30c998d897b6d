#include "tsb/hops.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

namespace tsb::hops {

void HopsConfig::validate() const {
    p.validate();
    if (k_max < 0) throw std::invalid_argument("HopsConfig: k_max must be >= 0");
    if (k_max < 1 && p.alpha > 0.0 && !bcf.terms.empty())
        throw std::invalid_argument("HopsConfig: k_max must be >= 1 for nonzero coupling");
    if (n_samples < 1) throw std::invalid_argument("HopsConfig: n_samples must be >= 1");
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("HopsConfig: need dt > 0 and t_end >= 0");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("HopsConfig: tolerances must be > 0");
    for (const auto& term : bcf.terms)
        if (!(term.w.real() > 0.0)) throw std::invalid_argument("HopsConfig: every bcf term must decay (Re W > 0)");
    if (antithetic && n_samples % 2 != 0) throw std::invalid_argument("HopsConfig: antithetic needs even n_samples");
}

std::vector<double> HopsConfig::time_grid() const {
    const long n = std::lround(t_end / dt);
    std::vector<double> g;
    for (long i = 0; i <= n; ++i) g.push_back(std::min(t_end, i * dt));
    if (g.back() < t_end - 1e-12 * std::max(1.0, t_end)) g.push_back(t_end);
    return g;
}

std::size_t hierarchy_size(int n_terms, int k_max) {
    // C(k_max + J, J)
    double c = 1.0;
    for (int i = 1; i <= n_terms; ++i) c = c * (k_max + i) / i;
    return static_cast<std::size_t>(std::llround(c));
}

HierarchyIndex::HierarchyIndex(int n_terms, int k_max) : n_terms_(n_terms) {
    std::map<std::vector<int>, int> pos;
    std::vector<int> k(n_terms, 0);
    // enumerate by total order so that k - e_j always precedes k
    for (int level = 0; level <= k_max; ++level) {
        std::vector<std::vector<int>> this_level;
        std::function<void(int, int)> rec = [&](int j, int left) {
            if (j == n_terms - 1 || n_terms == 0) {
                if (n_terms > 0) k[j] = left;
                if (n_terms > 0 || left == 0) this_level.push_back(k);
                return;
            }
            for (int v = left; v >= 0; --v) {
                k[j] = v;
                rec(j + 1, left - v);
            }
        };
        rec(0, level);
        for (auto& m : this_level) {
            pos.emplace(m, static_cast<int>(index_.size()));
            index_.push_back(m);
        }
        if (n_terms == 0) break;
    }
    lower_.assign(index_.size() * n_terms, -1);
    upper_.assign(index_.size() * n_terms, -1);
    for (std::size_t a = 0; a < index_.size(); ++a)
        for (int j = 0; j < n_terms; ++j) {
            auto m = index_[a];
            if (m[j] > 0) {
                --m[j];
                lower_[a * n_terms + j] = pos.at(m);
                ++m[j];
            }
            ++m[j];
            auto it = pos.find(m);
            if (it != pos.end()) upper_[a * n_terms + j] = it->second;
        }
}

Trajectory integrate_hierarchy(const HopsConfig& cfg, const Mat4& H, const Mat4& L, const Vec4& psi0,
                               const noise::NoiseRealization& z) {
    if (std::abs(psi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("integrate_hierarchy: psi0 must be normalized");
    const int J = static_cast<int>(cfg.bcf.terms.size());
    const int kmax = J == 0 ? 0 : cfg.k_max;
    const HierarchyIndex idx(J, kmax);
    const std::size_t n_aux = idx.size();
    const bool nl = cfg.nonlinear;
    const std::size_t n_state = 4 * n_aux;
    const std::size_t n_total = n_state + (nl ? J : 0);

    std::vector<cplx> G(J), W(J);
    for (int j = 0; j < J; ++j) G[j] = cfg.bcf.terms[j].g, W[j] = cfg.bcf.terms[j].w;
    std::vector<cplx> kw(n_aux, 0.0);
    for (std::size_t a = 0; a < n_aux; ++a)
        for (int j = 0; j < J; ++j) kw[a] += double(idx.multi_index(a)[j]) * W[j];
    const Mat4 A = -I * H;

    auto rhs = [&](double t, const VecX& y, VecX& dy) {
        dy.resize(n_total);
        const Eigen::Map<const Vec4> p0(y.data());
        double expL = 0.0;
        cplx zt = std::conj(z.at(t));
        if (nl) {
            const double nn = p0.squaredNorm();
            expL = nn > 0.0 ? (p0.dot(L * p0)).real() / nn : 0.0;
            for (int j = 0; j < J; ++j) zt += y(n_state + j);
        }
        for (std::size_t a = 0; a < n_aux; ++a) {
            const Eigen::Map<const Vec4> pa(y.data() + 4 * a);
            Vec4 low = Vec4::Zero(), up = Vec4::Zero();
            const auto& m = idx.multi_index(a);
            for (int j = 0; j < J; ++j) {
                const int lo = idx.lower(a, j);
                if (lo >= 0) low += (double(m[j]) * G[j]) * Eigen::Map<const Vec4>(y.data() + 4 * lo);
                const int hi = idx.upper(a, j);
                if (hi >= 0) up += Eigen::Map<const Vec4>(y.data() + 4 * hi);
            }
            Eigen::Map<Vec4> da(dy.data() + 4 * a);
            da.noalias() = A * pa;
            da.noalias() += L * (zt * pa + low - up);
            da += expL * up - kw[a] * pa;
        }
        if (nl)
            for (int j = 0; j < J; ++j) dy(n_state + j) = -std::conj(W[j]) * y(n_state + j) + std::conj(G[j]) * expL;
    };

    VecX y = VecX::Zero(n_total);
    y.head<4>() = psi0;
    const auto grid = cfg.time_grid();
    Trajectory tr;
    tr.t = grid;
    tr.psi.resize(grid.size());
    ode::Options o;
    o.rtol = cfg.rtol;
    o.atol = cfg.atol;
    auto observe = [&](std::size_t i, double, const VecX& v) {
        Vec4 p = v.head<4>();
        if (nl) {
            const double n = p.norm();
            if (!(n > 1e-12)) throw TrajectoryError("hops: norm of psi^(0) collapsed", grid[i], z.seed);
            p /= n;
        }
        tr.psi[i] = p;
    };
    // nonlinear: the whole hierarchy may be rescaled by a common factor
    auto hook = [&](double t, VecX& v) {
        const double n = v.head<4>().norm();
        if (!(n > 1e-12) || !std::isfinite(n)) throw TrajectoryError("hops: norm of psi^(0) collapsed", t, z.seed);
        if (n > 1e3 || n < 1e-3) {
            v.head(n_state) /= n;
            return true;
        }
        return false;
    };
    try {
        tr.stats = nl ? ode::integrate(rhs, y, 0.0, grid, o, observe, hook) : ode::integrate(rhs, y, 0.0, grid, o, observe);
    } catch (const ode::IntegrationError& e) {
        throw TrajectoryError(std::string("hops: ") + e.what(), e.time(), z.seed);
    }
    return tr;
}

Trajectory integrate_trajectory(const HopsConfig& cfg, const quantum::SystemSpec& sys, const Vec4& psi0,
                                const noise::NoiseRealization& z) {
    return integrate_hierarchy(cfg, quantum::build_hamiltonian(sys, cfg.p), quantum::coupling_operator(), psi0, z);
}

int default_workers() {
    if (const char* env = std::getenv("TSB_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

constexpr int kBlock = 32;

struct BlockSums {
    std::vector<std::vector<Mat4>> sums;  // [block][time]
    std::vector<int> counts;
    long rhs_calls{0};
};

BlockSums run_blocks(const HopsConfig& cfg, const Mat4& H, const Mat4& L, const Vec4& psi0, int workers) {
    const auto grid = cfg.time_grid();
    const int n = cfg.n_samples;
    const int n_blocks = (n + kBlock - 1) / kBlock;
    BlockSums out;
    out.sums.assign(n_blocks, std::vector<Mat4>(grid.size(), Mat4::Zero()));
    out.counts.assign(n_blocks, 0);
    const noise::NoiseGenerator gen(cfg.p, grid.back(), cfg.noise);

    std::atomic<int> next{0};
    std::atomic<long> calls{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    auto worker = [&]() {
        while (!failed) {
            const int b = next++;
            if (b >= n_blocks) return;
            auto& acc = out.sums[b];
            const int lo = b * kBlock, hi = std::min(n, lo + kBlock);
            try {
                for (int i = lo; i < hi; ++i) {
                    const std::uint64_t pair = cfg.antithetic ? std::uint64_t(i / 2) : std::uint64_t(i);
                    const bool flip = cfg.antithetic && (i % 2 == 1);
                    const auto z = gen.sample(noise::derive_seed(cfg.seed, pair), flip);
                    const auto tr = integrate_hierarchy(cfg, H, L, psi0, z);
                    for (std::size_t k = 0; k < grid.size(); ++k) acc[k] += tr.psi[k] * tr.psi[k].adjoint();
                    calls += tr.stats.rhs_calls;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
                return;
            }
            out.counts[b] = hi - lo;
        }
    };
    const int nw = std::max(1, std::min(workers, n_blocks));
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    out.rhs_calls = calls;
    return out;
}

std::vector<Mat4> average(const BlockSums& s, std::size_t n_blocks) {
    const std::size_t nt = s.sums.front().size();
    std::vector<Mat4> rho(nt, Mat4::Zero());
    long n = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        for (std::size_t k = 0; k < nt; ++k) rho[k] += s.sums[b][k];
        n += s.counts[b];
    }
    for (auto& r : rho) r /= double(n);
    return rho;
}

double signed_concurrence(const Mat4& rho, bool* fixed = nullptr) { return quantum::concurrence_with_fix(rho, fixed); }

}  // namespace

EnsembleResult run_ensemble(const HopsConfig& cfg, const Mat4& H, const Mat4& L, const Vec4& psi0) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    EnsembleResult res;
    res.t = cfg.time_grid();
    res.n_samples = cfg.n_samples;
    res.block_size = kBlock;
    res.workers = cfg.workers > 0 ? cfg.workers : default_workers();

    const BlockSums s = run_blocks(cfg, H, L, psi0, res.workers);
    res.rhs_calls = s.rhs_calls;
    const std::size_t nb = s.sums.size();
    res.rho = average(s, nb);
    const std::size_t nt = res.t.size();
    res.concurrence.resize(nt);
    res.concurrence_stderr.resize(nt);
    res.rho_stderr.resize(nt);
    res.positivity_fixed.resize(nt);
    std::vector<Mat4> per_block(nb);
    for (std::size_t k = 0; k < nt; ++k) {
        bool fixed = false;
        res.concurrence[k] = signed_concurrence(res.rho[k], &fixed);
        res.positivity_fixed[k] = fixed;
        for (std::size_t b = 0; b < nb; ++b) per_block[b] = s.sums[b][k];
        res.concurrence_stderr[k] = jackknife(per_block, s.counts, [](const Mat4& r) { return signed_concurrence(r); });
        for (int e = 0; e < 16; ++e) {
            const double re = jackknife(per_block, s.counts, [e](const Mat4& r) { return r(e % 4, e / 4).real(); });
            const double im = jackknife(per_block, s.counts, [e](const Mat4& r) { return r(e % 4, e / 4).imag(); });
            res.rho_stderr[k](e % 4, e / 4) = cplx(re, im);
        }
    }

    // ladder: first half of the blocks, and a rerun one level lower
    const std::size_t half = nb / 2;
    if (half >= 1) {
        const auto rho_half = average(s, half);
        long nh = 0;
        for (std::size_t b = 0; b < half; ++b) nh += s.counts[b];
        res.ladder.n_half = static_cast<int>(nh);
        for (std::size_t k = 0; k < nt; ++k) {
            res.ladder.concurrence_half_n.push_back(signed_concurrence(rho_half[k]));
            res.ladder.sup_diff_half_n =
                std::max(res.ladder.sup_diff_half_n, std::abs(res.ladder.concurrence_half_n[k] - res.concurrence[k]));
        }
    }
    if (cfg.ladder && cfg.k_max >= 2 && !cfg.bcf.terms.empty()) {
        HopsConfig low = cfg;
        low.k_max = cfg.k_max - 1;
        const BlockSums sl = run_blocks(low, H, L, psi0, res.workers);
        res.rhs_calls += sl.rhs_calls;
        const auto rho_low = average(sl, sl.sums.size());
        res.ladder.k_low = low.k_max;
        for (std::size_t k = 0; k < nt; ++k) {
            res.ladder.concurrence_k_low.push_back(signed_concurrence(rho_low[k]));
            res.ladder.sup_diff_k =
                std::max(res.ladder.sup_diff_k, std::abs(res.ladder.concurrence_k_low[k] - res.concurrence[k]));
        }
    }
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

EnsembleResult run_ensemble(const HopsConfig& cfg, const quantum::SystemSpec& sys, const Vec4& psi0) {
    sys.validate();
    return run_ensemble(cfg, quantum::build_hamiltonian(sys, cfg.p), quantum::coupling_operator(), psi0);
}

}  // namespace tsb::hops
