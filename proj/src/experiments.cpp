#include "tsb/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "tsb/bcf_fit.hpp"

namespace tsb::experiments {

namespace {

using ojson = nlohmann::ordered_json;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string method_name(masters::Kind k) {
    switch (k) {
        case masters::Kind::QOME: return "qome";
        case masters::Kind::PRWA: return "prwa";
        case masters::Kind::RFE_asym: return "rfe";
        case masters::Kind::RFE_t: return "rfe-t";
        case masters::Kind::GAME: return "game";
        case masters::Kind::CGME: return "cgme";
    }
    throw std::invalid_argument("unknown master equation kind");
}

bool is_full(const masters::Parts& p) { return p.hamiltonian && p.lamb_shift && p.dissipator; }

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
    }
    if (pos != v.size()) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
    return x;
}

long to_long(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (x != std::floor(x)) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
    return static_cast<long>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto l = lower(v);
    if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
    if (l == "0" || l == "false" || l == "no" || l == "off") return false;
    throw std::invalid_argument("config: " + key + " expects a boolean, got '" + v + "'");
}

// fits are reused across methods and scenarios with identical parameters
bcf::ExponentialBcf cached_fit(const spectral::SpectralParams& p, int n_terms) {
    static std::mutex m;
    static std::map<std::tuple<double, double, double, double, int>, bcf::ExponentialBcf> cache;
    const auto key = std::make_tuple(p.alpha, p.s, p.omega_c, p.omega_ref, n_terms);
    {
        std::lock_guard<std::mutex> lock(m);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto fit = bcf::fit_bcf(p, n_terms);
    std::lock_guard<std::mutex> lock(m);
    cache.emplace(key, fit);
    return fit;
}

double trapezoid_mean(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() < 2) return y.empty() ? 0.0 : y.front();
    double acc = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) acc += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
    return acc / (t.back() - t.front());
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

template <class F>
void fan_out(std::size_t n, int workers, const F& job) {
    const int nw = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (nw == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first;
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w)
        pool.emplace_back([&]() {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first) first = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first) std::rethrow_exception(first);
}

Method exact_method(const std::string& text, bool counterterm) {
    Method m = Method::parse(text);
    m.parts = m.parts.with_counterterm(counterterm);
    return m;
}

}  // namespace

// --- Method ---

Method Method::parse(const std::string& text) {
    const std::string t = trim(text);
    const auto colon = t.find(':');
    const std::string name = lower(trim(t.substr(0, colon)));
    Method m;
    if (colon != std::string::npos) {
        std::string parts = t.substr(colon + 1);
        std::replace(parts.begin(), parts.end(), '+', ',');
        m.parts = masters::Parts::parse(parts);
        if (!(m.parts.hamiltonian || m.parts.lamb_shift || m.parts.dissipator)) {
            // a bare "counterterm" modifies the full dynamics
            m.parts = masters::Parts::full().with_counterterm(true);
        }
    }
    if (name == "hops") {
        m.hops = true;
        if (!is_full(m.parts))
            throw std::invalid_argument("method hops: only full dynamics, optionally with counterterm");
    } else if (name.empty()) {
        throw std::invalid_argument("method: empty name");
    } else {
        m.kind = masters::parse_kind(name);
    }
    return m;
}

std::string Method::str() const {
    std::string out = hops ? "hops" : method_name(kind);
    std::string p;
    if (is_full(parts)) {
        p = parts.counterterm ? "full" : "";
    } else if (parts.hamiltonian && !parts.lamb_shift && parts.dissipator) {
        p = "dissipator-only";
    } else if (parts.hamiltonian && parts.lamb_shift && !parts.dissipator) {
        p = "unitary-only";
    } else {
        masters::Parts base = parts.with_counterterm(false);
        p = base.str();
        std::replace(p.begin(), p.end(), ',', '+');
    }
    if (parts.counterterm) p += p.empty() ? "counterterm" : "+counterterm";
    return p.empty() ? out : out + ":" + p;
}

std::string Method::label() const {
    std::string l = str();
    std::replace(l.begin(), l.end(), ':', '_');
    std::replace(l.begin(), l.end(), '+', '_');
    return l;
}

std::vector<Method> parse_methods(const std::string& comma_list) {
    std::vector<Method> out;
    std::istringstream in(comma_list);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (trim(tok).empty()) continue;
        out.push_back(Method::parse(tok));
    }
    if (out.empty()) throw std::invalid_argument("method list is empty");
    return out;
}

// --- ScenarioConfig ---

spectral::SpectralParams ScenarioConfig::params() const {
    if (alpha.has_value() == alpha_tilde.has_value())
        throw std::invalid_argument("scenario: give exactly one of alpha and alpha_tilde");
    spectral::SpectralParams p;
    if (alpha) {
        p = spectral::SpectralParams{*alpha, s, omega_c, sys.omega_A};
    } else {
        if (!(*alpha_tilde >= 0.0)) throw std::invalid_argument("scenario: alpha_tilde must be >= 0");
        p = spectral::SpectralParams::from_rescaled(*alpha_tilde, s, omega_c, sys.omega_A);
    }
    p.validate();
    return p;
}

double ScenarioConfig::rescaled_coupling() const { return spectral::rescaled_coupling(params()); }

int ScenarioConfig::effective_k_max() const {
    if (k_max > 0) return k_max;
    return rescaled_coupling() <= 2.0e-2 * (1.0 + 1e-9) ? 2 : 4;
}

double ScenarioConfig::horizon() const {
    if (t_end > 0.0) return t_end;
    const double at = rescaled_coupling();
    if (!(at > 0.0)) throw std::invalid_argument("scenario: zero coupling needs an explicit t_end");
    return rescaled_t_end / (at * sys.omega_A);
}

std::vector<double> ScenarioConfig::time_grid() const {
    // same construction as the HOPS output grid
    hops::HopsConfig h;
    h.t_end = horizon();
    h.dt = h.t_end / (n_times - 1);
    return h.time_grid();
}

Vec4 ScenarioConfig::initial_state() const {
    const auto n = lower(initial);
    if (n == "upup" || n == "uu") return quantum::ket_up_up();
    if (n == "dd" || n == "downdown") return Vec4(0, 0, 0, 1);
    if (n == "bell-minus") return quantum::bell_minus();
    if (n == "bell-plus") return quantum::bell_plus();
    throw std::invalid_argument("scenario: unknown initial state '" + initial + "'");
}

void ScenarioConfig::validate() const {
    sys.validate();
    params();
    if (methods.empty()) throw std::invalid_argument("scenario: no methods requested");
    if (n_times < 2) throw std::invalid_argument("scenario: n_times must be >= 2");
    if (!(t_end >= 0.0) || !(rescaled_t_end > 0.0)) throw std::invalid_argument("scenario: horizons must be positive");
    const double h = horizon();
    if (!std::isfinite(h) || !(h > 0.0)) throw std::invalid_argument("scenario: horizon must be finite and > 0");
    if (n_samples < 1 || n_terms < 1 || k_max < 0) throw std::invalid_argument("scenario: invalid HOPS settings");
    if (antithetic && n_samples % 2) throw std::invalid_argument("scenario: antithetic needs even n_samples");
    if (!(cg_tau >= 0.0)) throw std::invalid_argument("scenario: cg_tau must be >= 0");
    if (id.empty() || id.find('/') != std::string::npos) throw std::invalid_argument("scenario: invalid id");
    initial_state();
}

std::string ScenarioConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["id"] = id;
    kv["omega_A"] = fmt(sys.omega_A);
    kv["omega_B"] = fmt(sys.omega_B);
    if (alpha) kv["alpha"] = fmt(*alpha);
    if (alpha_tilde) kv["alpha_tilde"] = fmt(*alpha_tilde);
    kv["s"] = fmt(s);
    kv["omega_c"] = fmt(omega_c);
    std::string ms;
    for (const auto& m : methods) ms += (ms.empty() ? "" : ",") + m.str();
    kv["methods"] = ms;
    kv["initial"] = lower(initial);
    kv["rescaled_t_end"] = fmt(rescaled_t_end);
    kv["t_end"] = fmt(t_end);
    kv["n_times"] = std::to_string(n_times);
    kv["seed"] = std::to_string(seed);
    kv["k_max"] = std::to_string(k_max);
    kv["n_samples"] = std::to_string(n_samples);
    kv["n_terms"] = std::to_string(n_terms);
    kv["antithetic"] = antithetic ? "true" : "false";
    kv["ladder"] = ladder ? "true" : "false";
    kv["rtol"] = fmt(hops_rtol);
    kv["atol"] = fmt(hops_atol);
    kv["cg_tau"] = fmt(cg_tau);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string ScenarioConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ScenarioConfig::apply(const std::map<std::string, std::string>& kv) {
    if (kv.count("alpha") && kv.count("alpha_tilde"))
        throw std::invalid_argument("config: give exactly one of alpha and alpha_tilde");
    for (const auto& [key, v] : kv) {
        if (key == "id") id = v;
        else if (key == "omega_A") sys.omega_A = to_double(key, v);
        else if (key == "omega_B") sys.omega_B = to_double(key, v);
        else if (key == "alpha") alpha = to_double(key, v), alpha_tilde.reset();
        else if (key == "alpha_tilde") alpha_tilde = to_double(key, v), alpha.reset();
        else if (key == "s") s = to_double(key, v);
        else if (key == "omega_c") omega_c = to_double(key, v);
        else if (key == "methods") methods = parse_methods(v);
        else if (key == "initial") initial = v;
        else if (key == "rescaled_t_end") rescaled_t_end = to_double(key, v);
        else if (key == "t_end") t_end = to_double(key, v);
        else if (key == "n_times") n_times = static_cast<int>(to_long(key, v));
        else if (key == "output_dir") output_dir = v;
        else if (key == "seed") seed = static_cast<std::uint64_t>(to_long(key, v));
        else if (key == "k_max") k_max = static_cast<int>(to_long(key, v));
        else if (key == "n_samples") n_samples = static_cast<int>(to_long(key, v));
        else if (key == "n_terms") n_terms = static_cast<int>(to_long(key, v));
        else if (key == "antithetic") antithetic = to_bool(key, v);
        else if (key == "ladder") ladder = to_bool(key, v);
        else if (key == "workers") workers = static_cast<int>(to_long(key, v));
        else if (key == "rtol") hops_rtol = to_double(key, v);
        else if (key == "atol") hops_atol = to_double(key, v);
        else if (key == "cg_tau") cg_tau = to_double(key, v);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(no) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw std::invalid_argument("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
    }
    return kv;
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_key_values(ss.str());
}

// --- running ---

MethodResult run_method(const ScenarioConfig& cfg, const Method& m) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = cfg.params();
    const auto grid = cfg.time_grid();
    const double at = spectral::rescaled_coupling(p);
    MethodResult r;
    r.method = m;
    r.t = grid;
    const Vec4 psi0 = cfg.initial_state();
    quantum::SystemSpec sys = cfg.sys;
    sys.include_counterterm = m.parts.counterterm;

    if (m.hops) {
        hops::HopsConfig h;
        h.p = p;
        if (p.alpha > 0.0) {
            h.bcf = cached_fit(p, cfg.n_terms);
            r.fit = h.bcf;
            r.fit_error = h.bcf.normalized_error();
        }
        h.k_max = cfg.effective_k_max();
        h.n_samples = cfg.n_samples;
        h.t_end = cfg.horizon();
        h.dt = h.t_end / (cfg.n_times - 1);
        h.seed = cfg.seed;
        h.rtol = cfg.hops_rtol;
        h.atol = cfg.hops_atol;
        h.antithetic = cfg.antithetic;
        h.ladder = cfg.ladder;
        h.workers = cfg.workers;
        auto e = hops::run_ensemble(h, sys, psi0);
        if (e.t.size() != grid.size()) throw std::logic_error("run_method: HOPS grid mismatch");
        r.rho = std::move(e.rho);
        r.concurrence = std::move(e.concurrence);
        r.concurrence_stderr = std::move(e.concurrence_stderr);
        r.positivity_fixed = static_cast<int>(std::count(e.positivity_fixed.begin(), e.positivity_fixed.end(), true));
        r.ladder = e.ladder;
        const int n_seeds = std::min(cfg.n_samples, 8);
        for (int i = 0; i < n_seeds; ++i)
            r.seeds.push_back(noise::derive_seed(cfg.seed, cfg.antithetic ? std::uint64_t(i / 2) : std::uint64_t(i)));
    } else {
        masters::MasterEquationSpec spec;
        spec.kind = m.kind;
        spec.parts = m.parts;
        spec.sys = cfg.sys;
        spec.p = p;
        spec.cg_tau = cfg.cg_tau;
        if (m.kind == masters::Kind::CGME && p.alpha > 0.0) r.timescales = masters::timescale_report(spec);
        r.rho = masters::propagate(spec, quantum::projector(psi0), grid);
        for (const auto& rho : r.rho) {
            bool fixed = false;
            r.concurrence.push_back(quantum::concurrence_with_fix(rho, &fixed));
            r.positivity_fixed += fixed;
        }
        r.concurrence_stderr.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    }
    for (double t : grid) r.rescaled_t.push_back(at * cfg.sys.omega_A * t);
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

PairMetric compare(const MethodResult& a, const MethodResult& b) {
    if (a.t.size() != b.t.size()) throw std::invalid_argument("compare: results live on different grids");
    PairMetric m;
    m.a = a.method.label();
    m.b = b.method.label();
    std::vector<double> dc(a.t.size()), hs(a.t.size());
    for (std::size_t k = 0; k < a.t.size(); ++k) {
        dc[k] = std::abs(a.concurrence[k] - b.concurrence[k]);
        hs[k] = quantum::hilbert_schmidt_distance(a.rho[k], b.rho[k]);
    }
    m.sup_concurrence = *std::max_element(dc.begin(), dc.end());
    m.max_hs = *std::max_element(hs.begin(), hs.end());
    m.mean_concurrence = trapezoid_mean(a.t, dc);
    m.mean_hs = trapezoid_mean(a.t, hs);
    return m;
}

const MethodResult& RunRecord::result(const std::string& label) const {
    for (const auto& r : results)
        if (r.method.label() == label) return r;
    throw std::out_of_range("RunRecord: no result for " + label);
}

const PairMetric& RunRecord::metric(const std::string& a, const std::string& b) const {
    for (const auto& m : metrics)
        if ((m.a == a && m.b == b) || (m.a == b && m.b == a)) return m;
    throw std::out_of_range("RunRecord: no metric for " + a + " / " + b);
}

RunRecord run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    RunRecord rec;
    rec.config = cfg;
    for (const auto& m : cfg.methods) {
        try {
            rec.results.push_back(run_method(cfg, m));
        } catch (const std::exception& e) {
            rec.complete = false;
            rec.error = m.str() + ": " + e.what();
            if (!cfg.output_dir.empty()) write_record(rec, cfg.output_dir);
            throw ScenarioError("scenario " + cfg.id + " failed in " + rec.error, rec);
        }
    }
    // reference first, so its pairs lead the metric list
    std::vector<std::size_t> order(rec.results.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < rec.results.size(); ++i)
        if (rec.results[i].method.hops) {
            rec.reference = rec.results[i].method.label();
            std::rotate(order.begin(), std::find(order.begin(), order.end(), i), std::find(order.begin(), order.end(), i) + 1);
            break;
        }
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size(); ++j)
            rec.metrics.push_back(compare(rec.results[order[i]], rec.results[order[j]]));
    if (!cfg.output_dir.empty()) write_record(rec, cfg.output_dir);
    return rec;
}

// --- io ---

std::string csv_header() {
    std::string h = "time,rescaled_time,concurrence,concurrence_stderr";
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const std::string ij = std::to_string(i) + std::to_string(j);
            h += ",re_rho_" + ij + ",im_rho_" + ij;
        }
    return h;
}

std::string to_csv(const MethodResult& r) {
    std::string out = csv_header() + "\n";
    for (std::size_t k = 0; k < r.t.size(); ++k) {
        out += fmt(r.t[k]) + "," + fmt(r.rescaled_t[k]) + "," + fmt(r.concurrence[k]) + "," + fmt(r.concurrence_stderr[k]);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out += "," + fmt(r.rho[k](i, j).real()) + "," + fmt(r.rho[k](i, j).imag());
        out += "\n";
    }
    return out;
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line) || line != csv_header()) throw std::runtime_error(path + ": unexpected CSV header");
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream in(line);
        std::string cell;
        while (std::getline(in, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != 36) throw std::runtime_error(path + ": row with " + std::to_string(row.size()) + " columns");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string metadata_json(const ScenarioConfig& cfg, const MethodResult& r) {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["code_version"] = kCodeVersion;
    j["scenario"] = cfg.id;
    j["config_hash"] = cfg.hash();
    ojson c;
    std::istringstream in(cfg.canonical());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        c[line.substr(0, eq)] = line.substr(eq + 1);
    }
    j["config"] = c;
    j["method"] = r.method.str();
    j["label"] = r.method.label();
    j["csv"] = r.method.label() + ".csv";
    j["parts"] = r.method.parts.str();
    const auto p = cfg.params();
    j["environment"] = {{"alpha", p.alpha}, {"alpha_tilde", spectral::rescaled_coupling(p)}, {"s", p.s},
                        {"omega_c", p.omega_c}, {"omega_ref", p.omega_ref}};
    if (r.method.hops) {
        ojson h;
        h["k_max"] = cfg.effective_k_max();
        h["n_samples"] = cfg.n_samples;
        h["block_size"] = 32;
        h["antithetic"] = cfg.antithetic;
        h["master_seed"] = cfg.seed;
        h["seed_rule"] = "splitmix64(master_seed, index); antithetic pairs share index / 2";
        h["first_seeds"] = r.seeds;
        h["noise_method"] = "fft-spectral";
        h["rtol"] = cfg.hops_rtol;
        h["atol"] = cfg.hops_atol;
        if (r.fit) {
            auto terms = ojson::array();
            for (const auto& t : r.fit->terms) terms.push_back({t.g.real(), t.g.imag(), t.w.real(), t.w.imag()});
            h["bcf_terms"] = terms;
            h["bcf_normalized_error"] = r.fit_error;
        }
        if (r.ladder) {
            h["ladder"] = {{"k_low", r.ladder->k_low},
                           {"sup_diff_k", r.ladder->sup_diff_k},
                           {"n_half", r.ladder->n_half},
                           {"sup_diff_half_n", r.ladder->sup_diff_half_n}};
        }
        j["hops"] = h;
    } else {
        ojson m;
        m["kind"] = masters::kind_name(r.method.kind);
        if (r.timescales) {
            m["tau_env1"] = r.timescales->tau_env1;
            m["tau_ind"] = r.timescales->tau_ind;
            m["cg_tau"] = r.timescales->cg_tau;
            m["separation_ok"] = r.timescales->separation_ok;
        }
        j["master"] = m;
    }
    j["positivity_fixed_points"] = r.positivity_fixed;
    j["wall_time_s"] = r.wall_time;
    return j.dump(2) + "\n";
}

std::string summary_json(const RunRecord& rec) {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["code_version"] = kCodeVersion;
    j["scenario"] = rec.config.id;
    j["config_hash"] = rec.config.hash();
    j["status"] = rec.complete ? "complete" : "failed";
    if (!rec.complete) j["error"] = rec.error;
    j["reference"] = rec.reference;
    auto methods = ojson::array();
    for (const auto& r : rec.results) methods.push_back(r.method.label());
    j["methods"] = methods;
    auto metrics = ojson::array();
    for (const auto& m : rec.metrics)
        metrics.push_back({{"a", m.a},
                           {"b", m.b},
                           {"sup_concurrence", m.sup_concurrence},
                           {"mean_concurrence", m.mean_concurrence},
                           {"max_hilbert_schmidt", m.max_hs},
                           {"mean_hilbert_schmidt", m.mean_hs}});
    j["metrics"] = metrics;
    return j.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path);
}

void write_record(const RunRecord& rec, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(dir) / rec.config.id;
    fs::create_directories(base);
    for (const auto& r : rec.results) {
        write_text((base / (r.method.label() + ".csv")).string(), to_csv(r));
        write_text((base / (r.method.label() + ".json")).string(), metadata_json(rec.config, r));
    }
    write_text((base / "summary.json").string(), summary_json(rec));
}

// --- analysis ---

Peak peak(const std::vector<double>& t, const std::vector<double>& c) {
    if (t.empty() || t.size() != c.size()) throw std::invalid_argument("peak: empty or mismatched series");
    const auto it = std::max_element(c.begin(), c.end());
    return {t[it - c.begin()], *it};
}

Asymptote asymptotic_concurrence(const std::vector<double>& rescaled_t, const std::vector<double>& c,
                                 double window_fraction, double abs_floor, bool strict) {
    if (rescaled_t.size() != c.size() || rescaled_t.size() < 8)
        throw std::invalid_argument("asymptotic_concurrence: need at least 8 matching points");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw std::invalid_argument("asymptotic_concurrence: window fraction must be in (0, 1]");
    const double t_lo = rescaled_t.back() - window_fraction * (rescaled_t.back() - rescaled_t.front());
    std::size_t i0 = 0;
    while (rescaled_t[i0] < t_lo) ++i0;
    const std::size_t n = rescaled_t.size() - i0;
    if (n < 4) throw std::invalid_argument("asymptotic_concurrence: trailing window holds fewer than 4 points");
    Asymptote a;
    a.window_start = rescaled_t[i0];
    double mt = 0.0, mc = 0.0;
    for (std::size_t i = i0; i < rescaled_t.size(); ++i) mt += rescaled_t[i], mc += c[i];
    mt /= n;
    mc /= n;
    double stt = 0.0, stc = 0.0, scc = 0.0;
    for (std::size_t i = i0; i < rescaled_t.size(); ++i) {
        stt += (rescaled_t[i] - mt) * (rescaled_t[i] - mt);
        stc += (rescaled_t[i] - mt) * (c[i] - mc);
        scc += (c[i] - mc) * (c[i] - mc);
    }
    a.c_inf = mc;
    a.drift_slope = stc / stt;
    a.window_std = std::sqrt(scc / n);
    // OLS standard error of the slope from the residual scatter
    a.drift_stderr = std::sqrt(std::max(0.0, scc - a.drift_slope * stc) / double(n - 2) / stt);
    const double span = rescaled_t.back() - rescaled_t[i0];
    a.stationary = std::abs(a.drift_slope) <= 0.1 * a.window_std || std::abs(a.drift_slope) * span <= abs_floor ||
                   std::abs(a.drift_slope) <= 2.0 * a.drift_stderr;
    if (strict && !a.stationary)
        throw NonStationaryTail("asymptotic_concurrence: trailing window still drifts (slope " +
                                short_fmt(a.drift_slope) + " +- " + short_fmt(a.drift_stderr) + " vs std " +
                                short_fmt(a.window_std) +
                                "); increase t_end");
    return a;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::domain_error("loglog_slope: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxx += (lx[i] - mx) * (lx[i] - mx), sxy += (lx[i] - mx) * (ly[i] - my);
    return sxy / sxx;
}

AsymptoticSweep asymptotic_sweep(const ScenarioConfig& base, const std::vector<double>& alpha_tildes) {
    if (alpha_tildes.size() < 2) throw std::invalid_argument("asymptotic_sweep: need two or more couplings");
    AsymptoticSweep sw;
    sw.points.resize(alpha_tildes.size());
    std::vector<RunRecord> recs(alpha_tildes.size());
    fan_out(alpha_tildes.size(), 1, [&](std::size_t i) {
        ScenarioConfig c = base;
        c.alpha.reset();
        c.alpha_tilde = alpha_tildes[i];
        c.id = base.id + "_at" + short_fmt(alpha_tildes[i]);
        recs[i] = run_scenario(c);
    });
    for (std::size_t i = 0; i < alpha_tildes.size(); ++i) {
        sw.points[i].alpha_tilde = alpha_tildes[i];
        for (const auto& r : recs[i].results)
            sw.points[i].by_method[r.method.label()] = asymptotic_concurrence(r.rescaled_t, r.concurrence);
    }
    for (const auto& [label, first] : sw.points.front().by_method) {
        std::vector<double> y;
        for (const auto& pt : sw.points) y.push_back(pt.by_method.at(label).c_inf);
        if (std::all_of(y.begin(), y.end(), [](double v) { return v > 0.0; }))
            sw.slope[label] = loglog_slope(alpha_tildes, y);
    }
    return sw;
}

masters::Kind study_kind(const quantum::SystemSpec& sys) {
    return sys.resonant() ? masters::Kind::QOME : masters::Kind::PRWA;
}

std::vector<CountertermRow> counterterm_study(const CountertermStudyConfig& cfg) {
    std::vector<CountertermRow> rows;
    const masters::Kind kind = study_kind(cfg.base.sys);
    const Method ex = cfg.exact == "hops" ? Method{true} : exact_method(cfg.exact, false);
    Method ex_ct = ex;
    ex_ct.parts = ex.parts.with_counterterm(true);
    const Method diss{false, kind, masters::Parts::dissipator_only()};
    const Method uni{false, kind, masters::Parts::unitary_only()};
    const Method uni_ct{false, kind, masters::Parts::unitary_only().with_counterterm(true)};
    for (double s : cfg.s_values)
        for (double at : cfg.alpha_tildes) {
            ScenarioConfig c = cfg.base;
            c.s = s;
            c.alpha.reset();
            c.alpha_tilde = at;
            c.id = cfg.base.id + "_s" + short_fmt(s) + "_at" + short_fmt(at);
            c.methods = {ex_ct, diss, uni, uni_ct};
            if (cfg.without_counterterm) c.methods.insert(c.methods.begin(), ex);
            CountertermRow row;
            row.s = s;
            row.alpha_tilde = at;
            row.record = run_scenario(c);
            const auto& r = row.record;
            row.D = sup_diff(r.result(ex_ct.label()).concurrence, r.result(diss.label()).concurrence);
            row.D_without_ct = cfg.without_counterterm
                                   ? sup_diff(r.result(ex.label()).concurrence, r.result(diss.label()).concurrence)
                                   : std::nan("");
            const auto& u = r.result(uni.label());
            const auto& uc = r.result(uni_ct.label());
            row.peak_unitary_ls = peak(u.rescaled_t, u.concurrence).c;
            const auto pk = peak(uc.rescaled_t, uc.concurrence);
            row.peak_unitary_ls_ct = pk.c;
            row.peak_time_unitary_ls_ct = pk.t;
            rows.push_back(std::move(row));
        }
    if (!cfg.base.output_dir.empty()) {
        std::string csv = "s,alpha_tilde,D,D_without_counterterm,peak_unitary_ls,peak_unitary_ls_ct,peak_time_unitary_ls_ct\n";
        for (const auto& r : rows)
            csv += fmt(r.s) + "," + fmt(r.alpha_tilde) + "," + fmt(r.D) + "," + fmt(r.D_without_ct) + "," +
                   fmt(r.peak_unitary_ls) + "," + fmt(r.peak_unitary_ls_ct) + "," + fmt(r.peak_time_unitary_ls_ct) + "\n";
        std::filesystem::create_directories(cfg.base.output_dir);
        write_text((std::filesystem::path(cfg.base.output_dir) / (cfg.base.id + "_counterterm.csv")).string(), csv);
    }
    return rows;
}

double adiabatic_alpha_tilde(double s, double omega_c, double s0, double omega_A) {
    // |S(0)| / w_A = alpha~ Gamma(s) (wc / w_A)^s / 2
    return 2.0 * s0 / (std::tgamma(s) * std::pow(omega_c / omega_A, s));
}

std::vector<AdiabaticRow> adiabatic_scan(const AdiabaticScanConfig& cfg) {
    std::vector<AdiabaticRow> rows;
    for (double wc : cfg.omega_cs)
        for (double wb : cfg.omega_Bs) {
            AdiabaticRow row;
            row.omega_c = wc;
            row.omega_B = wb;
            ScenarioConfig c = cfg.base;
            c.sys.omega_B = wb;
            c.s = cfg.s;
            c.omega_c = wc;
            c.alpha.reset();
            c.alpha_tilde = row.alpha_tilde = adiabatic_alpha_tilde(cfg.s, wc, cfg.s0, c.sys.omega_A);
            row.cancellation = masters::counterterm_cancellation_metrics(c.sys, c.params());
            if (cfg.dynamics) {
                const masters::Kind kind = study_kind(c.sys);
                const Method ex_ct = cfg.exact == "hops" ? Method{true, masters::Kind::QOME,
                                                                  masters::Parts::full().with_counterterm(true)}
                                                         : exact_method(cfg.exact, true);
                const Method diss{false, kind, masters::Parts::dissipator_only()};
                const Method uni_ct{false, kind, masters::Parts::unitary_only().with_counterterm(true)};
                c.methods = {ex_ct, diss, uni_ct};
                c.id = cfg.base.id + "_wc" + short_fmt(wc) + "_wb" + short_fmt(wb);
                row.exact = ex_ct.str();
                row.record = run_scenario(c);
                const auto& r = row.record;
                row.D = sup_diff(r.result(ex_ct.label()).concurrence, r.result(diss.label()).concurrence);
                const auto& u = r.result(uni_ct.label());
                row.peak_unitary = peak(u.rescaled_t, u.concurrence).c;
            }
            rows.push_back(std::move(row));
        }
    if (!cfg.base.output_dir.empty()) {
        std::string csv = "omega_c,omega_B,alpha_tilde,exact,D,peak_unitary,delta_S,gamma,ratio\n";
        for (const auto& r : rows)
            csv += fmt(r.omega_c) + "," + fmt(r.omega_B) + "," + fmt(r.alpha_tilde) + "," + r.exact + "," +
                   fmt(cfg.dynamics ? r.D : std::nan("")) + "," + fmt(cfg.dynamics ? r.peak_unitary : std::nan("")) +
                   "," + fmt(r.cancellation.delta_S) + "," + fmt(r.cancellation.gamma) + "," +
                   fmt(r.cancellation.ratio) + "\n";
        std::filesystem::create_directories(cfg.base.output_dir);
        write_text((std::filesystem::path(cfg.base.output_dir) / (cfg.base.id + "_adiabatic.csv")).string(), csv);
    }
    return rows;
}

ScalingSlopes scaling_slopes(const quantum::SystemSpec& sys, double s, double s0, const std::vector<double>& omega_cs) {
    if (omega_cs.size() < 2) throw std::invalid_argument("scaling_slopes: need two or more cutoffs");
    std::vector<double> ds, g, ratio;
    for (double wc : omega_cs) {
        const auto p = spectral::SpectralParams::from_rescaled(adiabatic_alpha_tilde(s, wc, s0, sys.omega_A), s, wc,
                                                               sys.omega_A);
        const auto m = masters::counterterm_cancellation_metrics(sys, p);
        ds.push_back(std::abs(m.delta_S));
        g.push_back(m.gamma);
        ratio.push_back(m.ratio);
    }
    ScalingSlopes out;
    out.delta_S = loglog_slope(omega_cs, ds);
    out.gamma = loglog_slope(omega_cs, g);
    // top decade: cutoffs within a factor 10 of the largest
    const double top = *std::max_element(omega_cs.begin(), omega_cs.end());
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < omega_cs.size(); ++i)
        if (omega_cs[i] >= top / 10.0 * (1.0 - 1e-12)) {
            lo = std::min(lo, std::abs(ratio[i]));
            hi = std::max(hi, std::abs(ratio[i]));
        }
    out.ratio_variation = hi / lo - 1.0;
    return out;
}

std::vector<SpectralRow> spectral_tables(const std::vector<double>& s_values, double omega_c, int n_x, double alpha) {
    if (n_x < 2) throw std::invalid_argument("spectral_tables: need at least two x points");
    std::vector<SpectralRow> rows;
    for (double s : s_values) {
        const spectral::SpectralParams p{alpha, s, omega_c};
        p.validate();
        for (int i = 0; i < n_x; ++i) {
            const double x = -1.0 + 2.0 * i / (n_x - 1);
            const double w = x * omega_c;
            rows.push_back({s, x, spectral::lamb_function(p, w), spectral::s_expansion(p, x),
                            spectral::lamb_function_numeric(p, w)});
        }
    }
    return rows;
}

std::string spectral_csv(const std::vector<SpectralRow>& rows) {
    std::string out = "s,x,exact,expansion,numeric\n";
    for (const auto& r : rows)
        out += fmt(r.s) + "," + fmt(r.x) + "," + fmt(r.exact) + "," + fmt(r.expansion) + "," + fmt(r.numeric) + "\n";
    return out;
}

}  // namespace tsb::experiments
