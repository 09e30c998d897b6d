// experiments.hpp — scenario runs, cross-method metrics and the parameter studies
//
// Time is reported both physically and rescaled, tau = alpha~ t w_A. Every method of
// a scenario runs on the same grid; HOPS, when present, is the reference.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsb/hops.hpp"
#include "tsb/masters.hpp"
#include "tsb/quantum.hpp"
#include "tsb/spectral.hpp"
#include "tsb/types.hpp"

namespace tsb::experiments {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

/// "hops" or a master kind, optionally with parts: "qome:dissipator-only", "rfe-t:full+counterterm".
struct Method {
    bool hops{false};
    masters::Kind kind{masters::Kind::QOME};
    masters::Parts parts{};

    static Method parse(const std::string& text);
    std::string str() const;    // round-trips through parse
    std::string label() const;  // file-name safe
};

std::vector<Method> parse_methods(const std::string& comma_list);

struct ScenarioConfig {
    std::string id{"scenario"};
    quantum::SystemSpec sys{};
    std::optional<double> alpha;
    std::optional<double> alpha_tilde;
    double s{1.0};
    double omega_c{10.0};
    std::vector<Method> methods{};
    std::string initial{"upup"};   // upup, dd, bell-minus, bell-plus
    double rescaled_t_end{3.0};    // alpha~ t_end w_A
    double t_end{0.0};             // physical horizon; > 0 overrides rescaled_t_end
    int n_times{301};
    std::string output_dir{};      // empty: nothing written
    std::uint64_t seed{1};

    int k_max{0};  // 0: 2 for alpha~ <= 2e-2, otherwise 4
    int n_samples{2000};
    int n_terms{5};
    bool antithetic{false};
    bool ladder{true};
    int workers{0};
    double hops_rtol{1e-8};
    double hops_atol{1e-10};
    double cg_tau{0.0};

    spectral::SpectralParams params() const;
    double rescaled_coupling() const;
    int effective_k_max() const;
    double horizon() const;
    std::vector<double> time_grid() const;
    Vec4 initial_state() const;
    void validate() const;

    /// Sorted key=value lines; identical configs give identical text.
    std::string canonical() const;
    std::string hash() const;  // FNV-1a 64 of canonical(), hex

    /// Apply key=value overrides (config file and CLI share these keys).
    void apply(const std::map<std::string, std::string>& kv);
};

/// Parse "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> read_key_value_file(const std::string& path);

struct MethodResult {
    Method method{};
    std::vector<double> t;
    std::vector<double> rescaled_t;
    std::vector<Mat4> rho;
    std::vector<double> concurrence;         // signed; sqrt(rho rho^+) route where needed
    std::vector<double> concurrence_stderr;  // NaN for master equations
    int positivity_fixed{0};
    double wall_time{0.0};
    std::optional<hops::LadderRecord> ladder;
    std::optional<bcf::ExponentialBcf> fit;
    double fit_error{0.0};
    std::optional<masters::TimescaleReport> timescales;
    std::vector<std::uint64_t> seeds;  // first trajectory seeds (HOPS)
};

struct PairMetric {
    std::string a, b;
    double sup_concurrence{0.0};   // sup_t |c_a - c_b|
    double mean_concurrence{0.0};  // time average of |c_a - c_b|
    double max_hs{0.0};            // max_t ||rho_a - rho_b||_HS
    double mean_hs{0.0};
};

struct RunRecord {
    ScenarioConfig config;
    std::vector<MethodResult> results;
    std::vector<PairMetric> metrics;
    std::string reference;  // label of the reference method, empty when no HOPS run
    bool complete{true};
    std::string error;

    const MethodResult& result(const std::string& label) const;
    const PairMetric& metric(const std::string& a, const std::string& b) const;
};

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& what, RunRecord partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const RunRecord& partial() const { return partial_; }

private:
    RunRecord partial_;
};

MethodResult run_method(const ScenarioConfig& cfg, const Method& m);
PairMetric compare(const MethodResult& a, const MethodResult& b);

/// Runs every method, writes <output_dir>/<id>/ when requested, computes pairwise metrics.
RunRecord run_scenario(const ScenarioConfig& cfg);

// --- io ---

std::string csv_header();
std::string to_csv(const MethodResult& r);
/// Parsed CSV rows: time, rescaled_time, concurrence, stderr, then 32 Re/Im values.
std::vector<std::vector<double>> read_csv(const std::string& path);
std::string metadata_json(const ScenarioConfig& cfg, const MethodResult& r);
std::string summary_json(const RunRecord& rec);
void write_record(const RunRecord& rec, const std::string& dir);
void write_text(const std::string& path, const std::string& text);

// --- analysis ---

struct Peak {
    double t{0.0};
    double c{0.0};
};
/// Global maximum of c on the grid.
Peak peak(const std::vector<double>& t, const std::vector<double>& c);

struct Asymptote {
    double c_inf{0.0};
    double drift_slope{0.0};  // per unit rescaled time
    double drift_stderr{0.0};
    double window_std{0.0};
    double window_start{0.0};
    bool stationary{false};
};

class NonStationaryTail : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mean of c over the trailing window (fraction of the run). Stationary when the linear drift per unit
/// rescaled time is below 10% of the window standard deviation, when the whole drift over the window is
/// below abs_floor, or when the drift is within two standard errors of zero (noisy ensembles).
/// Throws NonStationaryTail when none holds and strict is set.
Asymptote asymptotic_concurrence(const std::vector<double>& rescaled_t, const std::vector<double>& c,
                                 double window_fraction = 0.25, double abs_floor = 1e-4, bool strict = true);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SweepPoint {
    double alpha_tilde{0.0};
    std::map<std::string, Asymptote> by_method;
};

struct AsymptoticSweep {
    std::vector<SweepPoint> points;
    std::map<std::string, double> slope;  // methods with positive c_inf at every point
};

/// Long-time runs over alpha~ with the trailing-window extraction and log-log regression.
AsymptoticSweep asymptotic_sweep(const ScenarioConfig& base, const std::vector<double>& alpha_tildes);

struct CountertermRow {
    double s{0.0};
    double alpha_tilde{0.0};
    double D{0.0};                  // sup_t |c_exact+CT - c_dissipator-only|
    double D_without_ct{0.0};       // same for exact without the counterterm
    double peak_unitary_ls{0.0};    // H_sys + H_LS
    double peak_unitary_ls_ct{0.0}; // H_sys + H_LS + H_c
    double peak_time_unitary_ls_ct{0.0};
    RunRecord record;
};

struct CountertermStudyConfig {
    ScenarioConfig base{};  // sys, grid, HOPS settings and output directory
    std::vector<double> s_values{0.3, 1.0};
    std::vector<double> alpha_tildes{6.32e-2};
    std::string exact{"hops"};  // or a master method standing in for the exact dynamics
    bool without_counterterm{true};  // also run exact without H_c (D_without_ct is NaN otherwise)
};

/// Master kind compared in the studies: QOME at resonance, PRWA when detuned.
masters::Kind study_kind(const quantum::SystemSpec& sys);

std::vector<CountertermRow> counterterm_study(const CountertermStudyConfig& cfg);

struct AdiabaticRow {
    double omega_c{0.0};
    double omega_B{0.0};
    double alpha_tilde{0.0};
    double D{0.0};
    double peak_unitary{0.0};  // H_sys + H_LS + H_c
    masters::CancellationMetrics cancellation{};
    std::string exact;
    RunRecord record;
};

struct AdiabaticScanConfig {
    ScenarioConfig base{};
    double s{0.3};
    double s0{0.03};  // |S(0)| / w_A held fixed
    std::vector<double> omega_cs{10.0, 100.0, 1000.0};
    std::vector<double> omega_Bs{1.0, 0.95};
    std::string exact{"hops"};
    bool dynamics{true};  // false: spectral cancellation metrics only
};

/// alpha~ such that |S(0)| / w_A = s0.
double adiabatic_alpha_tilde(double s, double omega_c, double s0, double omega_A = 1.0);

std::vector<AdiabaticRow> adiabatic_scan(const AdiabaticScanConfig& cfg);

struct ScalingSlopes {
    double delta_S{0.0};
    double gamma{0.0};
    double ratio_variation{0.0};  // |r_hi / r_lo - 1| over the top decade
};
/// Log-log slopes of |Delta S| and gamma against wc along the fixed-|S(0)| line.
ScalingSlopes scaling_slopes(const quantum::SystemSpec& sys, double s, double s0, const std::vector<double>& omega_cs);

/// S(x w_A) columns for the spectral figure: exact, small-x expansion, numeric quadrature.
struct SpectralRow {
    double s{0.0}, x{0.0}, exact{0.0}, expansion{0.0}, numeric{0.0};
};
std::vector<SpectralRow> spectral_tables(const std::vector<double>& s_values, double omega_c, int n_x = 81,
                                         double alpha = 1.0);
std::string spectral_csv(const std::vector<SpectralRow>& rows);

}  // namespace tsb::experiments
