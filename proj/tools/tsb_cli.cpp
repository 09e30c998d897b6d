// tsb — command-line front end for the two-qubit spin-boson toolkit

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tsb/bcf_fit.hpp"
#include "tsb/experiments.hpp"

using namespace tsb;
using namespace tsb::experiments;
using ojson = nlohmann::ordered_json;

namespace {

// scenario keys exposed as --key flags (underscores become dashes)
const std::vector<std::string> kScenarioKeys{
    "id",      "omega_A", "omega_B",   "alpha",     "alpha_tilde", "s",      "omega_c", "methods",
    "initial", "rescaled_t_end", "t_end", "n_times", "output_dir", "seed",  "k_max",   "n_samples",
    "n_terms", "antithetic", "ladder", "workers",   "rtol",        "atol",   "cg_tau"};

struct ScenarioFlags {
    std::string config_file;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app, const std::vector<std::string>& skip = {}) {
        app->add_option("--config", config_file, "key = value file; flags override it");
        for (const auto& k : kScenarioKeys) {
            if (std::find(skip.begin(), skip.end(), k) != skip.end()) continue;
            std::string flag = "--" + k;
            std::replace(flag.begin(), flag.end(), '_', '-');
            app->add_option(flag, values[k], "scenario " + k);
        }
    }

    std::map<std::string, std::string> merged() const {
        std::map<std::string, std::string> kv;
        if (!config_file.empty()) kv = read_key_value_file(config_file);
        auto given = [&](const char* k) {
            const auto it = values.find(k);
            return it != values.end() && !it->second.empty();
        };
        if (given("alpha") && given("alpha_tilde"))
            throw std::invalid_argument("give at most one of --alpha and --alpha-tilde");
        for (const auto& [k, v] : values) {
            if (v.empty()) continue;
            if (k == "alpha") kv.erase("alpha_tilde");
            if (k == "alpha_tilde") kv.erase("alpha");
            kv[k] = v;
        }
        return kv;
    }

    ScenarioConfig scenario() const {
        ScenarioConfig c;
        c.apply(merged());
        return c;
    }
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t pos = 0;
        out.push_back(std::stod(tok, &pos));
    }
    if (out.empty()) throw std::invalid_argument("empty number list '" + text + "'");
    return out;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
    } else {
        write_text(path, text);
    }
}

ojson asymptote_json(const Asymptote& a) {
    return {{"c_inf", a.c_inf}, {"drift_slope", a.drift_slope}, {"drift_stderr", a.drift_stderr},
            {"window_std", a.window_std},
            {"window_start", a.window_start}, {"stationary", a.stationary}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entanglement dynamics of two qubits in a common (sub-)Ohmic bath"};
    app.require_subcommand(1);

    // spectral
    auto* spectral_cmd = app.add_subcommand("spectral", "S(x) tables: exact, expansion, numeric quadrature");
    std::string sp_s = "0.1,0.3,0.5,0.7,1.0", sp_out;
    double sp_wc = 1.0, sp_alpha = 1.0;
    int sp_nx = 81;
    spectral_cmd->add_option("--s-values", sp_s, "comma list of s");
    spectral_cmd->add_option("--omega-c", sp_wc, "cutoff frequency");
    spectral_cmd->add_option("--alpha", sp_alpha, "coupling");
    spectral_cmd->add_option("--n-x", sp_nx, "points on x in [-1, 1]");
    spectral_cmd->add_option("--out", sp_out, "CSV path (stdout when absent)");

    // fit-bcf
    auto* fit_cmd = app.add_subcommand("fit-bcf", "multi-exponential fit of the bath correlation function");
    double fit_alpha = -1.0, fit_at = -1.0, fit_s = 1.0, fit_wc = 10.0, fit_tmax = 0.0;
    int fit_terms = 5;
    std::string fit_out;
    auto* o_alpha = fit_cmd->add_option("--alpha", fit_alpha, "coupling alpha");
    auto* o_at = fit_cmd->add_option("--alpha-tilde", fit_at, "rescaled coupling");
    o_alpha->excludes(o_at);
    fit_cmd->add_option("--s", fit_s, "exponent");
    fit_cmd->add_option("--omega-c", fit_wc, "cutoff frequency");
    fit_cmd->add_option("--terms", fit_terms, "number of exponentials");
    fit_cmd->add_option("--t-max", fit_tmax, "fit window (default: 1e-4 decay point)");
    fit_cmd->add_option("--out", fit_out, "JSON path (stdout when absent)");

    // run
    auto* run_cmd = app.add_subcommand("run", "run one scenario with HOPS and/or master equations");
    ScenarioFlags run_flags;
    run_flags.attach(run_cmd);

    // counterterm
    auto* ct_cmd = app.add_subcommand("counterterm", "counterterm study over s and coupling");
    ScenarioFlags ct_flags;
    ct_flags.attach(ct_cmd, {"s", "alpha", "alpha_tilde", "methods"});
    std::string ct_s = "0.3,1", ct_at = "0.0632", ct_exact = "hops";
    ct_cmd->add_option("--s-values", ct_s, "comma list of s");
    ct_cmd->add_option("--alpha-tildes", ct_at, "comma list of rescaled couplings");
    ct_cmd->add_option("--exact", ct_exact, "reference dynamics: hops or a master method");

    // adiabatic
    auto* ad_cmd = app.add_subcommand("adiabatic", "cutoff ladder at fixed |S(0)|");
    ScenarioFlags ad_flags;
    ad_flags.attach(ad_cmd, {"alpha", "alpha_tilde", "omega_c", "omega_B", "methods", "s"});
    double ad_s = 0.3, ad_s0 = 0.03;
    std::string ad_wc = "10,100,1000", ad_wb = "1,0.95", ad_exact = "hops";
    bool ad_no_dyn = false;
    ad_cmd->add_option("--s", ad_s, "exponent");
    ad_cmd->add_option("--s0", ad_s0, "|S(0)| / omega_A held fixed");
    ad_cmd->add_option("--omega-cs", ad_wc, "comma list of cutoffs");
    ad_cmd->add_option("--omega-bs", ad_wb, "comma list of omega_B");
    ad_cmd->add_option("--exact", ad_exact, "reference dynamics: hops or a master method");
    ad_cmd->add_flag("--no-dynamics", ad_no_dyn, "spectral cancellation metrics only");

    // asymptotic
    auto* as_cmd = app.add_subcommand("asymptotic", "trailing-window concurrence over a coupling sweep");
    ScenarioFlags as_flags;
    as_flags.attach(as_cmd, {"alpha", "alpha_tilde"});
    std::string as_at = "0.02,0.0632,0.2";
    as_cmd->add_option("--alpha-tildes", as_at, "comma list of rescaled couplings");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (spectral_cmd->parsed()) {
            emit(spectral_csv(spectral_tables(parse_list(sp_s), sp_wc, sp_nx, sp_alpha)), sp_out);
        } else if (fit_cmd->parsed()) {
            if ((fit_alpha < 0.0) == (fit_at < 0.0)) throw std::invalid_argument("give exactly one of --alpha and --alpha-tilde");
            const auto p = fit_alpha >= 0.0 ? spectral::SpectralParams{fit_alpha, fit_s, fit_wc}
                                            : spectral::SpectralParams::from_rescaled(fit_at, fit_s, fit_wc);
            p.validate();
            const auto fit = bcf::fit_bcf(p, fit_terms, fit_tmax);
            auto j = ojson::parse(bcf::to_json(fit, p));
            j["normalized_error"] = fit.normalized_error();
            emit(j.dump(2) + "\n", fit_out);
        } else if (run_cmd->parsed()) {
            const auto cfg = run_flags.scenario();
            const auto rec = run_scenario(cfg);
            std::cout << summary_json(rec);
        } else if (ct_cmd->parsed()) {
            CountertermStudyConfig cfg;
            cfg.base = ct_flags.scenario();
            cfg.base.methods = parse_methods("qome");
            cfg.s_values = parse_list(ct_s);
            cfg.alpha_tildes = parse_list(ct_at);
            cfg.exact = ct_exact;
            ojson rows = ojson::array();
            for (const auto& r : counterterm_study(cfg))
                rows.push_back({{"s", r.s},
                                {"alpha_tilde", r.alpha_tilde},
                                {"D", r.D},
                                {"D_without_counterterm", r.D_without_ct},
                                {"peak_unitary_ls", r.peak_unitary_ls},
                                {"peak_unitary_ls_ct", r.peak_unitary_ls_ct},
                                {"config_hash", r.record.config.hash()}});
            std::cout << rows.dump(2) << "\n";
        } else if (ad_cmd->parsed()) {
            AdiabaticScanConfig cfg;
            cfg.base = ad_flags.scenario();
            cfg.base.methods = parse_methods("qome");
            cfg.s = ad_s;
            cfg.s0 = ad_s0;
            cfg.omega_cs = parse_list(ad_wc);
            cfg.omega_Bs = parse_list(ad_wb);
            cfg.exact = ad_exact;
            cfg.dynamics = !ad_no_dyn;
            ojson rows = ojson::array();
            for (const auto& r : adiabatic_scan(cfg)) {
                ojson row{{"omega_c", r.omega_c},
                          {"omega_B", r.omega_B},
                          {"alpha_tilde", r.alpha_tilde},
                          {"delta_S", r.cancellation.delta_S},
                          {"gamma", r.cancellation.gamma},
                          {"ratio", r.cancellation.ratio}};
                if (cfg.dynamics) {
                    row["exact"] = r.exact;
                    row["D"] = r.D;
                    row["peak_unitary"] = r.peak_unitary;
                }
                rows.push_back(row);
            }
            quantum::SystemSpec sys = cfg.base.sys;
            const auto sl = scaling_slopes(sys, cfg.s, cfg.s0, cfg.omega_cs);
            ojson out{{"rows", rows},
                      {"slopes", {{"delta_S", sl.delta_S}, {"gamma", sl.gamma}, {"ratio_variation", sl.ratio_variation}}}};
            std::cout << out.dump(2) << "\n";
        } else if (as_cmd->parsed()) {
            auto kv = as_flags.merged();
            kv["alpha_tilde"] = "1";  // placeholder, replaced per sweep point
            ScenarioConfig base;
            base.apply(kv);
            const auto sw = asymptotic_sweep(base, parse_list(as_at));
            ojson pts = ojson::array();
            for (const auto& pt : sw.points) {
                ojson m;
                for (const auto& [label, a] : pt.by_method) m[label] = asymptote_json(a);
                pts.push_back({{"alpha_tilde", pt.alpha_tilde}, {"methods", m}});
            }
            ojson slopes = ojson::object();
            for (const auto& [label, v] : sw.slope) slopes[label] = v;
            std::cout << ojson{{"points", pts}, {"slopes", slopes}}.dump(2) << "\n";
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
