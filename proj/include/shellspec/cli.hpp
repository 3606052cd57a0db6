#pragma once

// Command-line front end. Configuration comes from a key = value file and
// per-command flags (flags win); results go to stdout or --out as CSV or JSON.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shellspec/errors.hpp"
#include "shellspec/interaction.hpp"
#include "shellspec/kronig1d.hpp"
#include "shellspec/oracle.hpp"
#include "shellspec/parallel.hpp"
#include "shellspec/radial.hpp"
#include "shellspec/spectral_map.hpp"
#include "shellspec/welsh.hpp"

namespace shellspec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct KeyInfo {
    const char* name;
    const char* help;
};

/// Every configuration key the tool understands.
inline const std::vector<KeyInfo>& known_keys() {
    static const std::vector<KeyInfo> keys = {
        {"alpha", "interaction parameter alpha (1/length)"},
        {"beta", "interaction parameter beta (length)"},
        {"gamma", "interaction parameter gamma"},
        {"delta", "interaction parameter delta"},
        {"chi", "global phase of the interaction (no spectral effect)"},
        {"d", "shell spacing"},
        {"count_hint", "number of periods in the truncated radial domain"},
        {"nu", "space dimension (>= 2)"},
        {"l", "angular momentum"},
        {"l_min", "lowest angular momentum of a channel range"},
        {"l_max", "highest angular momentum of a channel range"},
        {"e_min", "lower end of the energy window"},
        {"e_max", "upper end of the energy window"},
        {"max_bands", "number of bands"},
        {"e_cutoff", "upper end of the spectrum map"},
        {"r_max", "truncation radius"},
        {"energy", "energy"},
        {"x0", "start radius of the transfer profile"},
        {"periods", "number of periods"},
        {"gap_index", "gap number counted from 1"},
        {"eps_max", "largest imaginary part of the spectral parameter"},
        {"eps_ratio", "ratio between successive imaginary parts"},
        {"eps_levels", "number of imaginary parts"},
        {"n_wanted", "number of eigenvalues requested"},
        {"probe_periods", "periods used by transfer-norm probes"},
        {"trials", "number of random configurations"},
        {"trace", "path of an optional phase trace CSV"},
    };
    return keys;
}

inline bool is_known_key(const std::string& k) {
    const auto& keys = known_keys();
    return std::any_of(keys.begin(), keys.end(), [&](const KeyInfo& ki) { return k == ki.name; });
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Flat key/value configuration. Lines are `key = value`; `#` starts a comment.
class RunConfig {
public:
    [[nodiscard]] static RunConfig parse(const std::string& text) {
        RunConfig cfg;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (cfg.values_.count(key)) throw InvalidArgument("config key '" + key + "' given twice");
            cfg.set(key, value);
        }
        return cfg;
    }

    [[nodiscard]] static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    void set(const std::string& key, const std::string& value) {
        if (!is_known_key(key)) throw InvalidArgument("unknown config key '" + key + "'");
        if (value.empty()) throw InvalidArgument("config key '" + key + "' has an empty value");
        values_[key] = value;
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }
    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

    [[nodiscard]] double number(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const double v = parse_double(key, it->second);
        if (!std::isfinite(v)) throw InvalidArgument("key '" + key + "' must be finite");
        return v;
    }

    [[nodiscard]] double required_number(const std::string& key) const {
        if (!has(key)) throw InvalidArgument("missing required key '" + key + "'");
        return number(key, 0.0);
    }

    [[nodiscard]] int integer(const std::string& key, int fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(it->second, &pos);
        } catch (const std::exception&) {
            throw InvalidArgument("key '" + key + "': not an integer: '" + it->second + "'");
        }
        if (pos != it->second.size() || v < -(1L << 30) || v > (1L << 30))
            throw InvalidArgument("key '" + key + "': not an integer: '" + it->second + "'");
        return static_cast<int>(v);
    }

    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback = {}) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] InteractionParams interaction() const {
        std::map<std::string, std::string> m;
        for (const char* k : {"alpha", "beta", "gamma", "delta", "chi"})
            if (has(k)) m[k] = text(k);
        return interaction_from_map(m);
    }

    [[nodiscard]] LatticeGeometry geometry() const {
        const double d = number("d", 1.0);
        const int hint = integer("count_hint", 64);
        if (!(d > 0.0)) throw InvalidArgument("d must be positive");
        if (hint < 1) throw InvalidArgument("count_hint must be >= 1");
        return LatticeGeometry(d, hint);
    }

    /// Canonical text form; parse(echo()) reproduces this configuration.
    [[nodiscard]] std::string echo() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
        return os.str();
    }

    friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.values_ == b.values_; }

private:
    std::map<std::string, std::string> values_;
};

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::string format;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    unsigned seed = 1;
    bool echo_config = false;
};

struct CommandResult {
    std::string payload;
    int exit_code = kExitOk;
    std::string error;  ///< reported on stderr when exit_code != 0
};

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void require_format(const std::string& fmt) {
    if (fmt != "csv" && fmt != "json") throw InvalidArgument("format must be csv or json");
}

inline std::pair<int, int> l_range(const RunConfig& c, int lo, int hi) {
    const std::pair<int, int> r{c.integer("l_min", lo), c.integer("l_max", hi)};
    if (r.first < 0 || r.second < r.first) throw InvalidArgument("need 0 <= l_min <= l_max");
    return r;
}

inline int nu_of(const RunConfig& c) {
    const int nu = c.integer("nu", 3);
    if (nu < 2) throw InvalidArgument("nu must be >= 2 (shells live in R^nu with nu >= 2)");
    return nu;
}

inline double r_max_of(const RunConfig& c, const LatticeGeometry& g) {
    const double r = c.number("r_max", truncation_radius(g));
    if (!(r > g.d)) throw InvalidArgument("r_max must exceed d");
    return r;
}

}  // namespace detail

inline std::string cmd_bands(const RunConfig& c, const CommonOptions& o) {
    const auto p = c.interaction();
    const auto g = c.geometry();
    BandStructure bs;
    const int n = c.integer("max_bands", 20);
    if (n < 1) throw InvalidArgument("max_bands must be >= 1");
    if (c.has("e_max")) {
        bs = band_structure(p, g, c.number("e_min", default_energy_floor(p, g)), c.number("e_max", 0.0), n);
    } else {
        bs = lowest_bands(p, g, n);
    }
    auto bands = bs.merged();
    if (static_cast<int>(bands.size()) > n) bands.resize(static_cast<std::size_t>(n));
    if (o.format == "csv") {
        std::ostringstream os;
        os << "band,lower,upper,width,gap_lower,gap_upper,gap_width\n";
        for (std::size_t i = 0; i < bands.size(); ++i) {
            const auto& b = bands[i];
            os << i << ',' << format_double(b.lower) << ',' << format_double(b.upper) << ','
               << format_double(b.upper - b.lower);
            if (i + 1 < bands.size()) {
                const double gl = b.upper, gu = bands[i + 1].lower;
                os << ',' << format_double(gl) << ',' << format_double(gu) << ',' << format_double(gu - gl);
            } else {
                os << ",,,";
            }
            os << '\n';
        }
        return os.str();
    }
    nlohmann::json j;
    j["e0"] = bs.bands.empty() ? nlohmann::json(nullptr) : nlohmann::json(bs.bands.front().lower);
    j["bands"] = nlohmann::json::array();
    for (const auto& b : bands) j["bands"].push_back({{"lower", b.lower}, {"upper", b.upper}, {"truncated", b.truncated}});
    j["gaps"] = nlohmann::json::array();
    for (std::size_t i = 0; i + 1 < bands.size(); ++i)
        j["gaps"].push_back({{"lower", bands[i].upper}, {"upper", bands[i + 1].lower}});
    try {
        const auto cls = classify(p, g);
        j["class"] = {{"tag", to_string(cls.tag)},
                      {"predicted_asymptote", cls.predicted_asymptote},
                      {"mu_exponent", cls.mu_exponent}};
        if (!c.has("e_max") && n >= 10) {
            const auto rep = asymptotics_report(p, g, n);
            j["asymptotics"] = {{"single_band", rep.single_band},
                                {"measured_constant", rep.measured_constant},
                                {"fitted_mu", rep.fitted_mu}};
        }
    } catch (const UnclassifiableInteraction& e) {
        j["class"] = {{"tag", nullptr}, {"reason", e.what()}};
    }
    return detail::dump(j);
}

inline std::string cmd_classify(const RunConfig& c, const CommonOptions& o) {
    const auto cls = classify(c.interaction(), c.geometry());
    if (o.format == "csv")
        return "tag,predicted_asymptote,mu_exponent\n" + std::string(to_string(cls.tag)) + ',' +
               format_double(cls.predicted_asymptote) + ',' + std::to_string(cls.mu_exponent) + '\n';
    return detail::dump(
        {{"tag", to_string(cls.tag)}, {"predicted_asymptote", cls.predicted_asymptote}, {"mu_exponent", cls.mu_exponent}});
}

inline std::string cmd_ground_symmetry(const RunConfig& c, const CommonOptions& o) {
    const auto rep = ground_state_symmetry(c.interaction(), c.geometry());
    if (o.format == "csv")
        return "e0,symmetry,residual\n" + format_double(rep.e0) + ',' + to_string(rep.symmetry) + ',' +
               format_double(rep.residual) + '\n';
    return detail::dump({{"e0", rep.e0}, {"symmetry", to_string(rep.symmetry)}, {"residual", rep.residual}});
}

inline std::string cmd_spectrum_map(const RunConfig& c, const CommonOptions& o) {
    const auto p = c.interaction();
    const auto g = c.geometry();
    const int nu = detail::nu_of(c);
    SpectrumMapOptions opt;
    opt.jobs = o.jobs;
    opt.probe_periods = c.integer("probe_periods", opt.probe_periods);
    const double cutoff = c.number("e_cutoff", std::pow(10.0 * std::numbers::pi / g.d, 2));
    const auto map = build_spectrum_map(p, g, nu, cutoff, detail::l_range(c, 0, 10), detail::r_max_of(c, g), opt);
    return o.format == "csv" ? to_csv(map) : detail::dump(to_json(map));
}

inline std::string cmd_transfer_norm(const RunConfig& c, const CommonOptions& o) {
    const auto p = c.interaction();
    const auto g = c.geometry();
    const ChannelSpec ch(detail::nu_of(c), c.integer("l", 0));
    const double e = c.required_number("energy");
    const auto prof = transfer_norm_profile(ch, p, g, e, c.number("x0", 10.25 * g.d), c.integer("periods", 1000));
    if (o.format == "csv") {
        std::ostringstream os;
        os << "r,log_norm\n";
        for (std::size_t i = 0; i < prof.radii.size(); ++i)
            os << format_double(prof.radii[i]) << ',' << format_double(prof.log_norms[i]) << '\n';
        return os.str();
    }
    return detail::dump({{"energy", prof.energy},
                         {"log_sup_norm", prof.log_sup_norm},
                         {"growth_rate", prof.growth_rate},
                         {"growth_per_period", prof.growth_per_period},
                         {"floquet_exponent", floquet_exponent(p, g, e)},
                         {"radii", prof.radii},
                         {"log_norms", prof.log_norms}});
}

inline std::string cmd_gap_eigs(const RunConfig& c, const CommonOptions& o) {
    const auto p = c.interaction();
    const auto g = c.geometry();
    const int gap_index = c.integer("gap_index", 1);
    const Gap gap = nth_gap(p, g, gap_index);
    const auto eigs = gap_eigenvalues(p, g, detail::nu_of(c), gap_index, detail::l_range(c, 0, 10),
                                      detail::r_max_of(c, g), o.jobs);
    if (o.format == "csv") {
        std::ostringstream os;
        os << "l,eigenvalue\n";
        for (const auto& [l, list] : eigs)
            for (double e : list) os << l << ',' << format_double(e) << '\n';
        return os.str();
    }
    nlohmann::json j;
    j["gap"] = {gap.lower, gap.upper};
    j["eigenvalues"] = nlohmann::json::object();
    for (const auto& [l, list] : eigs) j["eigenvalues"][std::to_string(l)] = list;
    return detail::dump(j);
}

inline std::string cmd_welsh(const RunConfig& c, const CommonOptions& o) {
    if (c.integer("nu", 2) != 2)
        throw InvalidArgument(
            "welsh eigenvalues exist only for nu = 2: for nu >= 3 the centrifugal term is positive, so there is no "
            "discrete spectrum below E0");
    const auto p = c.interaction();
    const auto g = c.geometry();
    const int wanted = c.integer("n_wanted", 1);
    const double r_max = c.number("r_max", 1000.5 * g.d);
    WelshReport rep;
    bool complete = true;
    try {
        rep = find_welsh_eigenvalues(p, g, wanted, r_max);
    } catch (const FewerThanRequested& e) {
        rep = e.report();
        complete = false;
    }
    if (c.has("trace")) {
        std::ofstream tf(c.text("trace"));
        if (!tf) throw InvalidArgument("cannot write trace file '" + c.text("trace") + "'");
        tf << to_csv(kepler_trace(p, g, 0.5 * g.d, r_max, 4));
    }
    if (o.format == "csv") {
        std::ostringstream os;
        os << "index,eigenvalue,matching_defect\n";
        for (std::size_t i = 0; i < rep.eigenvalues_found.size(); ++i)
            os << i << ',' << format_double(rep.eigenvalues_found[i]) << ',' << format_double(rep.matching_defects[i])
               << '\n';
        return os.str();
    }
    auto j = to_json(rep);
    j["n_wanted"] = wanted;
    j["complete"] = complete;
    return detail::dump(j);
}

inline std::string cmd_m_function(const RunConfig& c, const CommonOptions& o) {
    const auto p = c.interaction();
    const auto g = c.geometry();
    const ChannelSpec ch(detail::nu_of(c), c.integer("l", 0));
    const auto lad = m_function_ladder(ch, p, g, c.required_number("energy"), c.number("eps_max", 0.1),
                                       c.number("eps_ratio", 2.0), c.integer("eps_levels", 6), detail::r_max_of(c, g));
    if (o.format == "csv") {
        std::ostringstream os;
        os << "epsilon,re_m,im_m\n";
        for (const auto& e : lad.ladder)
            os << format_double(e.epsilon) << ',' << format_double(e.m.real()) << ',' << format_double(e.m.imag())
               << '\n';
        return os.str();
    }
    nlohmann::json j;
    j["im_m_limit"] = lad.im_m_limit;
    j["ladder"] = nlohmann::json::array();
    for (const auto& e : lad.ladder)
        j["ladder"].push_back({{"epsilon", e.epsilon}, {"re_m", e.m.real()}, {"im_m", e.m.imag()}});
    return detail::dump(j);
}

/// Cross-checks Wronskian-zero counts against the finite-difference oracle on
/// random configurations. Mismatches make the command fail with exit 3.
inline CommandResult cmd_oracle_check(const RunConfig& c, const CommonOptions& o) {
    const int trials = c.integer("trials", 20);
    if (trials < 1) throw InvalidArgument("trials must be >= 1");
    std::mt19937 rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    struct Trial {
        InteractionParams p = free_interaction();
        double d = 1.0;
        ChannelSpec ch;
    };
    std::vector<Trial> cases;
    for (int t = 0; t < trials; ++t) {
        Trial tr;
        const int kind = static_cast<int>(std::floor(3.0 * (0.5 + 0.5 * u(rng)))) % 3;
        if (kind == 0) {
            tr.p = delta_interaction(2.0 * u(rng));
        } else if (kind == 1) {
            tr.p = delta_prime_interaction(u(rng));
        } else {
            const double gm = 1.0 + 0.5 * u(rng), dl = 1.0 + 0.5 * u(rng);
            double be = 0.5 * u(rng);
            if (std::abs(be) < 0.05) be = 0.05;
            tr.p = make_interaction((gm * dl - 1.0) / be, be, gm, dl);
        }
        tr.d = 1.0 + 0.5 * u(rng);
        tr.ch = ChannelSpec(u(rng) < 0.0 ? 2 : 3, static_cast<int>(std::floor(2.5 * (1.0 + u(rng)))));
        cases.push_back(tr);
    }
    std::vector<nlohmann::json> rows(cases.size());
    parallel_for(cases.size(), o.jobs, [&](std::size_t i) {
        const auto& tr = cases[i];
        const LatticeGeometry g(tr.d, 16);
        const double r_max = truncation_radius(g);
        const Gap gap = nth_gap(tr.p, g, 1);
        const double probe = 0.5 * (gap.lower + gap.upper);
        const auto op = discretize_channel(tr.ch, tr.p, g, r_max);
        const double floor = kth_eigenvalue(op, 0) - 1.0;
        const int fd = count_below(op, probe) - count_below(op, floor);
        const int wz = count_wronskian_zeros(tr.ch, tr.p, g, floor, probe, RadialDomain{0.0, r_max},
                                             origin_condition(tr.ch));
        rows[i] = {{"interaction", interaction_to_map(tr.p)},
                   {"d", tr.d},
                   {"nu", tr.ch.nu},
                   {"l", tr.ch.l},
                   {"probe", probe},
                   {"oracle_count", fd},
                   {"wronskian_count", wz},
                   {"match", fd == wz}};
    });
    int mismatches = 0;
    for (const auto& r : rows) mismatches += r["match"].get<bool>() ? 0 : 1;
    CommandResult res;
    res.payload = detail::dump({{"seed", o.seed}, {"trials", rows}, {"mismatches", mismatches}});
    if (mismatches > 0) {
        res.exit_code = kExitNumerical;
        res.error = "ConvergenceFailure: " + std::to_string(mismatches) + " count mismatches against the oracle";
    }
    return res;
}

// ---------------------------------------------------------------------------
// Driver

namespace detail {

inline std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

inline std::string dashed(std::string k) {
    std::replace(k.begin(), k.end(), '_', '-');
    return k;
}

}  // namespace detail

/// Runs the tool. Output goes to `out` unless --out is given.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral analysis of radially periodic shell interactions"};
    app.require_subcommand(1);
    CommonOptions opt;
    std::map<std::string, std::string> flag_values;

    struct Spec {
        const char* name;
        const char* help;
        const char* default_format;
        std::vector<std::string> keys;
        std::function<CommandResult(const RunConfig&, const CommonOptions&)> fn;
    };
    auto wrap = [](std::string (*f)(const RunConfig&, const CommonOptions&)) {
        return [f](const RunConfig& c, const CommonOptions& o) { return CommandResult{f(c, o), kExitOk, {}}; };
    };
    const std::vector<std::string> base = {"alpha", "beta", "gamma", "delta", "chi", "d", "count_hint"};
    auto with = [&](std::vector<std::string> extra) {
        auto v = base;
        v.insert(v.end(), extra.begin(), extra.end());
        return v;
    };
    const std::vector<Spec> specs = {
        {"bands", "band edges of the 1D comparison operator", "csv", with({"e_min", "e_max", "max_bands"}),
         wrap(cmd_bands)},
        {"classify", "asymptotic class of the interaction", "json", with({}), wrap(cmd_classify)},
        {"ground-symmetry", "spectrum bottom and symmetry of the ground state", "json", with({}),
         wrap(cmd_ground_symmetry)},
        {"spectrum-map", "absolutely continuous bands and dense point gaps", "json",
         with({"nu", "e_cutoff", "l_min", "l_max", "r_max", "probe_periods"}), wrap(cmd_spectrum_map)},
        {"transfer-norm", "growth of the transfer matrix along a channel", "csv",
         with({"nu", "l", "energy", "x0", "periods"}), wrap(cmd_transfer_norm)},
        {"gap-eigs", "channel eigenvalues inside a gap", "json",
         with({"nu", "gap_index", "l_min", "l_max", "r_max"}), wrap(cmd_gap_eigs)},
        {"welsh", "eigenvalues below the essential spectrum for nu = 2", "json",
         with({"nu", "n_wanted", "r_max", "trace"}), wrap(cmd_welsh)},
        {"m-function", "Weyl m-function ladder at E + i eps", "json",
         with({"nu", "l", "energy", "eps_max", "eps_ratio", "eps_levels", "r_max"}), wrap(cmd_m_function)},
        {"oracle-check", "", "json", with({"trials"}), cmd_oracle_check},
    };

    const Spec* chosen = nullptr;
    std::vector<CLI::App*> subs;
    for (const auto& s : specs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        if (std::string(s.help).empty()) sub->group("");
        sub->add_option("--config", opt.config_path, "key = value configuration file");
        sub->add_option("--out", opt.out_path, "write the result to this path");
        sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "seed for randomized sweeps");
        sub->add_flag("--echo-config", opt.echo_config, "print the merged configuration and exit");
        for (const auto& k : s.keys) {
            const auto* info = &*std::find_if(known_keys().begin(), known_keys().end(),
                                              [&](const KeyInfo& ki) { return k == ki.name; });
            sub->add_option("--" + detail::dashed(k), flag_values[k], info->help);
        }
        sub->callback([&chosen, &s] { chosen = &s; });
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            for (auto* s : subs)
                if (s->parsed()) {
                    out << s->help();
                    return kExitOk;
                }
            out << app.help();
            return kExitOk;
        }
        err << "error: ConfigError: " << detail::one_line(e.what()) << '\n';
        return kExitConfig;
    }

    try {
        if (!chosen) throw InvalidArgument("no command given");
        RunConfig cfg = opt.config_path.empty() ? RunConfig{} : RunConfig::load(opt.config_path);
        for (const auto& k : chosen->keys) {
            const auto it = flag_values.find(k);
            if (it != flag_values.end() && !it->second.empty()) cfg.set(k, it->second);
        }
        if (opt.echo_config) {
            out << cfg.echo();
            return kExitOk;
        }
        if (opt.format.empty()) opt.format = chosen->default_format;
        detail::require_format(opt.format);
        (void)cfg.interaction();  // validate before any work
        const CommandResult res = chosen->fn(cfg, opt);
        if (opt.out_path.empty()) {
            out << res.payload;
        } else {
            std::ofstream f(opt.out_path);
            if (!f) throw InvalidArgument("cannot write '" + opt.out_path + "'");
            f << res.payload;
            std::ofstream meta(opt.out_path + ".meta.json");
            const auto now = std::chrono::system_clock::now().time_since_epoch();
            meta << nlohmann::json{{"command", chosen->name},
                                   {"config", cfg.values()},
                                   {"format", opt.format},
                                   {"jobs", opt.jobs},
                                   {"seed", opt.seed},
                                   {"unix_time", std::chrono::duration_cast<std::chrono::seconds>(now).count()}}
                        .dump(2)
                 << '\n';
        }
        if (res.exit_code != kExitOk) err << "error: " << detail::one_line(res.error) << '\n';
        return res.exit_code;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << detail::one_line(e.what()) << '\n';
        return e.category() == ErrorCategory::Config ? kExitConfig : kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: InternalError: " << detail::one_line(e.what()) << '\n';
        return kExitNumerical;
    }
}

}  // namespace shellspec::cli
