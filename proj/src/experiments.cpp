#include "schro4/experiments.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "schro4/parallel.hpp"

namespace schro4 {

using nlohmann::json;

namespace {

constexpr Mode kModes[] = {Mode::Solve, Mode::VerifyIdentity, Mode::CarlemanSweep, Mode::Stability,
                           Mode::Reconstruct};

int line_at(const std::string& text, std::size_t pos) {
    pos = std::min(pos, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Approximate source line of a key path: each key is searched after the previous one.
int locate(const std::string& text, const std::vector<std::string>& path) {
    std::size_t pos = 0;
    for (const auto& k : path) {
        const std::size_t f = text.find("\"" + k + "\"", pos);
        if (f == std::string::npos) return 0;
        pos = f + 1;
    }
    return line_at(text, pos);
}

std::string dotted(const std::vector<std::string>& path) {
    std::string s;
    for (const auto& k : path) s += (s.empty() ? "" : ".") + k;
    return s;
}

class Section {
public:
    Section(const json& j, std::vector<std::string> path, const std::string& text)
        : j_(j), path_(std::move(path)), text_(text) {
        if (!j_.is_object()) fail({}, "must be an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        std::vector<std::string> p = path_;
        if (!key.empty()) p.push_back(key);
        throw ConfigError(locate(text_, p), dotted(p) + ": " + msg);
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) fail(it.key(), "unknown key");
    }

    bool has(const char* key) const { return j_.contains(key); }

    Section sub(const char* key) const {
        std::vector<std::string> p = path_;
        p.push_back(key);
        return Section(j_.at(key), p, text_);
    }

    void get(const char* key, int& out) const {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        out = v.get<int>();
    }
    void get(const char* key, std::uint64_t& out) const {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail(key, "expected a nonnegative integer");
        out = v.get<std::uint64_t>();
    }
    void get(const char* key, double& out) const {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) fail(key, "must be finite");
    }
    void get(const char* key, std::string& out) const {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        out = v.get<std::string>();
    }
    void get(const char* key, std::vector<double>& out) const {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array()) fail(key, "expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) fail(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
    }

private:
    const json& j_;
    std::vector<std::string> path_;
    const std::string& text_;
};

void check(bool ok, const Section& s, const char* key, const char* msg) {
    if (!ok) s.fail(key, msg);
}

bool all_positive(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0 && std::isfinite(x); });
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

ConfigError::ConfigError(int line, const std::string& msg)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Solve:
            return "solve";
        case Mode::VerifyIdentity:
            return "verify-identity";
        case Mode::CarlemanSweep:
            return "carleman-sweep";
        case Mode::Stability:
            return "stability";
        case Mode::Reconstruct:
            return "reconstruct";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    for (Mode m : kModes)
        if (name == mode_name(m)) return m;
    throw ConfigError(0, "unknown mode '" + name + "'");
}

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(line_at(text, e.byte > 0 ? e.byte - 1 : 0), std::string("malformed JSON: ") + e.what());
    }
    ExperimentConfig c;
    Section top(root, {}, text);
    top.allow({"mode", "seed", "grid", "solve", "identity", "carleman", "inverse", "io"});
    if (top.has("mode")) {
        std::string m;
        top.get("mode", m);
        try {
            c.mode = parse_mode(m);
            c.mode_declared = true;
        } catch (const ConfigError&) {
            top.fail("mode", "unknown mode '" + m + "'");
        }
    }
    top.get("seed", c.seed);

    if (top.has("grid")) {
        Section s = top.sub("grid");
        s.allow({"n_x", "n_t", "T"});
        s.get("n_x", c.grid.n_x);
        s.get("n_t", c.grid.n_t);
        s.get("T", c.grid.T);
        check(c.grid.n_x >= 8, s, "n_x", "must be >= 8");
        check(c.grid.n_t >= 8, s, "n_t", "must be >= 8");
        check(c.grid.T > 0, s, "T", "must be positive");
    }
    if (top.has("solve")) {
        Section s = top.sub("solve");
        s.allow({"u0", "u0_amplitude", "p0", "p1", "p_wavenumber", "source", "source_amplitude", "source_center",
                 "source_width", "source_omega", "mass_tolerance"});
        auto& v = c.solve;
        s.get("u0", v.u0);
        s.get("u0_amplitude", v.u0_amplitude);
        s.get("p0", v.p0);
        s.get("p1", v.p1);
        s.get("p_wavenumber", v.p_wavenumber);
        s.get("source", v.source);
        s.get("source_amplitude", v.source_amplitude);
        s.get("source_center", v.source_center);
        s.get("source_width", v.source_width);
        s.get("source_omega", v.source_omega);
        s.get("mass_tolerance", v.mass_tolerance);
        check(v.u0 == "zero" || v.u0 == "clamped", s, "u0", "must be \"zero\" or \"clamped\"");
        check(v.source == "none" || v.source == "gaussian", s, "source", "must be \"none\" or \"gaussian\"");
        check(v.source_width > 0, s, "source_width", "must be positive");
        check(v.mass_tolerance > 0, s, "mass_tolerance", "must be positive");
    }
    if (top.has("identity")) {
        Section s = top.sub("identity");
        s.allow({"functions", "base_points", "lambdas", "mu", "x0", "T", "localization_samples", "tolerance"});
        auto& v = c.identity;
        s.get("functions", v.functions);
        s.get("base_points", v.base_points);
        s.get("lambdas", v.lambdas);
        s.get("mu", v.mu);
        s.get("x0", v.x0);
        s.get("T", v.T);
        s.get("localization_samples", v.localization_samples);
        s.get("tolerance", v.tolerance);
        check(v.functions > 0, s, "functions", "must be positive");
        check(v.base_points > 0, s, "base_points", "must be positive");
        check(!v.lambdas.empty() && all_positive(v.lambdas), s, "lambdas", "must be a nonempty list of positive numbers");
        check(v.mu > 0, s, "mu", "must be positive");
        check(v.x0 < 0 || v.x0 > 1, s, "x0", "must lie outside [0,1]");
        check(v.T > 0, s, "T", "must be positive");
        check(v.localization_samples > 0, s, "localization_samples", "must be positive");
        check(v.tolerance > 0, s, "tolerance", "must be positive");
    }
    if (top.has("carleman")) {
        Section s = top.sub("carleman");
        s.allow({"lambda_list", "multipliers", "C0", "mu_list", "x0", "calibrate_k_min", "calibrate_k_max",
                 "max_spread"});
        auto& v = c.carleman;
        s.get("lambda_list", v.lambda_list);
        s.get("multipliers", v.multipliers);
        s.get("C0", v.C0);
        s.get("mu_list", v.mu_list);
        s.get("x0", v.x0);
        s.get("calibrate_k_min", v.calibrate_k_min);
        s.get("calibrate_k_max", v.calibrate_k_max);
        s.get("max_spread", v.max_spread);
        check(all_positive(v.lambda_list), s, "lambda_list", "entries must be positive");
        check(!v.multipliers.empty() && all_positive(v.multipliers), s, "multipliers",
              "must be a nonempty list of positive numbers");
        check(v.C0 >= 0, s, "C0", "must be nonnegative");
        check(!v.mu_list.empty() && all_positive(v.mu_list), s, "mu_list", "must be a nonempty list of positive numbers");
        check(v.x0 < 0 || v.x0 > 1, s, "x0", "must lie outside [0,1]");
        check(v.calibrate_k_min <= v.calibrate_k_max, s, "calibrate_k_max", "must be >= calibrate_k_min");
        check(v.max_spread >= 1, s, "max_spread", "must be >= 1");
    }
    if (top.has("inverse")) {
        Section s = top.sub("inverse");
        s.allow({"r", "m", "epsilon_ladder", "lambda_factor", "slope_tolerance", "max_ratio_spread", "bk_setups",
                 "bk_n_t", "bk_T", "bk_max_gap", "reg", "bump_amplitude", "bump_center", "bump_width", "noise",
                 "fd_step", "max_iterations", "max_rel_error"});
        auto& v = c.inverse;
        s.get("r", v.r);
        s.get("m", v.m);
        s.get("epsilon_ladder", v.epsilon_ladder);
        s.get("lambda_factor", v.lambda_factor);
        s.get("slope_tolerance", v.slope_tolerance);
        s.get("max_ratio_spread", v.max_ratio_spread);
        s.get("bk_setups", v.bk_setups);
        s.get("bk_n_t", v.bk_n_t);
        s.get("bk_T", v.bk_T);
        s.get("bk_max_gap", v.bk_max_gap);
        s.get("reg", v.reg);
        s.get("bump_amplitude", v.bump_amplitude);
        s.get("bump_center", v.bump_center);
        s.get("bump_width", v.bump_width);
        s.get("noise", v.noise);
        s.get("fd_step", v.fd_step);
        s.get("max_iterations", v.max_iterations);
        s.get("max_rel_error", v.max_rel_error);
        check(v.r >= 0, s, "r", "must be nonnegative");
        check(v.m > 0, s, "m", "must be positive");
        check(v.epsilon_ladder.size() >= 2 && all_positive(v.epsilon_ladder), s, "epsilon_ladder",
              "needs at least two positive entries");
        check(v.lambda_factor > 0, s, "lambda_factor", "must be positive");
        check(v.bk_setups >= 0, s, "bk_setups", "must be nonnegative");
        check(v.bk_n_t >= 8 && v.bk_n_t % 2 == 0, s, "bk_n_t", "must be even and >= 8");
        check(v.bk_T > 0, s, "bk_T", "must be positive");
        check(v.reg >= 0, s, "reg", "must be nonnegative");
        check(v.bump_width > 0, s, "bump_width", "must be positive");
        check(v.noise >= 0, s, "noise", "must be nonnegative");
        check(v.fd_step > 0, s, "fd_step", "must be positive");
        check(v.max_iterations > 0, s, "max_iterations", "must be positive");
    }
    if (top.has("io")) {
        Section s = top.sub("io");
        s.allow({"output_dir", "csv_precision"});
        s.get("output_dir", c.io.output_dir);
        s.get("csv_precision", c.io.csv_precision);
        check(c.io.csv_precision >= 1 && c.io.csv_precision <= 17, s, "csv_precision", "must be in [1, 17]");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["mode"] = mode_name(mode);
    j["seed"] = seed;
    j["grid"] = {{"n_x", grid.n_x}, {"n_t", grid.n_t}, {"T", grid.T}};
    j["solve"] = {{"u0", solve.u0},
                  {"u0_amplitude", solve.u0_amplitude},
                  {"p0", solve.p0},
                  {"p1", solve.p1},
                  {"p_wavenumber", solve.p_wavenumber},
                  {"source", solve.source},
                  {"source_amplitude", solve.source_amplitude},
                  {"source_center", solve.source_center},
                  {"source_width", solve.source_width},
                  {"source_omega", solve.source_omega},
                  {"mass_tolerance", solve.mass_tolerance}};
    j["identity"] = {{"functions", identity.functions},
                     {"base_points", identity.base_points},
                     {"lambdas", identity.lambdas},
                     {"mu", identity.mu},
                     {"x0", identity.x0},
                     {"T", identity.T},
                     {"localization_samples", identity.localization_samples},
                     {"tolerance", identity.tolerance}};
    j["carleman"] = {{"lambda_list", carleman.lambda_list},
                     {"multipliers", carleman.multipliers},
                     {"C0", carleman.C0},
                     {"mu_list", carleman.mu_list},
                     {"x0", carleman.x0},
                     {"calibrate_k_min", carleman.calibrate_k_min},
                     {"calibrate_k_max", carleman.calibrate_k_max},
                     {"max_spread", carleman.max_spread}};
    const auto& v = inverse;
    j["inverse"] = {{"r", v.r},
                    {"m", v.m},
                    {"epsilon_ladder", v.epsilon_ladder},
                    {"lambda_factor", v.lambda_factor},
                    {"slope_tolerance", v.slope_tolerance},
                    {"max_ratio_spread", v.max_ratio_spread},
                    {"bk_setups", v.bk_setups},
                    {"bk_n_t", v.bk_n_t},
                    {"bk_T", v.bk_T},
                    {"bk_max_gap", v.bk_max_gap},
                    {"reg", v.reg},
                    {"bump_amplitude", v.bump_amplitude},
                    {"bump_center", v.bump_center},
                    {"bump_width", v.bump_width},
                    {"noise", v.noise},
                    {"fd_step", v.fd_step},
                    {"max_iterations", v.max_iterations},
                    {"max_rel_error", v.max_rel_error}};
    j["io"] = {{"output_dir", io.output_dir}, {"csv_precision", io.csv_precision}};
    return j.dump(2);
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(canonical_json()));
    return buf;
}

// ---- pipelines --------------------------------------------------------------

Grid config_grid(const ExperimentConfig& cfg) { return Grid(cfg.grid.n_x, cfg.grid.n_t, cfg.grid.T); }

namespace {

std::vector<cplx> clamped_profile(const Grid& g, double amp, double tilt) {
    std::vector<cplx> u(static_cast<std::size_t>(g.n_x));
    for (int i = 0; i < g.n_x; ++i) {
        const double x = g.x(i + 1);
        u[static_cast<std::size_t>(i)] = amp * 16.0 * x * x * (1 - x) * (1 - x) * (1 + tilt * x);
    }
    return u;
}

double min_abs(const std::vector<cplx>& v) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& z : v) m = std::min(m, std::abs(z));
    return m;
}

double gaussian(double x, double c, double w) {
    const double z = (x - c) / w;
    return std::exp(-z * z);
}

}  // namespace

SolveOutcome solve_experiment(const ExperimentConfig& cfg) {
    const Grid g = config_grid(cfg);
    const auto& s = cfg.solve;
    const Potential p = Potential::from_function(
        g, [&](double x) { return s.p0 + s.p1 * std::cos(2 * M_PI * s.p_wavenumber * x); });
    std::vector<cplx> u0 = s.u0 == "zero" ? std::vector<cplx>(static_cast<std::size_t>(g.n_x), 0.0)
                                          : clamped_profile(g, s.u0_amplitude, 0.0);
    Source f;
    if (s.source == "gaussian")
        f = [&](double t, std::vector<cplx>& out) {
            for (int i = 0; i < g.n_x; ++i)
                out[static_cast<std::size_t>(i)] =
                    s.source_amplitude * gaussian(g.x(i + 1), s.source_center, s.source_width) *
                    std::exp(cplx(0, s.source_omega * t));
        };
    SolveOutcome o;
    o.u = solve(u0, p, g, f);
    o.traces = extract_traces(o.u);
    const double m0 = mass(o.u, 0);
    if (m0 > 0)
        for (int k = 0; k <= g.n_t; ++k) o.mass_drift = std::max(o.mass_drift, std::abs(mass(o.u, k) - m0) / m0);
    return o;
}

VerificationSettings identity_settings(const ExperimentConfig& cfg) {
    VerificationSettings v;
    v.seed = cfg.seed;
    v.functions = cfg.identity.functions;
    v.base_points = cfg.identity.base_points;
    v.lambdas = cfg.identity.lambdas;
    v.mu = cfg.identity.mu;
    v.x0 = cfg.identity.x0;
    v.T = cfg.identity.T;
    v.localization_samples = cfg.identity.localization_samples;
    return v;
}

SweepOutcome carleman_experiment(const ExperimentConfig& cfg) {
    const Grid g = config_grid(cfg);
    const auto& c = cfg.carleman;
    const std::vector<SpaceTimeField> family = carleman_family(g, cfg.seed);
    CarlemanParams base;
    base.T = g.T;
    base.x0 = c.x0;
    SweepOutcome o;
    const double TT = g.T + g.T * g.T;
    if (!c.lambda_list.empty()) {
        o.lambdas = c.lambda_list;
    } else {
        if (c.C0 > 0) {
            o.calibration.C0 = c.C0;
        } else {
            o.calibration = calibrate_C0(family, c.multipliers, c.mu_list, base, c.max_spread, c.calibrate_k_min,
                                         c.calibrate_k_max);
            if (!o.calibration.found) throw DomainError("calibrate_C0: no C0 in range meets the spread target");
        }
        for (double m : c.multipliers) o.lambdas.push_back(m * o.calibration.C0 * TT);
    }
    o.sweep = constant_sweep(family, o.lambdas, c.mu_list, base);
    const double lam = *std::min_element(o.lambdas.begin(), o.lambdas.end());
    std::vector<double> worst(family.size() * c.mu_list.size(), 0.0);
    parallel_for(static_cast<int>(worst.size()), [&](int idx) {
        const std::size_t m = static_cast<std::size_t>(idx) % family.size();
        CarlemanParams p = base;
        p.lambda = lam;
        p.mu = c.mu_list[static_cast<std::size_t>(idx) / family.size()];
        const double S = carleman_log_scale(g, p);
        const double a = carleman_lhs(family[m], p, S), b = carleman_lhs_vform(family[m], p, S);
        const double q = carleman_lhs_quadrature_error(family[m], p, S);
        worst[static_cast<std::size_t>(idx)] = std::abs(a - b) / (2.0 * q);
    });
    o.vform_worst = *std::max_element(worst.begin(), worst.end());
    return o;
}

InversionSetup ladder_setup(const ExperimentConfig& cfg) {
    InversionSetup s;
    s.grid = config_grid(cfg);
    s.p = Potential::from_function(s.grid, [](double x) { return 1.0 + 0.3 * std::cos(2 * M_PI * x); });
    s.q = s.p;
    s.u0 = clamped_profile(s.grid, 1.0, 0.3);
    s.r = cfg.inverse.r > 0 ? cfg.inverse.r : 0.9 * min_abs(s.u0);
    s.m = cfg.inverse.m;
    s.params.T = 2.0 * s.grid.T;
    s.params.lambda = cfg.inverse.lambda_factor * s.grid.T * s.grid.T;
    s.realness = Realness::Real;
    return s;
}

InversionSetup bk_setup(const ExperimentConfig& cfg, int i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    auto U = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    const double T = cfg.inverse.bk_T;
    InversionSetup s;
    s.grid = Grid(cfg.grid.n_x, cfg.inverse.bk_n_t, T);
    const double c = U(0.35, 0.65), k = U(0.5, 1.5), a = U(0.0, 1.0);
    s.p = Potential::from_function(s.grid, [&](double x) { return 1.0 + 0.3 * std::cos(2 * M_PI * k * x); });
    s.q = Potential::from_function(
        s.grid, [&](double x) { return 1.0 + 0.3 * std::cos(2 * M_PI * k * x) + 0.5 * gaussian(x, c, 0.1); });
    s.u0.resize(static_cast<std::size_t>(s.grid.n_x));
    for (int j = 0; j < s.grid.n_x; ++j) {
        const double x = s.grid.x(j + 1);
        s.u0[static_cast<std::size_t>(j)] = 16.0 * x * x * (1 - x) * (1 - x) * (1 + 0.2 * a * std::sin(3 * x));
    }
    s.r = cfg.inverse.r > 0 ? cfg.inverse.r : 0.9 * min_abs(s.u0);
    s.m = cfg.inverse.m;
    s.params.T = 2.0 * T;
    s.params.lambda = cfg.inverse.lambda_factor * T * T;
    s.realness = Realness::Real;
    return s;
}

StabilityOutcome stability_experiment(const ExperimentConfig& cfg) {
    StabilityOutcome o;
    o.ladder = stability_ladder(ladder_setup(cfg), cfg.inverse.epsilon_ladder);
    const int n = cfg.inverse.bk_setups;
    o.bk.resize(static_cast<std::size_t>(n));
    o.bk_r.resize(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
        const InversionSetup s = bk_setup(cfg, i);
        o.bk[static_cast<std::size_t>(i)] = bk_identity(s, difference_system(s));
        o.bk_r[static_cast<std::size_t>(i)] = s.r;
    });
    return o;
}

ReconstructionOutcome reconstruct_experiment(const ExperimentConfig& cfg) {
    const Grid g = config_grid(cfg);
    const auto& v = cfg.inverse;
    ReconstructionOutcome o;
    o.p_init = Potential::constant(g.n_x, 1.0);
    o.q_true = Potential::from_function(
        g, [&](double x) { return 1.0 + v.bump_amplitude * gaussian(x, v.bump_center, v.bump_width); });
    const std::vector<cplx> u0 = clamped_profile(g, 1.0, 0.3);
    BoundaryTrace data = boundary_data(u0, o.q_true, g);
    if (v.noise > 0) {
        // relative perturbation, smooth in time: four random sine modes per trace
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> N(0.0, 1.0);
        for (auto* series : {&data.uxx, &data.uxxx}) {
            double a[4];
            for (double& x : a) x = N(rng);
            for (std::size_t k = 0; k < series->size(); ++k) {
                double s = 0;
                for (int m = 0; m < 4; ++m) s += 0.5 * a[m] * std::sin((m + 1) * M_PI * g.t(static_cast<int>(k)) / g.T);
                (*series)[k] *= 1.0 + v.noise * s;
            }
        }
    }
    ReconstructionOptions opt;
    opt.fd_step = v.fd_step;
    opt.max_iterations = v.max_iterations;
    o.result = reconstruct_potential(data, u0, o.p_init, v.reg, g, opt, &o.q_true);
    o.rel_error = relative_l2_error(o.result.q, o.q_true);
    for (std::size_t i = 1; i < o.result.history.size(); ++i)
        o.monotone = o.monotone && o.result.history[i].misfit <= o.result.history[i - 1].misfit;
    return o;
}

// ---- output -----------------------------------------------------------------

namespace {

class Csv {
public:
    Csv(const std::filesystem::path& path, const ExperimentConfig& cfg, const std::string& columns)
        : out_(path), prec_(cfg.io.csv_precision) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << header(cfg) << "\n" << columns << "\n";
    }
    static std::string header(const ExperimentConfig& cfg) {
        return std::string("# schro4 ") + kVersion + " config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed);
    }
    Csv& num(double v) { return field(fmt(v)); }
    Csv& integer(long long v) { return field(std::to_string(v)); }
    Csv& text(const std::string& s) { return field(s); }
    void end() {
        out_ << "\n";
        first_ = true;
    }
    std::string fmt(double v) const {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*e", prec_, v);
        return buf;
    }

private:
    Csv& field(const std::string& s) {
        if (!first_) out_ << ",";
        out_ << s;
        first_ = false;
        return *this;
    }
    std::ofstream out_;
    int prec_;
    bool first_ = true;
};

std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", prec, v);
    return buf;
}

struct Writer {
    const ExperimentConfig& cfg;
    std::filesystem::path dir;
    RunResult& res;
    Csv open(const std::string& name, const std::string& columns) {
        res.files.push_back(name);
        return Csv(dir / name, cfg, columns);
    }
    void line(const std::string& s) { res.summary += s + "\n"; }
    void verdict(bool ok, const std::string& what) {
        line(std::string(ok ? "PASS " : "FAIL ") + what);
        if (!ok) res.exit_code = kAcceptanceFailure;
    }
};

void run_solve(const ExperimentConfig& cfg, Writer& w) {
    const SolveOutcome o = solve_experiment(cfg);
    const Grid& g = o.u.grid;
    {
        Csv f = w.open("field.csv", "t,x,re,im");
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 0; i <= g.n_x + 1; ++i) f.num(g.t(k)).num(g.x(i)).num(o.u(k, i).real()).num(o.u(k, i).imag()).end();
    }
    {
        Csv f = w.open("traces.csv", "t,uxx_re,uxx_im,uxxx_re,uxxx_im");
        for (int k = 0; k <= g.n_t; ++k) {
            const auto K = static_cast<std::size_t>(k);
            f.num(g.t(k)).num(o.traces.uxx[K].real()).num(o.traces.uxx[K].imag());
            f.num(o.traces.uxxx[K].real()).num(o.traces.uxxx[K].imag()).end();
        }
    }
    double umax = 0;
    for (const auto& z : o.u.values) umax = std::max(umax, std::abs(z));
    w.line("max |u| = " + fmt(umax));
    w.line("relative mass drift = " + fmt(o.mass_drift));
    if (cfg.solve.source == "none")
        w.verdict(o.mass_drift <= cfg.solve.mass_tolerance, "mass drift <= " + fmt(cfg.solve.mass_tolerance, 1));
}

void run_identity(const ExperimentConfig& cfg, Writer& w) {
    const VerificationResult r = verify_identity(identity_settings(cfg));
    {
        Csv f = w.open("identity.csv", "function,point,t,x,lambda,psi_mode,published_residual,corrected_residual");
        for (const auto& row : r.rows)
            f.integer(row.function).integer(row.point).num(row.t).num(row.x).num(row.lambda)
                .text(psi_mode_name(row.mode)).num(row.published).num(row.corrected).end();
    }
    {
        Csv f = w.open("localization.csv", "index,block,monomial,coefficient,fitted_weight");
        const auto& cat = correction_catalogue();
        for (int k = 0; k < kNumCorrections; ++k) {
            const auto& c = cat[static_cast<std::size_t>(k)];
            f.integer(k).text(c.block).text(c.monomial).text(c.coefficient).num(r.localization.fitted[static_cast<std::size_t>(k)]).end();
        }
    }
    w.line("samples = " + std::to_string(r.rows.size()));
    w.line("published variant max residual = " + fmt(r.max_published));
    w.line("corrected variant max residual = " + fmt(r.max_corrected));
    w.line("refit max residual = " + fmt(r.localization.refit_max_residual) + " (" +
           std::to_string(r.localization.active.size()) + " active corrections)");
    w.verdict(r.max_corrected <= cfg.identity.tolerance, "max residual <= " + fmt(cfg.identity.tolerance, 1));
}

void run_sweep(const ExperimentConfig& cfg, Writer& w) {
    const SweepOutcome o = carleman_experiment(cfg);
    {
        Csv f = w.open("sweep.csv", "lambda,mu,member_id,lhs,rhs_source,rhs_boundary,ratio");
        for (const auto& r : o.sweep.rows)
            f.num(r.lambda).num(r.mu).integer(r.member).num(r.report.lhs).num(r.report.rhs_source)
                .num(r.report.rhs_boundary).num(r.report.ratio).end();
    }
    {
        Csv f = w.open("sweep_summary.csv", "lambda,mu,max_ratio,min_ratio,flagged");
        for (const auto& s : o.sweep.summary)
            f.num(s.lambda).num(s.mu).num(s.max_ratio).num(s.min_ratio).integer(s.flagged).end();
    }
    if (o.calibration.C0 > 0)
        w.line("C0 = " + fmt(o.calibration.C0) + (o.calibration.found ? " (calibrated)" : " (configured)"));
    double hi = 0;
    for (const auto& s : o.sweep.summary) hi = std::max(hi, s.max_ratio);
    w.line("max ratio = " + fmt(hi));
    w.line("spread of max ratio = " + fmt(o.sweep.spread));
    w.line("v-form check |lhs_u - lhs_v| / (2 quadrature error) <= " + fmt(o.vform_worst));
    w.verdict(o.sweep.all_finite && o.sweep.spread <= cfg.carleman.max_spread,
              "finite ratios, spread <= " + fmt(cfg.carleman.max_spread, 1));
    w.verdict(o.vform_worst <= 1.0, "v-form agrees with u-form within 2x quadrature error");
}

void run_stability(const ExperimentConfig& cfg, Writer& w) {
    const StabilityOutcome o = stability_experiment(cfg);
    {
        Csv f = w.open("stability.csv", "epsilon,f_norm_sq,trace_h1_sq,ratio");
        for (const auto& r : o.ladder.rows)
            f.num(r.epsilon).num(r.report.f_norm_sq).num(r.report.trace_h1_sq).num(r.report.ratio).end();
    }
    bool bk_ok = true;
    {
        Csv f = w.open("bk_identity.csv", "setup,im_j,target,lower_bound,relative_gap,terminal_error");
        for (std::size_t i = 0; i < o.bk.size(); ++i) {
            const auto& b = o.bk[i];
            f.integer(static_cast<long long>(i)).num(b.J.imag()).num(b.im_target).num(b.lower_bound)
                .num(b.relative_gap()).num(b.terminal_error).end();
            bk_ok = bk_ok && b.relative_gap() <= cfg.inverse.bk_max_gap && b.J.imag() >= b.lower_bound;
        }
    }
    w.line("regression slope = " + fmt(o.ladder.slope));
    w.line("ratio spread = " + fmt(o.ladder.ratio_spread));
    double gap = 0;
    for (const auto& b : o.bk) gap = std::max(gap, b.relative_gap());
    w.line("max Im J relative gap = " + fmt(gap));
    w.verdict(std::abs(o.ladder.slope - 1.0) <= cfg.inverse.slope_tolerance,
              "slope within " + fmt(cfg.inverse.slope_tolerance, 2) + " of 1");
    w.verdict(o.ladder.ratio_spread <= cfg.inverse.max_ratio_spread,
              "ratio spread <= " + fmt(cfg.inverse.max_ratio_spread, 1));
    if (!o.bk.empty()) w.verdict(bk_ok, "Im J within " + fmt(cfg.inverse.bk_max_gap, 2) + " and above the lower bound");
}

void run_reconstruct(const ExperimentConfig& cfg, Writer& w) {
    const ReconstructionOutcome o = reconstruct_experiment(cfg);
    {
        Csv f = w.open("history.csv", "iter,misfit,rel_error_if_known");
        for (const auto& h : o.result.history) f.integer(h.iteration).num(h.misfit).num(h.rel_error).end();
    }
    {
        Csv f = w.open("potential.csv", "x,q_init,q_true,q_recovered");
        const Grid g = config_grid(cfg);
        for (int i = 0; i < g.n_x; ++i) {
            const auto I = static_cast<std::size_t>(i);
            f.num(g.x(i + 1)).num(o.p_init.values[I]).num(o.q_true.values[I]).num(o.result.q.values[I]).end();
        }
    }
    w.line("iterations = " + std::to_string(o.result.history.size() - 1));
    w.line("final misfit = " + fmt(o.result.history.back().misfit));
    w.line("relative L2 error = " + fmt(o.rel_error));
    w.line("stop: " + o.result.message);
    if (o.result.warning) w.line("WARNING: reconstruction did not converge");
    w.verdict(o.monotone, "misfit monotone nonincreasing");
    w.verdict(o.rel_error <= cfg.inverse.max_rel_error, "relative error <= " + fmt(cfg.inverse.max_rel_error, 2));
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    RunResult res;
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    Writer w{cfg, dir, res};
    {
        std::ofstream c(dir / "config.json");
        c << cfg.canonical_json() << "\n";
        res.files.push_back("config.json");
    }
    w.line(Csv::header(cfg));
    w.line(std::string("mode = ") + mode_name(cfg.mode));
    try {
        switch (cfg.mode) {
            case Mode::Solve:
                run_solve(cfg, w);
                break;
            case Mode::VerifyIdentity:
                run_identity(cfg, w);
                break;
            case Mode::CarlemanSweep:
                run_sweep(cfg, w);
                break;
            case Mode::Stability:
                run_stability(cfg, w);
                break;
            case Mode::Reconstruct:
                run_reconstruct(cfg, w);
                break;
        }
    } catch (const SolverError& e) {
        res.exit_code = kNumericalFailure;
        w.line(std::string("numerical failure in forward solver: ") + e.what());
    } catch (const HypothesisError& e) {
        res.exit_code = kNumericalFailure;
        w.line(std::string("numerical failure in inverse setup: ") + e.what());
    } catch (const DomainError& e) {
        res.exit_code = kNumericalFailure;
        w.line(std::string("numerical failure in ") + mode_name(cfg.mode) + ": " + e.what());
    } catch (const JetError& e) {
        res.exit_code = kNumericalFailure;
        w.line(std::string("numerical failure in jet calculus: ") + e.what());
    }
    std::ofstream s(dir / "summary.txt");
    s << res.summary;
    res.files.push_back("summary.txt");
    return res;
}

}  // namespace schro4
