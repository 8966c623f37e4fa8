// Config-driven experiment runner behind the command-line tool.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "schro4/carleman.hpp"
#include "schro4/identity.hpp"
#include "schro4/inverse.hpp"

namespace schro4 {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode { Solve, VerifyIdentity, CarlemanSweep, Stability, Reconstruct };
const char* mode_name(Mode m);
// Throws ConfigError (line 0) for unknown names.
Mode parse_mode(const std::string& name);

class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& msg);
    int line() const { return line_; }

private:
    int line_;
};

// Every numeric default used by the experiments lives here.
struct ExperimentConfig {
    Mode mode = Mode::Solve;
    bool mode_declared = false;  // the file named a mode explicitly
    std::uint64_t seed = 1;

    struct GridCfg {
        int n_x = 64;
        int n_t = 200;
        double T = 1.0;
    } grid;

    struct SolveCfg {
        std::string u0 = "clamped";  // "zero" or "clamped": amplitude 16 x^2 (1-x)^2
        double u0_amplitude = 1.0;
        double p0 = 1.0;              // p(x) = p0 + p1 cos(2 pi k x)
        double p1 = 0.0;
        double p_wavenumber = 1.0;
        std::string source = "none";  // "none" or "gaussian"
        double source_amplitude = 1.0;
        double source_center = 0.5;
        double source_width = 0.1;
        double source_omega = 1.0;
        double mass_tolerance = 1e-10;
    } solve;

    struct IdentityCfg {
        int functions = 100;
        int base_points = 20;
        std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1};
        double mu = 1.0;
        double x0 = -1.0;
        double T = 2.0;
        int localization_samples = 60;
        double tolerance = 1e-8;
    } identity;

    struct CarlemanCfg {
        std::vector<double> lambda_list;        // explicit lambdas; empty -> multipliers * C0 (T + T^2)
        std::vector<double> multipliers{1, 2, 4};
        double C0 = 0.0;                        // 0 -> calibrate
        std::vector<double> mu_list{1, 2};
        double x0 = -1.0;
        int calibrate_k_min = -40;
        int calibrate_k_max = 0;
        double max_spread = 10.0;
    } carleman;

    struct InverseCfg {
        double r = 0.0;  // 0 -> 0.9 min |u0|
        double m = 2.0;
        std::vector<double> epsilon_ladder{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
        double lambda_factor = 1e-6;  // lambda = lambda_factor * T^2, weights on horizon 2T
        double slope_tolerance = 0.15;
        double max_ratio_spread = 3.0;
        int bk_setups = 10;
        int bk_n_t = 400;
        double bk_T = 2e-4;
        double bk_max_gap = 0.05;
        double reg = 1e-3;
        double bump_amplitude = 0.5;
        double bump_center = 0.5;
        double bump_width = 0.1;
        double noise = 0.0;  // relative, smooth in time
        double fd_step = 1e-3;
        int max_iterations = 30;
        double max_rel_error = 0.05;
    } inverse;

    struct IoCfg {
        std::string output_dir = "out";
        int csv_precision = 10;
    } io;

    // Canonical JSON of the effective configuration.
    std::string canonical_json() const;
    // FNV-1a 64 of canonical_json(), 16 hex digits.
    std::string hash() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// ---- per-mode pipelines, shared by the tool and the acceptance suite --------

Grid config_grid(const ExperimentConfig& cfg);

struct SolveOutcome {
    SpaceTimeField u;
    BoundaryTrace traces;
    double mass_drift = 0.0;  // max_k |mass(k) - mass(0)| / mass(0), 0 for zero data
};
SolveOutcome solve_experiment(const ExperimentConfig& cfg);

VerificationSettings identity_settings(const ExperimentConfig& cfg);

struct SweepOutcome {
    Calibration calibration;  // found = false and C0 = configured value when not calibrated
    std::vector<double> lambdas;
    SweepResult sweep;
    // max over members and mu at the smallest lambda of |lhs_u - lhs_v| / (2 quadrature error)
    double vform_worst = 0.0;
};
SweepOutcome carleman_experiment(const ExperimentConfig& cfg);

struct StabilityOutcome {
    LadderResult ladder;
    std::vector<BKReport> bk;
    std::vector<double> bk_r;  // r used by each setup
};
// The shared inverse-problem data: p(x) = 1 + 0.3 cos(2 pi x), u0 = 16 x^2 (1-x)^2 (1 + 0.3 x).
InversionSetup ladder_setup(const ExperimentConfig& cfg);
// i-th random setup for the Im J check (seeded by cfg.seed and i).
InversionSetup bk_setup(const ExperimentConfig& cfg, int i);
StabilityOutcome stability_experiment(const ExperimentConfig& cfg);

struct ReconstructionOutcome {
    Potential p_init, q_true;
    ReconstructionResult result;
    double rel_error = 0.0;
    bool monotone = true;
};
ReconstructionOutcome reconstruct_experiment(const ExperimentConfig& cfg);

// Exit codes of the command-line tool.
enum ExitCode { kOk = 0, kConfigError = 2, kNumericalFailure = 3, kAcceptanceFailure = 4 };

struct RunResult {
    int exit_code = kOk;
    std::vector<std::string> files;  // written, relative to the output directory
    std::string summary;             // also written to summary.txt
};

// Runs cfg.mode, writing into out_dir (created if missing).  Numerical failures are
// reported through exit_code with the failing operation named in summary.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace schro4
