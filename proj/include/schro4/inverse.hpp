// Potential identification from boundary traces at x = 1:
//   i u_t + u_xxxx + p u = 0,  u(0) = u0,  u = u_x = 0 at x = 0, 1,
// observed through u_xx(t, 1) and u_xxx(t, 1).
#pragma once

#include <string>
#include <vector>

#include "schro4/identity.hpp"
#include "schro4/solver.hpp"
#include "schro4/weights.hpp"

namespace schro4 {

class HypothesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Realness { Real, Imaginary };  // u0 real, or i u0 real

struct InversionSetup {
    Potential p, q;
    std::vector<cplx> u0;  // interior nodes
    double r = 0.0;        // lower bound for |u0| on interior nodes
    double m = 0.0;        // bound for |p| and |q|
    Grid grid;
    CarlemanParams params;  // horizon must be 2 grid.T
    Realness realness = Realness::Real;

    // Throws HypothesisError naming the violated condition.
    void validate() const;
};

// Detects which realness branch u0 satisfies (tolerance 1e-12 relative to max |u0|).
// Throws HypothesisError if neither holds.
Realness detect_realness(const std::vector<cplx>& u0);

struct DifferenceSystem {
    SpaceTimeField y;   // u^p - u^q
    SpaceTimeField R;   // u^p
    std::vector<double> f;  // q - p
    double residual = 0.0;  // relative discrete residual of i y_t + y_xxxx + q y = f R
};
DifferenceSystem difference_system(const InversionSetup& s);

// Max over steps of |i (y^{k+1}-y^k)/dt + L_q (y^{k+1}+y^k)/2 - f (R^{k+1}+R^k)/2|,
// divided by max(1, max |L_q y|, max |f R|).  Zero for exact Crank-Nicolson pairs.
double difference_residual(const SpaceTimeField& y, const SpaceTimeField& R, const Potential& q,
                           const std::vector<double>& f);

struct Extended {
    SpaceTimeField y2;  // on (0, 2T), 2 n_t steps
    SpaceTimeField R2;
};
// y2(t) = s conj(y(T - t)) on (0, T) and y(t - T) on (T, 2T), s = +1 (Real) or -1 (Imaginary);
// R2 likewise.  Original t = 0 sits at extended index n_t.
Extended extend_and_shift(const SpaceTimeField& y, const SpaceTimeField& R, Realness branch);

// z(t) = y2_t(2T - t): centered differences inside, one-sided second order at both ends.
SpaceTimeField z_field(const SpaceTimeField& y2);

struct JValue {
    cplx J;             // multiplied by exp(-log_scale)
    double log_scale = 0.0;
};
// J = int_0^T int I1 conj(v) with v = theta z, weights on the horizon of z.  Midpoint rule
// in time (v_t = forward difference, everything else at t_{k+1/2}).
JValue j_functional(const SpaceTimeField& z, const CarlemanParams& params, PsiMode mode,
                    double log_scale, const std::vector<double>& psi_poly = {});
// max over interior nodes of 2 l(T_half, x), the scale used by j_functional.
double j_log_scale(const SpaceTimeField& z, const CarlemanParams& params);

struct BKReport {
    cplx J;
    double im_target = 0.0;    // (1/2) int e^{2l(T)} |f|^2 |R2(T)|^2, same scale as J
    double lower_bound = 0.0;  // (r^2/2) int e^{2l(T)} |f|^2
    double log_scale = 0.0;
    double terminal_error = 0.0;  // |z(T) + i f R2(T)| / |f R2(T)|
    double relative_gap() const;  // |Im J - im_target| / im_target
};
BKReport bk_identity(const InversionSetup& s, const DifferenceSystem& d, PsiMode mode = PsiMode::LxFourth);

// int |g|^2 + |g_t|^2 over (0, T): trapezoid rule, g_t by second-order differences.
double h1_norm_sq(const std::vector<cplx>& g, double dt);
// Sum of the H^1 norms of both series.
double trace_h1_norm(const BoundaryTrace& tr, double dt);
BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b);

struct StabilityReport {
    double f_norm_sq = 0.0;
    double trace_h1_sq = 0.0;
    double ratio = 0.0;
    cplx J;
    double imJ_lower_bound = 0.0;
    bool degenerate = false;
};
StabilityReport stability_ratio(const InversionSetup& s);

struct LadderRow {
    double epsilon = 0.0;
    StabilityReport report;
};
struct LadderResult {
    std::vector<LadderRow> rows;
    double slope = 0.0;         // log f_norm_sq against log trace_h1_sq
    double ratio_spread = 0.0;  // max ratio / min ratio
};
// q_eps = p + eps x^2 (1 - x)^2 for each eps.
LadderResult stability_ladder(const InversionSetup& base, const std::vector<double>& epsilons);

BoundaryTrace boundary_data(const std::vector<cplx>& u0, const Potential& q, const Grid& g);

// LineSearch: full Gauss-Newton step, halved until the misfit does not increase.
// Damped: Levenberg-Marquardt damping, adapted so that every accepted step decreases the misfit.
enum class StepControl { LineSearch, Damped };

struct ReconstructionOptions {
    StepControl control = StepControl::Damped;
    int max_iterations = 30;
    double fd_step = 1e-3;
    double rel_tolerance = 1e-24;   // stop when misfit <= rel_tolerance * |target|^2_H1
    double stall_tolerance = 1e-6;  // stop when an accepted step reduces misfit by less than this fraction
    double min_step = 1e-4;         // smallest line-search step length
    double rank_threshold = 1e-12;  // relative singular value cutoff of the undamped step
    double initial_damping = 1e-2;  // relative to trace(J^T J) / n
    double max_damping = 1e6;
};

struct ReconstructionStep {
    int iteration = 0;
    double misfit = 0.0;
    double step_length = 0.0;  // line-search step, or 1 for damped steps
    double damping = 0.0;
    double rel_error = -1.0;  // -1 when the true potential is not known
};

struct ReconstructionResult {
    Potential q;
    std::vector<ReconstructionStep> history;  // entry 0 is the initial guess
    bool converged = false;
    bool warning = false;  // iteration cap hit or no acceptable step
    std::string message;
};

ReconstructionResult reconstruct_potential(const BoundaryTrace& target, const std::vector<cplx>& u0,
                                           const Potential& p_init, double reg, const Grid& g,
                                           const ReconstructionOptions& opt = {},
                                           const Potential* q_true = nullptr);

// Misfit used by reconstruct_potential.
double reconstruction_misfit(const BoundaryTrace& target, const BoundaryTrace& model, const Potential& q,
                             const Potential& p_init, double reg, const Grid& g);

double relative_l2_error(const Potential& a, const Potential& ref);

}  // namespace schro4
