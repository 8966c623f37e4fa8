// Both sides of the Carleman inequality for the free operator P u = i u_t + u_xxxx:
//
//   int_Q (l^7 m^8 phi^7 |u|^2 + l^5 m^6 phi^5 |u_x|^2 + l^3 m^4 phi^3 |u_xx|^2 + l m^2 phi |u_xxx|^2) theta^2
//     <= C ( int_Q theta^2 |P u|^2
//            + int_0^T (l^3 m^3 phi^3 theta^2 |u_xx|^2 + l m phi theta^2 |u_xxx|^2)(t, 1) dt )
//
// (l = lambda, m = mu).  theta^2 underflows for any realistic lambda, so every
// integral is reported multiplied by exp(-log_scale) with
// log_scale = max over the grid of 2 l(t, x).  Ratios do not depend on it.
#pragma once

#include <cstdint>
#include <vector>

#include "schro4/solver.hpp"
#include "schro4/weights.hpp"

namespace schro4 {

struct CarlemanReport {
    double lhs = 0.0;
    double rhs_source = 0.0;
    double rhs_boundary = 0.0;
    double ratio = 0.0;
    double log_scale = 0.0;
    bool degenerate = false;  // denominator is zero
    CarlemanParams params;
};

double carleman_log_scale(const Grid& g, const CarlemanParams& p);

// Spatial derivatives u, u_x, u_xx, u_xxx, u_xxxx at all n_x+2 nodes of time level k.
// Ghost values come from the clamped quintic fit through the four nodes next to each end.
// At the end nodes u = u_x = 0 exactly and u_xx, u_xxx are the fit's values (u_xxxx is the
// stencil value).
struct NodeDerivs {
    std::vector<cplx> d[5];
};
NodeDerivs node_derivatives(const SpaceTimeField& u, int k);

double carleman_lhs(const SpaceTimeField& u, const CarlemanParams& p, double log_scale);
// Same integral assembled from v = theta u and its x-derivatives.
double carleman_lhs_vform(const SpaceTimeField& u, const CarlemanParams& p, double log_scale);

struct RhsParts {
    double source = 0.0;
    double boundary = 0.0;
};
// `potential` null: free operator.  Otherwise i u_t + u_xxxx + p u.
// P u is taken at half steps, (i/dt)(u^{k+1} - u^k) + L (u^{k+1} + u^k)/2, which is the
// residual of the Crank-Nicolson scheme.
RhsParts carleman_rhs(const SpaceTimeField& u, const Potential* potential, const BoundaryTrace& tr,
                      const CarlemanParams& p, double log_scale);

CarlemanReport carleman_report(const SpaceTimeField& u, const CarlemanParams& p,
                               const Potential* potential = nullptr);

// Half-resolution trapezoid estimate of the quadrature error of carleman_lhs.
double carleman_lhs_quadrature_error(const SpaceTimeField& u, const CarlemanParams& p,
                                     double log_scale);

// The fixed test family: 10 manufactured fields and 10 solutions with random sources.
std::vector<SpaceTimeField> carleman_family(const Grid& g, std::uint64_t seed);

struct SweepRow {
    double lambda = 0.0, mu = 0.0;
    int member = 0;
    CarlemanReport report;
};
struct SweepSummaryRow {
    double lambda = 0.0, mu = 0.0;
    double max_ratio = 0.0, min_ratio = 0.0;
    int flagged = 0;
};
struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSummaryRow> summary;
    double spread = 0.0;  // max over summary of max_ratio / min over summary of max_ratio
    bool all_finite = true;
};

SweepResult constant_sweep(const std::vector<SpaceTimeField>& family, const std::vector<double>& lambdas,
                           const std::vector<double>& mus, const CarlemanParams& base);

struct Calibration {
    double C0 = 0.0;
    double spread = 0.0;
    bool found = false;
};
// Smallest C0 = 2^k, k in [k_min, k_max], whose sweep over lambda = m C0 (T + T^2),
// m in multipliers, has spread <= target.
Calibration calibrate_C0(const std::vector<SpaceTimeField>& family, const std::vector<double>& multipliers,
                         const std::vector<double>& mus, const CarlemanParams& base, double target,
                         int k_min, int k_max);

}  // namespace schro4
