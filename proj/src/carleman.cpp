#include "schro4/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace schro4 {

double carleman_log_scale(const Grid& g, const CarlemanParams& p) {
    p.validate();
    double S = -std::numeric_limits<double>::infinity();
    for (int k = 1; k < g.n_t; ++k)
        for (int i = 0; i <= g.n_x + 1; ++i) S = std::max(S, 2.0 * ell(g.t(k), g.x(i), p));
    return S;
}

namespace {

void check_horizon(const SpaceTimeField& u, const CarlemanParams& p) {
    if (std::abs(u.grid.T - p.T) > 1e-12 * p.T)
        throw DomainError("carleman: field horizon differs from weight horizon");
}

// Extended row e[j + 2] = u(k, j), with two ghosts per side.
std::vector<cplx> extended_row(const SpaceTimeField& u, int k) {
    const int n = u.nx();
    std::vector<cplx> e(static_cast<std::size_t>(n + 6));
    for (int j = 0; j <= n + 1; ++j) e[static_cast<std::size_t>(j + 2)] = u(k, j);
    const cplx left[4] = {u(k, 1), u(k, 2), u(k, 3), u(k, 4)};
    const cplx right[4] = {u(k, n), u(k, n - 1), u(k, n - 2), u(k, n - 3)};
    const auto bl = clamped_fit(left);
    const auto br = clamped_fit(right);
    auto eval = [](const std::array<cplx, 4>& b, double s) {
        return s * s * (b[0] + s * (b[1] + s * (b[2] + s * b[3])));
    };
    e[1] = eval(bl, -1.0);
    e[0] = eval(bl, -2.0);
    e[static_cast<std::size_t>(n + 4)] = eval(br, -1.0);
    e[static_cast<std::size_t>(n + 5)] = eval(br, -2.0);
    return e;
}

double trapezoid_x(int j, int n, double dx) { return (j == 0 || j == n + 1) ? 0.5 * dx : dx; }

struct LhsLogs {
    double c[4];
};

// log of the four LHS coefficients lambda^a mu^b phi^a.
LhsLogs lhs_logs(double t, double x, const CarlemanParams& p) {
    const double lphi = std::log(p.lambda * varphi(t, x, p));
    const double lm = std::log(p.mu);
    return {{7 * lphi + 8 * lm, 5 * lphi + 6 * lm, 3 * lphi + 4 * lm, lphi + 2 * lm}};
}

double lhs_on(const SpaceTimeField& u, const CarlemanParams& p, double S, int kstride) {
    const Grid& g = u.grid;
    const int n = g.n_x;
    double total = 0.0;
    for (int k = kstride; k < g.n_t; k += kstride) {
        const NodeDerivs d = node_derivatives(u, k);
        const double t = g.t(k);
        double row = 0.0;
        for (int j = 0; j <= n + 1; ++j) {
            const double x = g.x(j);
            const double l2 = 2.0 * ell(t, x, p) - S;
            const LhsLogs L = lhs_logs(t, x, p);
            double s = 0.0;
            for (int m = 0; m < 4; ++m)
                s += std::exp(l2 + L.c[m]) * std::norm(d.d[m][static_cast<std::size_t>(j)]);
            row += trapezoid_x(j, n, g.dx()) * s;
        }
        total += row * g.dt() * kstride;
    }
    return total;
}

}  // namespace

NodeDerivs node_derivatives(const SpaceTimeField& u, int k) {
    const int n = u.nx();
    const double h = u.grid.dx();
    const std::vector<cplx> e = extended_row(u, k);
    NodeDerivs d;
    for (auto& v : d.d) v.resize(static_cast<std::size_t>(n + 2));
    for (int j = 0; j <= n + 1; ++j) {
        const auto c = static_cast<std::size_t>(j + 2);
        const auto J = static_cast<std::size_t>(j);
        d.d[0][J] = e[c];
        d.d[1][J] = (e[c + 1] - e[c - 1]) / (2 * h);
        d.d[2][J] = (e[c + 1] - 2.0 * e[c] + e[c - 1]) / (h * h);
        d.d[3][J] = (e[c + 2] - 2.0 * e[c + 1] + 2.0 * e[c - 1] - e[c - 2]) / (2 * h * h * h);
        d.d[4][J] = (e[c + 2] - 4.0 * e[c + 1] + 6.0 * e[c] - 4.0 * e[c - 1] + e[c - 2]) / (h * h * h * h);
    }
    // End nodes: exact clamped values, second and third derivatives from the fit.
    const cplx left[4] = {u(k, 1), u(k, 2), u(k, 3), u(k, 4)};
    const cplx right[4] = {u(k, n), u(k, n - 1), u(k, n - 2), u(k, n - 3)};
    const auto bl = clamped_fit(left);
    const auto br = clamped_fit(right);
    const auto N = static_cast<std::size_t>(n + 1);
    for (int m = 0; m < 2; ++m) d.d[m][0] = d.d[m][N] = 0.0;
    d.d[2][0] = 2.0 * bl[0] / (h * h);
    d.d[3][0] = 6.0 * bl[1] / (h * h * h);
    d.d[2][N] = 2.0 * br[0] / (h * h);
    d.d[3][N] = -6.0 * br[1] / (h * h * h);
    return d;
}

double carleman_lhs(const SpaceTimeField& u, const CarlemanParams& p, double log_scale) {
    check_horizon(u, p);
    return lhs_on(u, p, log_scale, 1);
}

double carleman_lhs_quadrature_error(const SpaceTimeField& u, const CarlemanParams& p, double log_scale) {
    check_horizon(u, p);
    if (u.nt() % 2 != 0) throw DomainError("quadrature error estimate needs an even n_t");
    return std::abs(lhs_on(u, p, log_scale, 1) - lhs_on(u, p, log_scale, 2)) / 3.0;
}

double carleman_lhs_vform(const SpaceTimeField& u, const CarlemanParams& p, double log_scale) {
    check_horizon(u, p);
    const Grid& g = u.grid;
    const int n = g.n_x;
    double total = 0.0;
    for (int k = 1; k < g.n_t; ++k) {
        const NodeDerivs d = node_derivatives(u, k);
        const double t = g.t(k);
        double row = 0.0;
        for (int j = 0; j <= n + 1; ++j) {
            const auto J = static_cast<std::size_t>(j);
            const double x = g.x(j);
            const WeightJet w = weight_jet(t, x, p, 3, 0);
            // v = e^{l - l(t,x)} u, so v and its derivatives are O(|u|) at the node.
            const RJet lhat = w.l - w.l.value();
            const RJet E = jet_exp(lhat);
            cplx v[4];
            for (int m = 0; m < 4; ++m) {
                v[m] = 0.0;
                for (int i = 0; i <= m; ++i)
                    v[m] += E.derivative(i, 0) * std::tgamma(m + 1.0) /
                            (std::tgamma(i + 1.0) * std::tgamma(m - i + 1.0)) * d.d[m - i][J];
            }
            const double lx = w.l.derivative(1, 0), lxx = w.l.derivative(2, 0), lxxx = w.l.derivative(3, 0);
            const cplx w0 = v[0];
            const cplx w1 = v[1] - lx * v[0];
            const cplx w2 = v[2] - 2.0 * lx * v[1] + (lx * lx - lxx) * v[0];
            const cplx w3 = v[3] - 3.0 * lx * v[2] + 3.0 * (lx * lx - lxx) * v[1] -
                            (lx * lx * lx - 3.0 * lx * lxx + lxxx) * v[0];
            const double l2 = 2.0 * w.l.value() - log_scale;
            const LhsLogs L = lhs_logs(t, x, p);
            const double s = std::exp(l2 + L.c[0]) * std::norm(w0) + std::exp(l2 + L.c[1]) * std::norm(w1) +
                             std::exp(l2 + L.c[2]) * std::norm(w2) + std::exp(l2 + L.c[3]) * std::norm(w3);
            row += trapezoid_x(j, n, g.dx()) * s;
        }
        total += row * g.dt();
    }
    return total;
}

RhsParts carleman_rhs(const SpaceTimeField& u, const Potential* potential, const BoundaryTrace& tr,
                      const CarlemanParams& p, double log_scale) {
    check_horizon(u, p);
    const Grid& g = u.grid;
    const int n = g.n_x;
    if (potential && static_cast<int>(potential->values.size()) != n)
        throw DomainError("carleman_rhs: potential length mismatch");
    if (static_cast<int>(tr.uxx.size()) != g.n_t + 1 || static_cast<int>(tr.uxxx.size()) != g.n_t + 1)
        throw DomainError("carleman_rhs: trace length mismatch");
    const Generator L = assemble_generator(g, potential ? *potential : Potential::constant(n, 0.0));
    const cplx I(0, 1);
    RhsParts r;
    for (int k = 0; k < g.n_t; ++k) {
        const double tm = g.t(k) + 0.5 * g.dt();
        std::vector<cplx> um(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) um[static_cast<std::size_t>(i - 1)] = 0.5 * (u(k, i) + u(k + 1, i));
        const std::vector<cplx> Lu = L.apply(um);
        double row = 0.0;
        for (int i = 1; i <= n; ++i) {
            const cplx ut = (u(k + 1, i) - u(k, i)) / g.dt();
            const cplx Pu = I * ut + Lu[static_cast<std::size_t>(i - 1)];
            row += std::exp(2.0 * ell(tm, g.x(i), p) - log_scale) * std::norm(Pu);
        }
        r.source += row * g.dx() * g.dt();
        if (k == 0) continue;
        const double t = g.t(k);
        const double lphi = std::log(p.lambda * varphi(t, 1.0, p));
        const double lm = std::log(p.mu);
        const double l2 = 2.0 * ell(t, 1.0, p) - log_scale;
        const auto K = static_cast<std::size_t>(k);
        r.boundary += (std::exp(l2 + 3 * lphi + 3 * lm) * std::norm(tr.uxx[K]) +
                       std::exp(l2 + lphi + lm) * std::norm(tr.uxxx[K])) *
                      g.dt();
    }
    return r;
}

CarlemanReport carleman_report(const SpaceTimeField& u, const CarlemanParams& p, const Potential* potential) {
    CarlemanReport rep;
    rep.params = p;
    rep.log_scale = carleman_log_scale(u.grid, p);
    rep.lhs = carleman_lhs(u, p, rep.log_scale);
    const RhsParts r = carleman_rhs(u, potential, extract_traces(u), p, rep.log_scale);
    rep.rhs_source = r.source;
    rep.rhs_boundary = r.boundary;
    const double den = r.source + r.boundary;
    rep.degenerate = !(den > 0.0);
    rep.ratio = rep.degenerate ? 0.0 : rep.lhs / den;
    return rep;
}

std::vector<SpaceTimeField> carleman_family(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<SpaceTimeField> fam;
    const cplx I(0, 1);
    for (int m = 0; m < 10; ++m) {
        const double w = unif(0.5, 3.0), a = unif(0.5, 2.0), b = unif(-1.0, 1.0);
        SpaceTimeField u(g);
        for (int k = 0; k <= g.n_t; ++k) {
            const double t = g.t(k);
            for (int i = 0; i <= g.n_x + 1; ++i) {
                const double x = g.x(i);
                u(k, i) = std::exp(I * (w * t)) * (x * x * (1 - x) * (1 - x)) * (a + b * x + 0.3 * std::sin(3 * x + t));
            }
        }
        fam.push_back(std::move(u));
    }
    const Potential pot = Potential::from_function(g, [](double x) { return 1.0 + 0.5 * std::sin(M_PI * x); });
    for (int m = 0; m < 10; ++m) {
        double c[3], om[3];
        cplx amp[3];
        for (int j = 0; j < 3; ++j) c[j] = unif(0.2, 0.8);
        for (int j = 0; j < 3; ++j) {
            const double re = normal(rng);
            amp[j] = cplx(re, normal(rng));
        }
        for (int j = 0; j < 3; ++j) om[j] = unif(0.0, 4.0);
        Source f = [=, &g](double t, std::vector<cplx>& out) {
            for (int i = 0; i < g.n_x; ++i) {
                const double x = g.x(i + 1);
                cplx s = 0.0;
                for (int j = 0; j < 3; ++j) {
                    const double z = (x - c[j]) / 0.1;
                    s += amp[j] * std::exp(-z * z) * std::cos(om[j] * t);
                }
                out[static_cast<std::size_t>(i)] = s;
            }
        };
        fam.push_back(solve(std::vector<cplx>(static_cast<std::size_t>(g.n_x), 0.0), pot, g, f));
    }
    return fam;
}

SweepResult constant_sweep(const std::vector<SpaceTimeField>& family, const std::vector<double>& lambdas,
                           const std::vector<double>& mus, const CarlemanParams& base) {
    SweepResult res;
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (double mu : mus)
        for (double lambda : lambdas) {
            CarlemanParams p = base;
            p.lambda = lambda;
            p.mu = mu;
            SweepSummaryRow s;
            s.lambda = lambda;
            s.mu = mu;
            s.min_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < family.size(); ++m) {
                SweepRow row;
                row.lambda = lambda;
                row.mu = mu;
                row.member = static_cast<int>(m);
                row.report = carleman_report(family[m], p);
                const auto& r = row.report;
                if (!std::isfinite(r.lhs) || !std::isfinite(r.rhs_source) || !std::isfinite(r.rhs_boundary))
                    res.all_finite = false;
                if (r.degenerate) {
                    ++s.flagged;
                } else {
                    s.max_ratio = std::max(s.max_ratio, r.ratio);
                    s.min_ratio = std::min(s.min_ratio, r.ratio);
                }
                res.rows.push_back(row);
            }
            if (s.flagged == static_cast<int>(family.size())) s.min_ratio = 0.0;
            hi = std::max(hi, s.max_ratio);
            lo = std::min(lo, s.max_ratio);
            res.summary.push_back(s);
        }
    res.spread = (lo > 0.0 && std::isfinite(lo)) ? hi / lo : std::numeric_limits<double>::infinity();
    return res;
}

Calibration calibrate_C0(const std::vector<SpaceTimeField>& family, const std::vector<double>& multipliers,
                         const std::vector<double>& mus, const CarlemanParams& base, double target, int k_min,
                         int k_max) {
    Calibration c;
    for (int k = k_min; k <= k_max; ++k) {
        const double C0 = std::ldexp(1.0, k);
        std::vector<double> lambdas;
        for (double m : multipliers) lambdas.push_back(m * C0 * (base.T + base.T * base.T));
        const SweepResult r = constant_sweep(family, lambdas, mus, base);
        c.C0 = C0;
        c.spread = r.spread;
        if (r.all_finite && r.spread <= target) {
            c.found = true;
            return c;
        }
    }
    return c;
}

}  // namespace schro4
