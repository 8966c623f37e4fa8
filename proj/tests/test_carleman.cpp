#include <doctest.h>

#include <cmath>
#include <numbers>

#include "schro4/carleman.hpp"

using namespace schro4;

namespace {

const cplx I(0, 1);
constexpr double kC0 = 7.450580596923828e-09;  // 2^-27, frozen by calibration

double bump(double x) { return x * x * (1 - x) * (1 - x); }
double p_star(double x) { return 1 + 0.5 * std::sin(std::numbers::pi * x); }

CarlemanParams params_at(double multiplier, double mu = 1.0, double T = 1.0) {
    CarlemanParams p;
    p.T = T;
    p.mu = mu;
    p.lambda = multiplier * kC0 * (T + T * T);
    return p;
}

SpaceTimeField sampled(const Grid& g, double w) {
    SpaceTimeField u(g);
    for (int k = 0; k <= g.n_t; ++k)
        for (int i = 0; i <= g.n_x + 1; ++i) {
            const double x = g.x(i), t = g.t(k);
            u(k, i) = std::exp(I * (w * t)) * bump(x) * (1.2 + 0.4 * x + 0.3 * std::sin(3 * x + t));
        }
    return u;
}

// discrete solution of i u_t + u_xxxx + p u = f with u = e^{it} x^2 (1-x)^2 as exact solution
SpaceTimeField manufactured(const Grid& g, const Potential& p) {
    const Source f = [&](double t, std::vector<cplx>& out) {
        for (int i = 0; i < g.n_x; ++i) {
            const double x = g.x(i + 1);
            out[static_cast<std::size_t>(i)] = std::exp(I * t) * (-bump(x) + 24.0 + p_star(x) * bump(x));
        }
    };
    std::vector<cplx> u0(static_cast<std::size_t>(g.n_x));
    for (int i = 0; i < g.n_x; ++i) u0[static_cast<std::size_t>(i)] = bump(g.x(i + 1));
    return solve(u0, p, g, f);
}

}  // namespace

TEST_CASE("zero field") {
    const Grid g(32, 40, 1.0);
    const CarlemanReport r = carleman_report(SpaceTimeField(g), params_at(1));
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs_source == 0.0);
    CHECK(r.rhs_boundary == 0.0);
    CHECK(r.degenerate);
}

TEST_CASE("weight horizon must match the field") {
    const Grid g(32, 40, 1.0);
    CHECK_THROWS_AS(carleman_report(sampled(g, 1.0), params_at(1, 1.0, 2.0)), DomainError);
}

TEST_CASE("end-node derivatives of a clamped quartic") {
    const Grid g(31, 8, 1.0);
    SpaceTimeField u(g);
    for (int k = 0; k <= g.n_t; ++k)
        for (int i = 0; i <= g.n_x + 1; ++i) u(k, i) = bump(g.x(i));
    const NodeDerivs d = node_derivatives(u, 3);
    const std::size_t N = static_cast<std::size_t>(g.n_x + 1);
    CHECK(d.d[0][0] == cplx(0));
    CHECK(d.d[1][N] == cplx(0));
    CHECK(std::abs(d.d[2][0] - 2.0) <= 1e-9);
    CHECK(std::abs(d.d[3][0] + 12.0) <= 1e-7);
    CHECK(std::abs(d.d[2][N] - 2.0) <= 1e-9);
    CHECK(std::abs(d.d[3][N] - 12.0) <= 1e-7);
    // fourth difference of a quartic is exact everywhere, ghosts included
    for (std::size_t j = 0; j <= N; ++j) CHECK(std::abs(d.d[4][j] - 24.0) <= 1e-5);
    // centered first difference at an interior node: error h^2 u'''/6
    const double x = g.x(10), h = g.dx();
    const double ux = 2 * x - 6 * x * x + 4 * x * x * x, uxxx = -12 + 24 * x;
    CHECK(std::abs(d.d[1][10].real() - (ux + h * h * uxxx / 6)) <= 1e-12);
}

TEST_CASE("homogeneity and nonnegativity") {
    const Grid g(32, 40, 1.0);
    const CarlemanParams p = params_at(2);
    const SpaceTimeField u = sampled(g, 1.5);
    SpaceTimeField v = u;
    const cplx c(-0.7, 2.1);
    for (auto& z : v.values) z *= c;
    const CarlemanReport a = carleman_report(u, p), b = carleman_report(v, p);
    CHECK(a.lhs > 0);
    CHECK(a.rhs_source > 0);
    CHECK(a.rhs_boundary > 0);
    CHECK(b.lhs == doctest::Approx(std::norm(c) * a.lhs).epsilon(1e-12));
    CHECK(b.rhs_source == doctest::Approx(std::norm(c) * a.rhs_source).epsilon(1e-12));
    CHECK(b.rhs_boundary == doctest::Approx(std::norm(c) * a.rhs_boundary).epsilon(1e-12));
    CHECK(b.ratio == doctest::Approx(a.ratio).epsilon(1e-12));
}

TEST_CASE("lhs converges under refinement at the floor") {
    const CarlemanParams p = params_at(1);
    const Grid coarse(63, 200, 1.0), fine(127, 400, 1.0);
    const SpaceTimeField uc = sampled(coarse, 1.0), uf = sampled(fine, 1.0);
    const double S = carleman_log_scale(coarse, p);
    CHECK(carleman_log_scale(fine, p) == S);
    const double a = carleman_lhs(uc, p, S), b = carleman_lhs(uf, p, S);
    MESSAGE("lhs " << a << " -> " << b);
    CHECK(std::abs(a - b) / b <= 0.02);
}

TEST_CASE("u-form and v-form of the lhs agree within twice the quadrature error") {
    const Grid g(64, 200, 1.0);
    for (double mu : {1.0, 2.0}) {
        const CarlemanParams p = params_at(1, mu);
        const SpaceTimeField u = sampled(g, 2.0);
        const double S = carleman_log_scale(g, p);
        const double a = carleman_lhs(u, p, S), b = carleman_lhs_vform(u, p, S);
        const double q = carleman_lhs_quadrature_error(u, p, S);
        CHECK(std::abs(a - b) <= 2 * q);
    }
    CHECK_THROWS_AS(carleman_lhs_quadrature_error(sampled(Grid(16, 41, 1.0), 1.0), params_at(1), 0.0), DomainError);
}

TEST_CASE("rhs_source of a discrete solution against the closed-form source") {
    const Grid g(64, 400, 1.0);
    const Potential pot = Potential::from_function(g, p_star);
    const SpaceTimeField u = manufactured(g, pot);
    const CarlemanParams p = params_at(1);
    const double S = carleman_log_scale(g, p);
    // free operator: P u = f - p u*,  with the potential: P_p u = f
    double free_ref = 0, full_ref = 0;
    for (int k = 1; k < g.n_t; ++k)
        for (int i = 1; i <= g.n_x; ++i) {
            const double x = g.x(i), w = std::exp(2 * ell(g.t(k), x, p) - S) * g.dx() * g.dt();
            const double f = -bump(x) + 24.0 + p_star(x) * bump(x);
            free_ref += w * std::pow(f - p_star(x) * bump(x), 2);
            full_ref += w * f * f;
        }
    const BoundaryTrace tr = extract_traces(u);
    const RhsParts a = carleman_rhs(u, nullptr, tr, p, S), b = carleman_rhs(u, &pot, tr, p, S);
    CHECK(a.source == doctest::Approx(free_ref).epsilon(0.01));
    CHECK(b.source == doctest::Approx(full_ref).epsilon(0.01));
    CHECK(a.boundary == b.boundary);
}

TEST_CASE("boundary term scales as lambda^3 and lambda with frozen weights") {
    const Grid g(32, 40, 1.0);
    const SpaceTimeField u = sampled(g, 1.0);
    const CarlemanParams p = params_at(4), p2 = params_at(8);
    const int k = 13;
    BoundaryTrace only_xx{std::vector<cplx>(41, 0.0), std::vector<cplx>(41, 0.0)};
    BoundaryTrace only_xxx = only_xx;
    only_xx.uxx[k] = cplx(1.5, -0.5);
    only_xxx.uxxx[k] = cplx(0.0, 4.0);
    const double S = carleman_log_scale(g, p);
    // theta^2 = e^{2 l} doubles its exponent with lambda; shift the scale to cancel it
    const double S2 = S + 2 * ell(g.t(k), 1.0, p);
    CHECK(carleman_rhs(u, nullptr, only_xx, p2, S2).boundary ==
          doctest::Approx(8 * carleman_rhs(u, nullptr, only_xx, p, S).boundary).epsilon(1e-12));
    CHECK(carleman_rhs(u, nullptr, only_xxx, p2, S2).boundary ==
          doctest::Approx(2 * carleman_rhs(u, nullptr, only_xxx, p, S).boundary).epsilon(1e-12));
}

TEST_CASE("input checks on the rhs") {
    const Grid g(32, 40, 1.0);
    const SpaceTimeField u = sampled(g, 1.0);
    const BoundaryTrace tr = extract_traces(u);
    const Potential bad = Potential::constant(31, 1.0);
    CHECK_THROWS_AS(carleman_rhs(u, &bad, tr, params_at(1), 0.0), DomainError);
    BoundaryTrace short_tr = tr;
    short_tr.uxx.pop_back();
    CHECK_THROWS_AS(carleman_rhs(u, nullptr, short_tr, params_at(1), 0.0), DomainError);
}

TEST_CASE("the test family") {
    const Grid g(32, 40, 1.0);
    const auto fam = carleman_family(g, 7);
    REQUIRE(fam.size() == 20);
    for (const auto& u : fam)
        for (int k = 0; k <= g.n_t; ++k) {
            CHECK(u(k, 0) == cplx(0));
            CHECK(u(k, g.n_x + 1) == cplx(0));
        }
    const auto again = carleman_family(g, 7);
    for (std::size_t m = 0; m < fam.size(); ++m) CHECK(fam[m].values == again[m].values);
    CHECK(carleman_family(g, 8)[0].values != fam[0].values);
}

TEST_CASE("sweep over a degenerate family flags every member") {
    const Grid g(16, 20, 1.0);
    const SweepResult r = constant_sweep({SpaceTimeField(g)}, {1e-6, 2e-6}, {1.0}, params_at(1));
    REQUIRE(r.summary.size() == 2);
    for (const auto& s : r.summary) CHECK(s.flagged == 1);
    for (const auto& row : r.rows) CHECK(row.report.degenerate);
}

TEST_CASE("sweep at and above the frozen floor") {
    const Grid g(64, 200, 1.0);
    const auto fam = carleman_family(g, 1);
    const CarlemanParams base = params_at(1);
    std::vector<double> lambdas;
    for (double m : {1.0, 2.0, 4.0}) lambdas.push_back(m * kC0 * 2.0);
    const SweepResult r = constant_sweep(fam, lambdas, {1.0, 2.0}, base);
    CHECK(r.all_finite);
    CHECK(r.rows.size() == 120);
    for (const auto& s : r.summary) {
        CHECK(s.flagged == 0);
        CHECK(std::isfinite(s.max_ratio));
    }
    MESSAGE("spread " << r.spread);
    CHECK(r.spread <= 10.0);

    SUBCASE("calibration lands on the frozen floor") {
        const Calibration c = calibrate_C0(fam, {1, 2, 4}, {1, 2}, base, 10.0, -29, -25);
        CHECK(c.found);
        CHECK(c.C0 == kC0);
    }
}
