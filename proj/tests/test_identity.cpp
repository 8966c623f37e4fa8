#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle/expander.hpp"
#include "schro4/identity.hpp"

using namespace schro4;

namespace {

// Weight jet whose l is the given polynomial in (x - x_b); used for synthetic coefficient checks.
WeightJet synthetic_weight(const std::vector<double>& taylor, double t = 1.0, double x = 0.5) {
    WeightJet w;
    w.t = t;
    w.x = x;
    w.l = RJet(8, 2, t, x);
    for (std::size_t j = 0; j < taylor.size(); ++j) w.l.at(static_cast<int>(j), 0) = taylor[j];
    w.varphi = w.l.like(1.0);
    w.theta = std::exp(w.l.value());
    return w;
}

CJet random_u(std::mt19937_64& g, double t, double x) {
    std::uniform_real_distribution<double> U(-1, 1);
    TestFunctionSpec s;
    for (int i = 0; i < 10; ++i) {
        const double re = U(g);
        s.poly.emplace_back(re, U(g));
    }
    s.alpha = U(g);
    s.beta = U(g);
    return test_function_jet(s, t, x);
}

// u with v = theta u equal to the given v jet (theta normalised to 1 at the base point).
CJet u_from_v(const CJet& v, const WeightJet& w) {
    const RJet lhat = w.l - w.l.value();
    return jet_exp(-1.0 * lhat).cast<cplx>() * v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("coefficients on a synthetic weight with l_x = 2, l_xx = 1") {
    const WeightJet w = synthetic_weight({0.0, 2.0, 0.5});
    const CoefficientSet c = coefficients(w, w.l.like(0.0));
    CHECK(c.a0.value() == doctest::Approx(-5));
    CHECK(c.a1.value() == doctest::Approx(-8));
    CHECK(c.a2.value() == doctest::Approx(18));
    CHECK(c.a3.value() == doctest::Approx(-8));
    CHECK(c.a0_tilde.value() == doctest::Approx(13));
    CHECK(c.C24.value() == doctest::Approx(104));
    CHECK(c.C41.value() == doctest::Approx(-18));
}

TEST_CASE("coefficients vanish for the zero weight") {
    const WeightJet w = synthetic_weight({});
    RJet Psi = w.l.like(0.0);
    Psi.at(0, 0) = 0.7;
    Psi.at(2, 0) = -0.2;
    const CoefficientSet c = coefficients(w, Psi);
    for (const RJet* j : {&c.a0, &c.a1, &c.a2, &c.a3, &c.C24, &c.C41}) CHECK(j->max_abs() == 0.0);
    CHECK(c.a0_tilde.value() == -0.7);
    CHECK(c.a0_tilde.at(2, 0) == 0.2);
}

TEST_CASE("coefficients require x-order 8") {
    CarlemanParams p;
    const WeightJet w = weight_jet(1.0, 0.5, p, 7, 2);
    CHECK_THROWS_AS(coefficients(w, w.l.like(0.0)), JetError);
}

TEST_CASE("coefficient definitions against the weight jet") {
    CarlemanParams p;
    p.lambda = 0.05;
    const WeightJet w = weight_jet(0.8, 0.3, p);
    const CoefficientSet c = coefficients(w, make_psi(PsiMode::LxFourth, w));
    const double l1 = w.l.derivative(1, 0), l2 = w.l.derivative(2, 0), l3 = w.l.derivative(3, 0),
                 l4 = w.l.derivative(4, 0);
    CHECK(rel(c.a3.value(), -4 * l1) < 1e-14);
    CHECK(rel(c.a2.value(), 6 * (l1 * l1 - l2)) < 1e-14);
    CHECK(rel(c.a1.value(), -4 * (l1 * l1 * l1 - 3 * l1 * l2 + l3)) < 1e-14);
    CHECK(rel(c.a0.value(), std::pow(l1, 4) - 6 * l1 * l1 * l2 + 3 * l2 * l2 + 4 * l1 * l3 - l4) < 1e-13);
    CHECK(rel(c.C41.value(), -6 * l1 * l1 * l2 + 6 * l1 * l3 + 6 * l2 * l2 - l4) < 1e-13);
    CHECK(rel(c.Psi.value(), std::pow(l1, 4)) < 1e-14);
}

TEST_CASE("both forms of a0~ and C24 agree on random weights") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> V(0, 1);
    double worst = 0;
    for (int rep = 0; rep < 100; ++rep) {
        CarlemanParams p;
        p.lambda = std::pow(10.0, -4 + 4 * V(g));
        p.mu = 0.5 + V(g);
        const WeightJet w = weight_jet(p.T * (0.05 + 0.9 * V(g)), V(g), p);
        const RJet Psi = make_psi(rep % 2 ? PsiMode::LxFourth : PsiMode::Polynomial, w, {V(g), V(g), V(g)});
        const CoefficientSet c = coefficients(w, Psi);
        const double a = c.a0_tilde.value(), b = a0_tilde_by_reduction(c).value();
        const double C = c.C24.value(), D = C24_by_reduction(c).value();
        const double sa = std::max({1.0, std::abs(c.a0.value()), std::abs(c.Psi.value())});
        worst = std::max(worst, std::abs(a - b) / sa);
        worst = std::max(worst, std::abs(C - D) / (sa * std::max(1.0, std::abs(c.a3.value()))));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("split_terms") {
    CarlemanParams p;
    p.lambda = 0.01;
    const WeightJet w = weight_jet(0.9, 0.6, p);
    const RJet Psi = make_psi(PsiMode::LxFourth, w);
    const CoefficientSet c = coefficients(w, Psi);

    SUBCASE("zero u gives zero terms") {
        const IdentityTerms T = split_terms(CJet(5, 2, w.t, w.x), w, c);
        CHECK(T.I1 == cplx(0));
        CHECK(T.I2 == cplx(0));
        CHECK(T.A.max_abs() == 0.0);
        CHECK(T.B.max_abs() == 0.0);
        CHECK(T.lhs == cplx(0));
        CHECK(T.rhs == cplx(0));
        CHECK(identity_residual(CJet(5, 2, w.t, w.x), w, Psi) == 0.0);
    }
    SUBCASE("I1 + I2 reproduces theta P u") {
        std::mt19937_64 g(12);
        for (int rep = 0; rep < 20; ++rep) {
            const IdentityTerms T = split_terms(random_u(g, w.t, w.x), w, c);
            CHECK(std::abs(T.I1 + T.I2 - T.theta_Pu) <= 1e-12 * (1.0 + std::abs(T.I1) + std::abs(T.I2)));
        }
    }
    SUBCASE("D against closed-form derivatives of the weight") {
        // l = lambda (E(x) - K) g(t) with E = e^{a s^2}, s = x - x0, a = 3 mu, g = 1 / (t (T - t))
        const double a = 3 * p.mu, s = w.x - p.x0, E = std::exp(a * s * s), t = w.t, T = p.T;
        const double g0 = 1 / (t * (T - t)), g1 = -(T - 2 * t) * g0 * g0;
        const double E1 = 2 * a * s * E, E2 = (2 * a + 4 * a * a * s * s) * E,
                     E3 = (12 * a * a * s + 8 * a * a * a * s * s * s) * E;
        const double L = p.lambda;
        const double lx = L * E1 * g0, lxx = L * E2 * g0, lxxx = L * E3 * g0, lt = L * (E - p.offset()) * g1,
                     lxt = L * E1 * g1, lxxt = L * E2 * g1, lxxxt = L * E3 * g1;
        const double d = 6 * lx * lx * lxt + 6 * lx * lxx * lt - 6 * lxx * lxt - 3 * lx * lxxt - 3 * lt * lxxx + lxxxt;
        std::mt19937_64 g(13);
        const IdentityTerms terms = split_terms(random_u(g, w.t, w.x), w, c);
        CHECK(terms.D.real() == 0.0);
        CHECK(terms.D.imag() == doctest::Approx(2 * d).epsilon(1e-10));
    }
    SUBCASE("unweighted limit") {
        const WeightJet w0 = synthetic_weight({}, 0.9, 0.6);
        const CoefficientSet c0 = coefficients(w0, w0.l.like(0.0));
        std::mt19937_64 g(14);
        const CJet u = random_u(g, w0.t, w0.x);
        const IdentityTerms T = split_terms(u, w0, c0);
        CHECK(T.I1 == cplx(0, 1) * u.derivative(0, 1) + u.derivative(4, 0));
        CHECK(T.I2 == cplx(0));
        CHECK(T.B.max_abs() == 0.0);
    }
    SUBCASE("orders and base points are checked") {
        CHECK_THROWS_AS(split_terms(CJet(4, 2, w.t, w.x), w, c), JetError);
        CHECK_THROWS_AS(split_terms(CJet(5, 1, w.t, w.x), w, c), JetError);
        CHECK_THROWS_AS(split_terms(CJet(5, 2, w.t, 0.1), w, c), JetError);
    }
}

TEST_CASE("identity_residual") {
    SUBCASE("zero weight and zero Psi close exactly") {
        std::mt19937_64 g(15);
        for (int rep = 0; rep < 10; ++rep) {
            const WeightJet w0 = synthetic_weight({}, 0.5, 0.25);
            CHECK(identity_residual(random_u(g, 0.5, 0.25), w0, w0.l.like(0.0)) == 0.0);
        }
    }
    SUBCASE("v identically one") {
        CarlemanParams p;
        p.lambda = 0.003;
        for (double x : {0.0, 0.4, 1.0}) {
            const WeightJet w = weight_jet(1.3, x, p);
            const CJet v = CJet::constant(1.0, 5, 2, w.t, w.x);
            for (PsiMode m : {PsiMode::Zero, PsiMode::LxFourth}) {
                const RJet Psi = make_psi(m, w);
                CHECK(identity_residual(u_from_v(v, w), w, Psi) <= 1e-9);
            }
        }
    }
    SUBCASE("scaling by a complex constant") {
        CarlemanParams p;
        p.lambda = 0.02;
        const WeightJet w = weight_jet(0.4, 0.7, p);
        const RJet Psi = make_psi(PsiMode::LxFourth, w);
        const CoefficientSet c = coefficients(w, Psi);
        std::mt19937_64 g(16);
        const CJet u = random_u(g, w.t, w.x);
        const cplx k(0.3, -1.7);
        const IdentityTerms T1 = split_terms(u, w, c), T2 = split_terms(k * u, w, c);
        CHECK(std::abs(T2.lhs - std::norm(k) * T1.lhs) <= 1e-12 * std::abs(T2.lhs));
        CHECK(std::abs(T2.rhs - std::norm(k) * T1.rhs) <= 1e-12 * std::abs(T2.rhs));
    }
    SUBCASE("both sides are real") {
        CarlemanParams p;
        p.lambda = 0.1;
        std::mt19937_64 g(17);
        for (int rep = 0; rep < 20; ++rep) {
            const WeightJet w = weight_jet(0.2 + 0.08 * rep, 0.05 * rep, p);
            const IdentityTerms T = split_terms(random_u(g, w.t, w.x), w, coefficients(w, make_psi(PsiMode::Zero, w)));
            CHECK(std::abs(T.lhs.imag()) <= 1e-10 * std::max(1.0, std::abs(T.lhs)));
            CHECK(std::abs(T.rhs.imag()) <= 1e-10 * std::max(1.0, std::abs(T.rhs)));
        }
    }
    SUBCASE("published form does not close") {
        CarlemanParams p;
        p.lambda = 0.01;
        const WeightJet w = weight_jet(0.9, 0.6, p);
        std::mt19937_64 g(18);
        const CJet u = random_u(g, w.t, w.x);
        const RJet Psi = make_psi(PsiMode::LxFourth, w);
        CHECK(identity_residual(u, w, Psi, IdentityVariant::Published) > 1e-3);
        CHECK(identity_residual(u, w, Psi, IdentityVariant::Corrected) <= 1e-10);
    }
}

namespace {

using oracle::LinForm;
using oracle::Mono;

CJet cj(const RJet& r) { return r.cast<cplx>(); }

double canonical_size(const oracle::Canonical& c) {
    double m = 0;
    for (auto& [k, d] : c.diag) m = std::max(m, std::abs(d));
    for (auto& [k, n] : c.antisym) m = std::max(m, std::abs(n));
    for (auto& [k, z] : c.time_left) m = std::max(m, std::abs(z));
    return m;
}

struct OracleCase {
    oracle::Canonical defect;  // canonical form of (lhs - rhs) with the flux removed
    double scale = 1.0;
};

// Expands every non-divergence term of the identity as a Hermitian form in the v-jet and
// reduces it modulo total derivatives.  The flux A and B never enter.
OracleCase expand(const WeightJet& w, const RJet& Psi, double alpha_vxx, double alpha_v0) {
    const CoefficientSet c = coefficients(w, Psi);
    const cplx I(0, 1);
    const RJet lx = w.l.dx(1), lxx = w.l.dx(2), lxxx = w.l.dx(3), lxxxx = w.l.dx(4), lt = w.l.dt(1),
               lxt = w.l.d(1, 1), lxxt = w.l.d(2, 1), lxxxt = w.l.d(3, 1), ltt = w.l.dt(2);
    const RJet &a0 = c.a0, &a1 = c.a1, &a2 = c.a2, &a3 = c.a3, &at0 = c.a0_tilde, &C24 = c.C24, &C41 = c.C41;
    const RJet one = w.l.like(1.0);
    const RJet a0mP = a0 - Psi, a3x = a3.dx(1), Q = 1.5 * a3x * a0 - a2 * at0;

    const LinForm I1{{I * cj(one), {0, 1}}, {cj(Psi), {0, 0}}, {cj(a2), {2, 0}}, {cj(one), {4, 0}}};
    const LinForm I2{{(-I) * cj(lt), {0, 0}}, {cj(a0mP), {0, 0}}, {cj(a1), {1, 0}}, {cj(a3), {3, 0}}};
    LinForm Pu = I1;
    Pu.insert(Pu.end(), I2.begin(), I2.end());
    auto scaled = [](LinForm f, const RJet& s) {
        for (auto& t : f) t.c = t.c * s.cast<cplx>();
        return f;
    };

    oracle::Form F;
    F.add_product(I1, I2);
    F.add_product(scaled(Pu, -1.0 * at0), {{cj(one), {0, 0}}});
    F.add_product(scaled(Pu, -6.0 * lxx), {{cj(one), {2, 0}}});

    const RJet D = 2.0 * (6.0 * lx * lx * lxt + 6.0 * lx * lxx * lt - 6.0 * lxx * lxt - 3.0 * lx * lxxt -
                          3.0 * lt * lxxx + lxxxt);
    F.add((-I) * cj(D), {0, 0}, {1, 0});
    F.add((-6.0 * I) * cj(lt * lxx), {0, 0}, {2, 0});
    F.add((-4.0 * I) * cj(lxt), {2, 0}, {1, 0});

    const RJet vxxx2 = 16.0 * lxx;
    const RJet vxx2 = 24.0 * lx * lx * lxx - 24.0 * lx * lxxx + 48.0 * lxx * lxx - 20.0 * lxxxx +
                      alpha_vxx * (a2 * a3).dx(1);
    const RJet vx2 = -1.0 * (a1 * a2).dx(1) - 2.0 * a0mP * a2 - 4.0 * C41.dx(2) + 3.0 * C24.dx(1) - a1.dx(3) -
                     1.5 * (a3x * a1).dx(1) - 3.0 * a3x * a0 + 2.0 * a2 * at0;
    const RJet v02 = 2.0 * a0mP * Psi - (a1 * Psi).dx(1) - 2.0 * a0 * at0 - C24.dx(3) + (a0mP * a2).dx(2) -
                     (a1 * at0).dx(1) + Q.dx(2) + C41.dx(4) + ltt + alpha_v0 * 2.0 * (a1 * at0).dx(1);
    F.add_diag(cj(-1.0 * vxxx2), 3);
    F.add_diag(cj(-1.0 * vxx2), 2);
    F.add_diag(cj(-1.0 * vx2), 1);
    F.add_diag(cj(-1.0 * v02), 0);

    OracleCase out;
    out.defect = F.reduce();
    out.scale = std::max({1.0, std::abs(v02.value()), std::abs(vx2.value()), std::abs(vxx2.value()),
                          std::abs(a0.value() * a0.value())});
    return out;
}

}  // namespace

TEST_CASE("expansion oracle sanity") {
    const RJet one = RJet::constant(1.0, 6, 2, 0.5, 0.5);
    const RJet X = RJet::var_x(6, 2, 0.5, 0.5);
    SUBCASE("total x-derivative reduces to zero") {
        oracle::Form F;
        F.add(cj(X * X), {2, 0}, {0, 0});       // x^2 (v_xx vbar + cc)
        F.add(cj(2.0 * X), {1, 0}, {0, 0});     // 2x (v_x vbar + cc)
        F.add(cj(X * X), {1, 0}, {1, 0});       // 2 x^2 |v_x|^2
        // together: d_x [x^2 (v_x vbar + cc)]
        CHECK(canonical_size(F.reduce()) <= 1e-14);
    }
    SUBCASE("total t-derivative reduces to zero") {
        oracle::Form F;
        F.add(cj(one), {0, 1}, {1, 0});
        F.add(cj(one), {1, 1}, {0, 0});
        CHECK(canonical_size(F.reduce()) <= 1e-14);
    }
    SUBCASE("i (v_t vbar - cc) is irreducible") {
        oracle::Form F;
        F.add(cplx(0, 1) * cj(one), {0, 1}, {0, 0});
        const auto c = F.reduce();
        CHECK(canonical_size(c) > 0.5);
        REQUIRE(c.time_left.count(0) == 1);
        CHECK(std::abs(c.time_left.at(0) - cplx(0, 1)) <= 1e-14);
    }
    SUBCASE("a non-divergence diagonal term survives") {
        oracle::Form F;
        F.add_diag(cj(one), 2);
        CHECK(F.reduce().diag.at(2) == doctest::Approx(1.0));
    }
}

TEST_CASE("right-hand side blocks agree with the oracle expansion modulo divergences") {
    CarlemanParams p;
    struct Pt {
        double lambda, t, x;
        PsiMode mode;
    };
    for (const Pt& pt : {Pt{0.01, 0.9, 0.6, PsiMode::Zero}, Pt{0.003, 1.4, 0.2, PsiMode::LxFourth},
                         Pt{0.05, 0.5, 0.95, PsiMode::Polynomial}}) {
        CAPTURE(pt.x);
        p.lambda = pt.lambda;
        const WeightJet w = weight_jet(pt.t, pt.x, p, 16, 4);
        const RJet Psi = make_psi(pt.mode, w, {0.3, -0.5, 0.2, 0.1});
        const OracleCase corrected = expand(w, Psi, 1.0, 1.0);
        CHECK(canonical_size(corrected.defect) <= 1e-10 * corrected.scale);

        const OracleCase published = expand(w, Psi, 0.0, 0.0);
        CHECK(canonical_size(published.defect) > 1e-6 * published.scale);
        // the published defect sits in the |v_xx|^2 and |v|^2 blocks only
        for (auto& [k, d] : published.defect.diag)
            if (k != 0 && k != 2) CHECK(std::abs(d) <= 1e-10 * published.scale);
        for (auto& [k, n] : published.defect.antisym) CHECK(std::abs(n) <= 1e-10 * published.scale);
        for (auto& [k, z] : published.defect.time_left) CHECK(std::abs(z) <= 1e-10 * published.scale);
    }
}

TEST_CASE("seeded verification over the random family") {
    VerificationSettings s;
    const VerificationResult r = verify_identity(s);
    CHECK(r.rows.size() == 2000);
    CHECK(r.max_corrected <= 1e-8);
    CHECK(r.max_published > 1e-3);
    const LocalizationReport& L = r.localization;
    CHECK(L.active.size() == static_cast<std::size_t>(kNumCorrections));
    for (double a : L.fitted) CHECK(a == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(L.refit_max_residual <= 1e-8);
    CHECK_FALSE(L.defect_form.empty());

    SUBCASE("rerun with the same seed is identical") {
        VerificationSettings small = s;
        small.functions = 6;
        small.base_points = 4;
        small.localization_samples = 0;
        const VerificationResult a = verify_identity(small), b = verify_identity(small);
        REQUIRE(a.rows.size() == b.rows.size());
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            CHECK(a.rows[i].corrected == b.rows[i].corrected);
            CHECK(a.rows[i].published == b.rows[i].published);
        }
    }
}

TEST_CASE("catalogue") {
    const auto& cat = correction_catalogue();
    int flux = 0, rhs = 0;
    for (const auto& e : cat) (e.block == "flux" ? flux : rhs) += 1;
    CHECK(flux == 5);
    CHECK(rhs == 2);
    CHECK(std::string(psi_mode_name(PsiMode::LxFourth)) == "lx4");
}
