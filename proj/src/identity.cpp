#include "schro4/identity.hpp"

#include <Eigen/Dense>
#include <random>
#include <algorithm>
#include <cmath>

namespace schro4 {

namespace {

const cplx I(0.0, 1.0);

// c (P Qbar + Pbar Q)
CJet sym(const RJet& c, const CJet& P, const CJet& Q) { return c * (P * Q.conj() + P.conj() * Q); }
// c (P Qbar - Pbar Q)
CJet asym(const RJet& c, const CJet& P, const CJet& Q) { return c * (P * Q.conj() - P.conj() * Q); }
CJet sq(const RJet& c, const CJet& P) { return c * (P * P.conj()); }

struct Ls {
    RJet l1, l2, l3, l4, l5, l6, lt, ltt, lxt, lxxt, lxxxt;
    explicit Ls(const RJet& l)
        : l1(l.dx(1)), l2(l.dx(2)), l3(l.dx(3)), l4(l.dx(4)), l5(l.dx(5)), l6(l.dx(6)),
          lt(l.dt(1)), ltt(l.dt(2)), lxt(l.d(1, 1)), lxxt(l.d(2, 1)), lxxxt(l.d(3, 1)) {}
};

// Closing term of the |v|^2 group of the flux, written in derivatives of l and Psi.
RJet flux_v0_correction(const Ls& L, const RJet& P) {
    const RJet &l1 = L.l1, &l2 = L.l2, &l3 = L.l3, &l4 = L.l4, &l5 = L.l5, &l6 = L.l6;
    const RJet Px = P.dx(1), Pxx = P.dx(2);
    RJet l1_2 = l1 * l1, l1_3 = l1_2 * l1, l1_4 = l1_3 * l1, l1_5 = l1_4 * l1, l1_7 = l1_5 * l1_2;
    RJet l2_2 = l2 * l2, l3_2 = l3 * l3;
    RJet s = P * (4.0 * l1_3 - 18.0 * l1 * l2 - 6.0 * l1 * l3 - 6.0 * l2_2 + 7.0 * l3 + 3.0 * l4) +
             Px * (-3.0 * l1_2 - 12.0 * l1 * l2 + 3.0 * l2 + 6.0 * l3) +
             Pxx * (-3.0 * l1_2 + 3.0 * l2) - 4.0 * l1_7 + 30.0 * l1_5 * l2 + 18.0 * l1_5 * l3 +
             90.0 * l1_4 * l2_2 - 38.0 * l1_4 * l3 - 156.0 * l1_3 * l2_2 + 30.0 * l1_3 * l4 -
             6.0 * l1_3 * l5 + 228.0 * l1_2 * l2 * l3 - 90.0 * l1_2 * l2 * l4 - 72.0 * l1_2 * l3_2 -
             6.0 * l1_2 * l5 + 126.0 * l1 * l2_2 * l2 - 306.0 * l1 * l2_2 * l3 - 54.0 * l1 * l2 * l4 +
             18.0 * l1 * l2 * l5 - 34.0 * l1 * l3_2 + 54.0 * l1 * l3 * l4 - 54.0 * l2_2 * l2_2 -
             138.0 * l2_2 * l3 + 90.0 * l2_2 * l4 + 162.0 * l2 * l3_2 + 9.0 * l2 * l5 - 3.0 * l2 * l6 +
             9.0 * l3 * l4 - 6.0 * l3 * l5 - 3.0 * l4 * l4;
    return s * -2.0;
}

double scale_of(const IdentityTerms& T) {
    return std::max({1.0, std::abs(T.lhs), std::abs(T.rhs)});
}

}  // namespace

CoefficientSet coefficients(const WeightJet& w, const RJet& Psi) {
    if (w.l.kx() < 8) throw JetError("coefficients: weight jet needs x-order >= 8");
    Ls L(w.l);
    const RJet &lx = L.l1, &lxx = L.l2, &lxxx = L.l3, &lxxxx = L.l4;
    RJet lx2 = lx * lx;
    CoefficientSet c;
    c.Psi = Psi;
    c.a3 = lx * -4.0;
    c.a2 = (lx2 - lxx) * 6.0;
    c.a1 = (lx2 * lx - 3.0 * lx * lxx + lxxx) * -4.0;
    c.a0 = lx2 * lx2 - 6.0 * lx2 * lxx + 3.0 * lxx * lxx + 4.0 * lx * lxxx - lxxxx;
    c.a0_tilde = lx2 * lx2 - Psi - 2.0 * lx * lxxx - 3.0 * lxx * lxx;
    c.C24 = 4.0 * lx * (lx2 * lx2 - 2.0 * Psi - 2.0 * lx * lxxx - 3.0 * lxx * lxx);
    c.C41 = -6.0 * lx2 * lxx + 6.0 * lx * lxxx + 6.0 * lxx * lxx - lxxxx;
    return c;
}

RJet a0_tilde_by_reduction(const CoefficientSet& c) {
    return c.a0 - c.Psi - 0.5 * c.a1.dx(1) + 0.25 * c.a3.dx(3);
}

RJet C24_by_reduction(const CoefficientSet& c) { return c.a3 * c.Psi - c.a3 * c.a0_tilde; }

const std::array<CorrectionInfo, kNumCorrections>& correction_catalogue() {
    static const std::array<CorrectionInfo, kNumCorrections> cat = {{
        {"flux", "|v_xx|^2", "3 a3 a3_x"},
        {"flux", "v_x conj(v_xx) + cc", "-3/2 a1_x + 1/4 a3_xxx"},
        {"flux", "|v_x|^2", "4 C41_x"},
        {"flux", "v_x conj(v) + cc", "a1_x + 2 C41_xx"},
        {"flux", "|v|^2", "E00(l_x..l_xxxxxx, Psi, Psi_x, Psi_xx)"},
        {"rhs", "|v_xx|^2", "(a2 a3)_x"},
        {"rhs", "|v|^2", "2 (a1 a0~)_x"},
    }};
    return cat;
}

CorrectionWeights weights_for(IdentityVariant v) {
    CorrectionWeights a{};
    if (v == IdentityVariant::Corrected) a.fill(1.0);
    return a;
}

IdentityTerms split_terms(const CJet& u, const WeightJet& w, const CoefficientSet& c,
                          const CorrectionWeights& alpha) {
    if (!u.same_point(w.t, w.x)) throw JetError("split_terms: u and weight at different points");
    if (u.kx() < 5 || u.kt() < 2) throw JetError("split_terms: u jet needs orders >= (5,2)");
    Ls L(w.l);
    // theta is normalised to 1 at the base point; every term is quadratic in v.
    RJet lhat = w.l - w.l.value();
    RJet th = jet_exp(lhat);
    CJet v = th * u;
    auto V = [&](int j, int k = 0) { return v.d(j, k); };

    const RJet &a0 = c.a0, &a1 = c.a1, &a2 = c.a2, &a3 = c.a3, &at0 = c.a0_tilde, &C24 = c.C24,
               &C41 = c.C41, &Psi = c.Psi;
    const RJet &lx = L.l1, &lxx = L.l2, &lxxx = L.l3, &lxxxx = L.l4, &lt = L.lt;
    const RJet a3x = a3.dx(1), a3xx = a3.dx(2), a1x = a1.dx(1);
    const RJet a0mP = a0 - Psi;
    const RJet Q = 1.5 * a3x * a0 - a2 * at0;

    IdentityTerms T;
    CJet I1 = I * V(0, 1) + Psi * V(0) + a2 * V(2) + V(4);
    CJet I2 = (-I) * lt * V(0) + a0mP * V(0) + a1 * V(1) + a3 * V(3);
    T.I1 = I1.value();
    T.I2 = I2.value();

    CJet A = I * asym(a3, V(0, 1), V(2)) - 0.5 * I * asym(a3, V(1, 1), V(1)) +
             0.5 * I * asym(a3x, V(0, 1), V(1)) + sym(1.5 * a3x, V(3), V(2)) + sym(a1, V(3), V(1)) +
             sym(C41, V(3), V(0)) + I * asym(lt, V(3), V(0)) - I * asym(lt, V(2), V(1)) +
             sym(C24 - C41.dx(1), V(2), V(0)) - I * asym(L.lxt, V(2), V(0)) +
             I * asym(L.lxxt + a2 * lt, V(1), V(0)) + 0.25 * I * asym(2.0 * a1 - a3xx, V(0, 1), V(0)) +
             sym(a0mP * a2 - C24.dx(1) - a1x - C41.dx(2) + Q, V(1), V(0)) + sq(a3, V(3)) +
             sq(a2 * a3 - 1.5 * a3x * a3 - 1.5 * a3xx - a1, V(2)) +
             sq(a1 * a2 + a1.dx(2) - C24 - 2.0 * C41.dx(1) + 1.5 * a3x * a1, V(1)) +
             sq(a1 * Psi + C24.dx(2) - C41.dx(3) + (a0mP * a2).dx(1) + a1 * at0 - Q.dx(2), V(0));
    A = A + sq(alpha[0] * 3.0 * a3 * a3x, V(2)) +
        sym(alpha[1] * (-1.5 * a1x + 0.25 * a3.dx(3)), V(1), V(2)) +
        sq(alpha[2] * 4.0 * C41.dx(1), V(1)) + sym(alpha[3] * (a1x + 2.0 * C41.dx(2)), V(1), V(0)) +
        sq(alpha[4] * flux_v0_correction(L, Psi), V(0));

    CJet B = (-1.0) * sq(lt, V(0)) - 0.5 * I * asym(a3, V(1), V(2)) +
             0.25 * I * asym(2.0 * a1 - a3xx, V(0), V(1));
    T.A = A;
    T.B = B;

    const double lx_ = lx.value(), lxx_ = lxx.value(), lt_ = lt.value();
    T.D = 2.0 * I *
          (6.0 * lx_ * lx_ * L.lxt.value() + 6.0 * lx_ * lxx_ * lt_ - 6.0 * lxx_ * L.lxt.value() -
           3.0 * lx_ * L.lxxt.value() - 3.0 * lt_ * lxxx.value() + L.lxxxt.value());

    // P u straight from the u jet.
    const cplx Pu = I * u.derivative(0, 1) + u.derivative(4, 0);
    T.theta_Pu = Pu;  // normalised theta is 1 at the base point
    const cplx v0 = v.value(), vx = V(1).value(), vxx = V(2).value(), vxxx = V(3).value();
    auto csq = [](cplx z) { return std::norm(z); };

    T.lhs = csq(Pu) - A.dx(1).value() - B.dt(1).value() -
            at0.value() * (Pu * std::conj(v0) + std::conj(Pu) * v0) -
            6.0 * lxx_ * (Pu * std::conj(vxx) + std::conj(Pu) * vxx);

    const RJet vx2 = -1.0 * (a1 * a2).dx(1) - 2.0 * a0mP * a2 - 4.0 * C41.dx(2) + 3.0 * C24.dx(1) -
                     a1.dx(3) - 1.5 * (a3x * a1).dx(1) - 3.0 * a3x * a0 + 2.0 * a2 * at0;
    const RJet v2 = 2.0 * a0mP * Psi - (a1 * Psi).dx(1) - 2.0 * a0 * at0 - C24.dx(3) +
                    (a0mP * a2).dx(2) - (a1 * at0).dx(1) + Q.dx(2) + C41.dx(4) + L.ltt;
    const double vxx2 = 24.0 * lx_ * lx_ * lxx_ - 24.0 * lx_ * lxxx.value() + 48.0 * lxx_ * lxx_ -
                        20.0 * lxxxx.value() + alpha[5] * (a2 * a3).dx(1).value();
    const double v02 = v2.value() + alpha[6] * 2.0 * (a1 * at0).dx(1).value();

    T.rhs = csq(T.I1) + csq(T.I2) + T.D * (v0 * std::conj(vx) - std::conj(v0) * vx) +
            6.0 * I * lt_ * lxx_ * (v0 * std::conj(vxx) - std::conj(v0) * vxx) +
            4.0 * I * L.lxt.value() * (vxx * std::conj(vx) - std::conj(vxx) * vx) +
            16.0 * lxx_ * csq(vxxx) + vxx2 * csq(vxx) + vx2.value() * csq(vx) + v02 * csq(v0);
    return T;
}

IdentityTerms split_terms(const CJet& u, const WeightJet& w, const CoefficientSet& c,
                          IdentityVariant variant) {
    return split_terms(u, w, c, weights_for(variant));
}

cplx identity_defect(const CJet& u, const WeightJet& w, const RJet& Psi,
                     const CorrectionWeights& alpha) {
    IdentityTerms T = split_terms(u, w, coefficients(w, Psi), alpha);
    return (T.lhs - T.rhs) / scale_of(T);
}

double identity_residual(const CJet& u, const WeightJet& w, const RJet& Psi,
                         IdentityVariant variant) {
    return std::abs(identity_defect(u, w, Psi, weights_for(variant)));
}

RJet make_psi(PsiMode mode, const WeightJet& w, const std::vector<double>& poly) {
    RJet z = w.l.like(0.0);
    switch (mode) {
        case PsiMode::Zero:
            return z;
        case PsiMode::LxFourth:
            return pow(w.l.dx(1), 4);
        case PsiMode::Polynomial: {
            RJet X = RJet::var_x(w.l.kx(), w.l.kt(), w.t, w.x);
            RJet acc = z, xp = w.l.like(1.0);
            for (double a : poly) {
                acc = acc + a * xp;
                xp = xp * X;
            }
            return acc;
        }
    }
    return z;
}

CJet test_function_jet(const TestFunctionSpec& s, double t, double x, int kx, int kt) {
    CJet X = CJet::var_x(kx, kt, t, x), Tt = CJet::var_t(kx, kt, t, x);
    CJet poly = X.like(0.0);
    std::size_t n = 0;
    for (int deg = 0; deg <= 3; ++deg)
        for (int i = deg; i >= 0; --i) {
            if (n >= s.poly.size()) break;
            poly = poly + s.poly[n++] * (pow(X, i) * pow(Tt, deg - i));
        }
    CJet ex = jet_exp(s.alpha * X + s.beta * Tt);
    return poly * ex;
}

namespace {

std::string monomial_name(int j, int k) {
    std::string s = "v";
    if (j == 0 && k == 0) return s;
    s += "_";
    s += std::string(static_cast<std::size_t>(j), 'x');
    s += std::string(static_cast<std::size_t>(k), 't');
    return s;
}

}  // namespace

std::vector<FormEntry> defect_form(const WeightJet& w, const RJet& Psi, double rel_tol) {
    const auto alpha = weights_for(IdentityVariant::Published);
    const CoefficientSet c = coefficients(w, Psi);
    RJet lhat = w.l - w.l.value();
    RJet inv_th = jet_exp(-1.0 * lhat).truncated(5, 2);
    std::vector<std::pair<int, int>> basis;
    for (int k = 0; k <= 1; ++k)
        for (int j = 0; j <= 4; ++j) basis.emplace_back(j, k);
    const std::size_t n = basis.size();
    auto eval = [&](const std::vector<cplx>& wv) {
        CJet v(5, 2, w.t, w.x);
        for (std::size_t p = 0; p < n; ++p)
            v.at(basis[p].first, basis[p].second) =
                wv[p] / (detail::factorial(basis[p].first) * detail::factorial(basis[p].second));
        CJet u = inv_th * v;
        IdentityTerms T = split_terms(u, w, c, alpha);
        return std::pair<double, double>((T.lhs - T.rhs).real(), scale_of(T));
    };
    std::vector<double> diag(n);
    double scale = 1.0;
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<cplx> e(n, 0.0);
        e[p] = 1.0;
        auto [d, s] = eval(e);
        diag[p] = d;
        scale = std::max(scale, s);
    }
    std::vector<FormEntry> out;
    for (std::size_t p = 0; p < n; ++p) {
        if (std::abs(diag[p]) > rel_tol * scale)
            out.push_back({monomial_name(basis[p].first, basis[p].second),
                           monomial_name(basis[p].first, basis[p].second), diag[p]});
        for (std::size_t q = p + 1; q < n; ++q) {
            std::vector<cplx> e(n, 0.0);
            e[p] = 1.0;
            e[q] = 1.0;
            double re = 0.5 * (eval(e).first - diag[p] - diag[q]);
            e[q] = I;
            double imv = 0.5 * (eval(e).first - diag[p] - diag[q]);
            cplx h(re, imv);
            if (std::abs(h) > rel_tol * scale)
                out.push_back({monomial_name(basis[p].first, basis[p].second),
                               monomial_name(basis[q].first, basis[q].second), h});
        }
    }
    return out;
}

LocalizationReport localize(const std::vector<IdentitySample>& samples) {
    LocalizationReport rep;
    const std::size_t m = samples.size();
    Eigen::MatrixXd G(2 * m, kNumCorrections);
    Eigen::VectorXd r0(2 * m);
    const CorrectionWeights zero{};
    for (std::size_t s = 0; s < m; ++s) {
        const auto& S = samples[s];
        const CoefficientSet c = coefficients(S.w, S.Psi);
        IdentityTerms T0 = split_terms(S.u, S.w, c, zero);
        const double sc = scale_of(T0);
        const cplx d0 = (T0.lhs - T0.rhs) / sc;
        rep.published_max_residual = std::max(rep.published_max_residual, std::abs(d0));
        r0(2 * s) = d0.real();
        r0(2 * s + 1) = d0.imag();
        for (int k = 0; k < kNumCorrections; ++k) {
            CorrectionWeights e{};
            e[k] = 1.0;
            IdentityTerms Tk = split_terms(S.u, S.w, c, e);
            const cplx dk = (Tk.lhs - Tk.rhs) / sc - d0;
            G(2 * s, k) = dk.real();
            G(2 * s + 1, k) = dk.imag();
        }
    }
    Eigen::VectorXd a = G.colPivHouseholderQr().solve(-r0);
    for (int k = 0; k < kNumCorrections; ++k) {
        rep.fitted[k] = a(k);
        if (std::abs(a(k)) > 1e-6) rep.active.push_back(k);
    }
    const CorrectionWeights ones = weights_for(IdentityVariant::Corrected);
    for (const auto& S : samples) {
        rep.corrected_max_residual =
            std::max(rep.corrected_max_residual, std::abs(identity_defect(S.u, S.w, S.Psi, ones)));
        rep.refit_max_residual =
            std::max(rep.refit_max_residual, std::abs(identity_defect(S.u, S.w, S.Psi, rep.fitted)));
    }
    if (!samples.empty()) rep.defect_form = defect_form(samples.front().w, samples.front().Psi);
    return rep;
}

const char* psi_mode_name(PsiMode m) {
    switch (m) {
        case PsiMode::Zero:
            return "zero";
        case PsiMode::LxFourth:
            return "lx4";
        case PsiMode::Polynomial:
            return "poly";
    }
    return "?";
}

VerificationResult verify_identity(const VerificationSettings& s) {
    if (s.functions <= 0 || s.base_points <= 0 || s.lambdas.empty())
        throw DomainError("verify_identity: empty family");
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0), V(0.0, 1.0);
    struct Base {
        WeightJet w;
        double lambda;
        std::vector<double> poly;
    };
    std::vector<Base> bases;
    for (int b = 0; b < s.base_points; ++b) {
        CarlemanParams p{s.lambdas[static_cast<std::size_t>(b) % s.lambdas.size()], s.mu, s.x0, s.T};
        const double t = s.T * (0.1 + 0.8 * V(rng)), x = V(rng);
        std::vector<double> poly{U(rng), U(rng), U(rng), U(rng)};
        bases.push_back({weight_jet(t, x, p), p.lambda, poly});
    }
    std::vector<TestFunctionSpec> fns;
    for (int f = 0; f < s.functions; ++f) {
        TestFunctionSpec ts;
        for (int i = 0; i < 10; ++i) {
            const double re = U(rng);
            ts.poly.emplace_back(re, U(rng));
        }
        ts.alpha = U(rng);
        ts.beta = U(rng);
        fns.push_back(ts);
    }
    const PsiMode modes[3] = {PsiMode::Zero, PsiMode::LxFourth, PsiMode::Polynomial};
    VerificationResult res;
    std::vector<IdentitySample> loc;
    for (int f = 0; f < s.functions; ++f)
        for (int b = 0; b < s.base_points; ++b) {
            const Base& B = bases[static_cast<std::size_t>(b)];
            VerificationRow row;
            row.function = f;
            row.point = b;
            row.t = B.w.t;
            row.x = B.w.x;
            row.lambda = B.lambda;
            row.mode = modes[f % 3];
            const RJet Psi = make_psi(row.mode, B.w, B.poly);
            const CJet u = test_function_jet(fns[static_cast<std::size_t>(f)], B.w.t, B.w.x);
            row.published = identity_residual(u, B.w, Psi, IdentityVariant::Published);
            row.corrected = identity_residual(u, B.w, Psi, IdentityVariant::Corrected);
            res.max_published = std::max(res.max_published, row.published);
            res.max_corrected = std::max(res.max_corrected, row.corrected);
            res.rows.push_back(row);
            if (static_cast<int>(loc.size()) < s.localization_samples && f % 3 == b % 3)
                loc.push_back({u, B.w, Psi});
        }
    res.localization = localize(loc);
    return res;
}

}  // namespace schro4
