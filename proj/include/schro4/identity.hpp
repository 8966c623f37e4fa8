// Weighted pointwise identity for P u = i u_t + u_xxxx with v = theta u.
//
//   |theta P u|^2 - A_x - B_t - a0~ theta (Pu vbar + cc) - 6 l_xx theta (Pu vbar_xx + cc)
//     = |I1|^2 + |I2|^2 + (cross terms) + sum_k c_k |d_x^k v|^2
//
// with I1 = i v_t + Psi v + a2 v_xx + v_xxxx and
//      I2 = -i l_t v + (a0 - Psi) v + a1 v_x + a3 v_xxx.
//
// Two variants are provided.  `Published` transcribes the flux A and the
// right-hand side blocks as they are usually printed; it does not close.
// `Corrected` adds seven terms (see correction_catalogue) after which the
// identity holds to rounding error.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "schro4/jet.hpp"
#include "schro4/weights.hpp"

namespace schro4 {

constexpr int kNumCorrections = 7;
using CorrectionWeights = std::array<double, kNumCorrections>;

enum class IdentityVariant { Published, Corrected };

struct CoefficientSet {
    RJet a0, a1, a2, a3, a0_tilde, C24, C41, Psi;
};

// Coefficient jets from the weight jet (x-order >= 8 required).
CoefficientSet coefficients(const WeightJet& w, const RJet& Psi);

// Alternative forms used for cross-checking the closed forms above.
RJet a0_tilde_by_reduction(const CoefficientSet& c);  // a0 - Psi - a1_x/2 + a3_xxx/4
RJet C24_by_reduction(const CoefficientSet& c);       // a3 Psi - a3 a0~

struct IdentityTerms {
    cplx I1, I2, theta_Pu, D;
    CJet A, B;
    cplx lhs, rhs;
};

struct CorrectionInfo {
    std::string block;  // "flux" or "rhs"
    std::string monomial;
    std::string coefficient;
};
const std::array<CorrectionInfo, kNumCorrections>& correction_catalogue();

CorrectionWeights weights_for(IdentityVariant v);

IdentityTerms split_terms(const CJet& u, const WeightJet& w, const CoefficientSet& c,
                          const CorrectionWeights& alpha);
IdentityTerms split_terms(const CJet& u, const WeightJet& w, const CoefficientSet& c,
                          IdentityVariant variant = IdentityVariant::Corrected);

// |lhs - rhs| / max(1, |lhs|, |rhs|)
double identity_residual(const CJet& u, const WeightJet& w, const RJet& Psi,
                         IdentityVariant variant = IdentityVariant::Corrected);

// Signed defect lhs - rhs divided by max(1, |lhs|, |rhs|).
cplx identity_defect(const CJet& u, const WeightJet& w, const RJet& Psi,
                     const CorrectionWeights& alpha);

// Psi choices exercised by the verifier.
enum class PsiMode { Zero, LxFourth, Polynomial };
RJet make_psi(PsiMode mode, const WeightJet& w, const std::vector<double>& poly = {});

// Random analytic test function u = poly(x, t) exp(alpha x + beta t),
// expanded at (t, x) with orders (5, 2).
struct TestFunctionSpec {
    std::vector<cplx> poly;  // coefficients of x^i t^j, i + j <= 3, in a fixed order
    double alpha = 0.0, beta = 0.0;
};
CJet test_function_jet(const TestFunctionSpec& s, double t, double x, int kx = 5, int kt = 2);

// ---- certify or localize -------------------------------------------------

struct IdentitySample {
    CJet u;
    WeightJet w;
    RJet Psi;
};

struct FormEntry {
    std::string left, right;  // monomials: coefficient multiplies left * conj(right)
    cplx value;
};

struct LocalizationReport {
    double published_max_residual = 0.0;
    double corrected_max_residual = 0.0;
    double refit_max_residual = 0.0;
    CorrectionWeights fitted{};
    std::vector<int> active;            // catalogue indices with a nonzero fitted weight
    std::vector<FormEntry> defect_form;  // nonzero entries of the published defect form
};

// Hermitian form of the defect (published variant) over the v-jet basis at one point.
std::vector<FormEntry> defect_form(const WeightJet& w, const RJet& Psi, double rel_tol = 1e-9);

LocalizationReport localize(const std::vector<IdentitySample>& samples);

// ---- seeded verification run ----------------------------------------------

struct VerificationSettings {
    std::uint64_t seed = 1;
    int functions = 100;
    int base_points = 20;
    std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1};  // cycled over base points
    double mu = 1.0, x0 = -1.0, T = 2.0;
    int localization_samples = 60;  // samples handed to localize()
};

struct VerificationRow {
    int function = 0, point = 0;
    double t = 0, x = 0, lambda = 0;
    PsiMode mode = PsiMode::Zero;
    double published = 0, corrected = 0;
};

struct VerificationResult {
    std::vector<VerificationRow> rows;
    double max_published = 0, max_corrected = 0;
    LocalizationReport localization;
};

// Base points are uniform in (0.1 T, 0.9 T) x [0, 1]; Psi mode cycles over Zero, LxFourth,
// Polynomial with the function index.
VerificationResult verify_identity(const VerificationSettings& s);
const char* psi_mode_name(PsiMode m);

}  // namespace schro4
