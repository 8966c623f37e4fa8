// Carleman weight system on (0,T) x [0,1]:
//   psi(x) = (x - x0)^2
//   phi    = e^{3 mu psi} / (t (T - t))
//   l      = lambda (e^{3 mu psi} - e^{5 mu psi_sup}) / (t (T - t))
//   theta  = e^l
#pragma once

#include <vector>

#include "schro4/jet.hpp"

namespace schro4 {

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CarlemanParams {
    double lambda = 1.0;
    double mu = 1.0;
    double x0 = -1.0;
    double T = 2.0;

    double psi_sup() const;
    // e^{5 mu psi_sup}
    double offset() const;
    void validate() const;
};

struct PsiValue {
    double value, dx, dxx;
};
PsiValue psi_eval(double x, const CarlemanParams& p);

struct WeightJet {
    RJet l;
    RJet varphi;
    double theta = 0.0;
    double t = 0.0, x = 0.0;
};

// Jets of l and phi at (t, x), orders (kx, kt).  Default orders (8, 2).
WeightJet weight_jet(double t, double x, const CarlemanParams& p, int kx = 8, int kt = 2);

// Scalar fast paths used on grids.
double ell(double t, double x, const CarlemanParams& p);
double varphi(double t, double x, const CarlemanParams& p);

struct WeightBoundsReport {
    // C in |d_x^n l| <= C lambda mu^n phi, n = 1..8 (index n-1)
    std::vector<double> cx;
    // C in |d_x^n l_t| <= C lambda mu^n T phi^2, n = 0..3
    std::vector<double> ct;
    // C in |l_tt| <= C lambda T^2 phi^3
    double ctt = 0.0;
    bool all_finite = true;
};

// Scan interior grid points (t_k, x_i) with n_t time steps and n_x interior nodes.
WeightBoundsReport weight_bounds_check(const CarlemanParams& p, int n_x, int n_t);

}  // namespace schro4
