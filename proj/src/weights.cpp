#include "schro4/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace schro4 {

double CarlemanParams::psi_sup() const {
    return std::max(x0 * x0, (1.0 - x0) * (1.0 - x0));
}

double CarlemanParams::offset() const { return std::exp(5.0 * mu * psi_sup()); }

void CarlemanParams::validate() const {
    if (!(lambda > 0)) throw DomainError("lambda must be positive");
    if (!(mu > 0)) throw DomainError("mu must be positive");
    if (!(T > 0)) throw DomainError("T must be positive");
    if (x0 >= 0.0 && x0 <= 1.0) throw DomainError("x0 must lie outside [0,1]");
    if (!std::isfinite(offset())) throw DomainError("e^{5 mu psi_sup} overflows");
}

PsiValue psi_eval(double x, const CarlemanParams& p) {
    return {(x - p.x0) * (x - p.x0), 2.0 * (x - p.x0), 2.0};
}

WeightJet weight_jet(double t, double x, const CarlemanParams& p, int kx, int kt) {
    p.validate();
    if (!(t > 0.0 && t < p.T))
        throw DomainError("weight_jet: t = " + std::to_string(t) + " outside (0,T)");
    RJet X = RJet::var_x(kx, kt, t, x);
    RJet tt = RJet::var_t(kx, kt, t, x);
    RJet shifted = X - p.x0;
    RJet psi = shifted * shifted;
    RJet e = jet_exp(psi * (3.0 * p.mu));
    RJet inv = jet_recip(tt * (p.T - tt));
    WeightJet w;
    w.varphi = e * inv;
    w.l = ((e - p.offset()) * inv) * p.lambda;
    w.theta = std::exp(w.l.value());
    w.t = t;
    w.x = x;
    return w;
}

double varphi(double t, double x, const CarlemanParams& p) {
    double s = (x - p.x0) * (x - p.x0);
    return std::exp(3.0 * p.mu * s) / (t * (p.T - t));
}

double ell(double t, double x, const CarlemanParams& p) {
    double s = (x - p.x0) * (x - p.x0);
    return p.lambda * (std::exp(3.0 * p.mu * s) - p.offset()) / (t * (p.T - t));
}

WeightBoundsReport weight_bounds_check(const CarlemanParams& p, int n_x, int n_t) {
    WeightBoundsReport r;
    r.cx.assign(8, 0.0);
    r.ct.assign(4, 0.0);
    const double dx = 1.0 / (n_x + 1), dt = p.T / n_t;
    for (int k = 1; k < n_t; ++k) {
        const double t = k * dt;
        for (int i = 0; i <= n_x + 1; ++i) {
            const double x = i * dx;
            WeightJet w = weight_jet(t, x, p, 8, 2);
            const double phi = w.varphi.value();
            for (int n = 1; n <= 8; ++n) {
                double c = std::abs(w.l.derivative(n, 0)) / (p.lambda * std::pow(p.mu, n) * phi);
                r.cx[n - 1] = std::max(r.cx[n - 1], c);
            }
            for (int n = 0; n <= 3; ++n) {
                double c = std::abs(w.l.derivative(n, 1)) /
                           (p.lambda * std::pow(p.mu, n) * p.T * phi * phi);
                r.ct[n] = std::max(r.ct[n], c);
            }
            r.ctt = std::max(r.ctt, std::abs(w.l.derivative(0, 2)) /
                                        (p.lambda * p.T * p.T * phi * phi * phi));
        }
    }
    for (double c : r.cx) r.all_finite = r.all_finite && std::isfinite(c);
    for (double c : r.ct) r.all_finite = r.all_finite && std::isfinite(c);
    r.all_finite = r.all_finite && std::isfinite(r.ctt);
    return r;
}

}  // namespace schro4
