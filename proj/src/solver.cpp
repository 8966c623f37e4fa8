#include "schro4/solver.hpp"

#include <array>
#include <cmath>
#include <string>

namespace schro4 {

Grid::Grid(int nx, int nt, double horizon) : n_x(nx), n_t(nt), T(horizon) { validate(); }

void Grid::validate() const {
    if (n_x < 8) throw SolverError("grid: n_x must be >= 8");
    if (n_t < 8) throw SolverError("grid: n_t must be >= 8");
    if (!(T > 0)) throw SolverError("grid: T must be positive");
}

double Potential::sup_norm() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

Potential Potential::constant(int n_x, double c) {
    return Potential{std::vector<double>(static_cast<std::size_t>(n_x), c)};
}

Potential Potential::from_function(const Grid& g, const std::function<double(double)>& f) {
    Potential p;
    p.values.resize(static_cast<std::size_t>(g.n_x));
    for (int i = 0; i < g.n_x; ++i) p.values[static_cast<std::size_t>(i)] = f(g.x(i + 1));
    return p;
}

SpaceTimeField::SpaceTimeField(const Grid& g)
    : grid(g), values(static_cast<std::size_t>(g.n_t + 1) * static_cast<std::size_t>(g.n_x + 2)) {}

std::vector<cplx> SpaceTimeField::interior(int k) const {
    std::vector<cplx> u(static_cast<std::size_t>(grid.n_x));
    for (int i = 0; i < grid.n_x; ++i) u[static_cast<std::size_t>(i)] = (*this)(k, i + 1);
    return u;
}

void SpaceTimeField::set_interior(int k, const std::vector<cplx>& u) {
    for (int i = 0; i < grid.n_x; ++i) (*this)(k, i + 1) = u[static_cast<std::size_t>(i)];
    (*this)(k, 0) = 0.0;
    (*this)(k, grid.n_x + 1) = 0.0;
}

Generator assemble_generator(const Grid& g, const Potential& p) {
    const int n = g.n_x;
    if (static_cast<int>(p.values.size()) != n)
        throw SolverError("assemble_generator: potential has " + std::to_string(p.values.size()) +
                          " entries, grid has " + std::to_string(n));
    const double h4 = std::pow(g.dx(), 4);
    Generator L;
    L.dx = g.dx();
    L.d0.assign(static_cast<std::size_t>(n), 6.0 / h4);
    L.d1.assign(static_cast<std::size_t>(n - 1), -4.0 / h4);
    L.d2.assign(static_cast<std::size_t>(n - 2), 1.0 / h4);
    // ghost node reflection u(-dx) = u(dx) for u_x = 0
    L.d0.front() += 1.0 / h4;
    L.d0.back() += 1.0 / h4;
    for (int i = 0; i < n; ++i) L.d0[static_cast<std::size_t>(i)] += p.values[static_cast<std::size_t>(i)];
    return L;
}

std::vector<cplx> Generator::apply(const std::vector<cplx>& u) const {
    const int N = n();
    std::vector<cplx> r(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
        const auto I = static_cast<std::size_t>(i);
        cplx s = d0[I] * u[I];
        if (i >= 1) s += d1[I - 1] * u[I - 1];
        if (i >= 2) s += d2[I - 2] * u[I - 2];
        if (i + 1 < N) s += d1[I] * u[I + 1];
        if (i + 2 < N) s += d2[I] * u[I + 2];
        r[I] = s;
    }
    return r;
}

BandedLU::BandedLU(const Generator& L, cplx a, cplx b) : n_(L.n()) {
    const auto n = static_cast<std::size_t>(n_);
    l1_.assign(n, 0.0);
    l2_.assign(n, 0.0);
    u0_.assign(n, 0.0);
    u1_.assign(n, 0.0);
    u2_.assign(n, 0.0);
    auto m0 = [&](std::size_t i) { return a + b * L.d0[i]; };
    auto m1 = [&](std::size_t i) { return b * L.d1[i]; };  // (i, i+1)
    auto m2 = [&](std::size_t i) { return b * L.d2[i]; };  // (i, i+2)
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 2) l2_[i] = m2(i - 2) / u0_[i - 2];
        if (i >= 1) l1_[i] = (m1(i - 1) - (i >= 2 ? l2_[i] * u1_[i - 2] : cplx{})) / u0_[i - 1];
        u0_[i] = m0(i) - (i >= 1 ? l1_[i] * u1_[i - 1] : cplx{}) - (i >= 2 ? l2_[i] * u2_[i - 2] : cplx{});
        if (i + 1 < n) u1_[i] = m1(i) - (i >= 1 ? l1_[i] * u2_[i - 1] : cplx{});
        if (i + 2 < n) u2_[i] = m2(i);
        if (std::abs(u0_[i]) == 0.0) throw SolverError("banded LU: zero pivot");
    }
}

std::vector<cplx> BandedLU::solve(std::vector<cplx> y) const {
    const auto n = static_cast<std::size_t>(n_);
    for (std::size_t i = 1; i < n; ++i) {
        y[i] -= l1_[i] * y[i - 1];
        if (i >= 2) y[i] -= l2_[i] * y[i - 2];
    }
    for (std::size_t r = n; r-- > 0;) {
        cplx s = y[r];
        if (r + 1 < n) s -= u1_[r] * y[r + 1];
        if (r + 2 < n) s -= u2_[r] * y[r + 2];
        y[r] = s / u0_[r];
    }
    return y;
}

namespace {

SpaceTimeField run_cn(const std::vector<cplx>& u0, const Potential& p, const Grid& g,
                      const std::function<void(int k, std::vector<cplx>&)>& source) {
    g.validate();
    if (static_cast<int>(u0.size()) != g.n_x) throw SolverError("solve: u0 has wrong length");
    const Generator L = assemble_generator(g, p);
    const cplx I(0, 1);
    const double dt = g.dt();
    const BandedLU lu(L, I / dt, 0.5);
    SpaceTimeField u(g);
    u.set_interior(0, u0);
    std::vector<cplx> cur = u0, fa, fb;
    const auto n = static_cast<std::size_t>(g.n_x);
    if (source) {
        fa.assign(n, 0.0);
        fb.assign(n, 0.0);
        source(0, fa);
    }
    for (int k = 0; k < g.n_t; ++k) {
        // u^{n+1} = A^{-1} (2i/dt u^n + s) - u^n avoids applying L explicitly
        std::vector<cplx> rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = (2.0 * I / dt) * cur[i];
        if (source) {
            source(k + 1, fb);
            for (std::size_t i = 0; i < n; ++i) rhs[i] += 0.5 * (fa[i] + fb[i]);
            std::swap(fa, fb);
        }
        std::vector<cplx> w = lu.solve(std::move(rhs));
        for (std::size_t i = 0; i < n; ++i) w[i] -= cur[i];
        cur = std::move(w);
        for (const auto& z : cur)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw SolverError("solve: non-finite state at step " + std::to_string(k + 1));
        u.set_interior(k + 1, cur);
    }
    return u;
}

}  // namespace

SpaceTimeField solve(const std::vector<cplx>& u0, const Potential& p, const Grid& g, const Source& f) {
    std::function<void(int, std::vector<cplx>&)> src;
    if (f) src = [&](int k, std::vector<cplx>& out) { f(g.t(k), out); };
    return run_cn(u0, p, g, src);
}

SpaceTimeField solve(const std::vector<cplx>& u0, const Potential& p, const Grid& g,
                     const SpaceTimeField& f) {
    if (f.grid.n_x != g.n_x || f.grid.n_t != g.n_t) throw SolverError("solve: source grid mismatch");
    return run_cn(u0, p, g, [&](int k, std::vector<cplx>& out) { out = f.interior(k); });
}

namespace {

struct FitMatrix {
    double inv[4][4] = {};
    FitMatrix() {
        double M[4][8] = {};
        for (int k = 0; k < 4; ++k) {
            for (int m = 0; m < 4; ++m) M[k][m] = std::pow(k + 1.0, m + 2);
            M[k][4 + k] = 1.0;
        }
        for (int c = 0; c < 4; ++c) {
            int piv = c;
            for (int r = c + 1; r < 4; ++r)
                if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
            for (int j = 0; j < 8; ++j) std::swap(M[c][j], M[piv][j]);
            const double d = M[c][c];
            for (int j = 0; j < 8; ++j) M[c][j] /= d;
            for (int r = 0; r < 4; ++r)
                if (r != c) {
                    const double f = M[r][c];
                    for (int j = 0; j < 8; ++j) M[r][j] -= f * M[c][j];
                }
        }
        for (int m = 0; m < 4; ++m)
            for (int k = 0; k < 4; ++k) inv[m][k] = M[m][4 + k];
    }
};

const FitMatrix& fit_matrix() {
    static const FitMatrix f;
    return f;
}

}  // namespace

std::array<cplx, 4> clamped_fit(const cplx* near4) {
    const auto& F = fit_matrix();
    std::array<cplx, 4> b{};
    for (int m = 0; m < 4; ++m)
        for (int k = 0; k < 4; ++k) b[static_cast<std::size_t>(m)] += F.inv[m][k] * near4[k];
    return b;
}

std::pair<cplx, cplx> trace_at(const cplx* last4, double dx) {
    const auto b = clamped_fit(last4);
    return {2.0 * b[0] / (dx * dx), -6.0 * b[1] / (dx * dx * dx)};
}

BoundaryTrace extract_traces(const SpaceTimeField& u) {
    if (u.nx() < 4) throw SolverError("extract_traces: need at least 4 interior nodes");
    BoundaryTrace tr;
    const int n = u.nx();
    for (int k = 0; k <= u.nt(); ++k) {
        cplx last4[4] = {u(k, n), u(k, n - 1), u(k, n - 2), u(k, n - 3)};
        auto [a, b] = trace_at(last4, u.grid.dx());
        tr.uxx.push_back(a);
        tr.uxxx.push_back(b);
    }
    return tr;
}

double mass(const SpaceTimeField& u, int k) {
    double s = 0;
    for (int i = 1; i <= u.nx(); ++i) s += std::norm(u(k, i));
    return s * u.grid.dx();
}

}  // namespace schro4
