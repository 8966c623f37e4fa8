// Crank-Nicolson solver for  i u_t + u_xxxx + p u = f  on (0,T) x (0,1)
// with clamped ends u = u_x = 0.
#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "schro4/jet.hpp"

namespace schro4 {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Grid {
    int n_x = 64;
    int n_t = 200;
    double T = 1.0;

    Grid() = default;
    Grid(int nx, int nt, double horizon);
    double dx() const { return 1.0 / (n_x + 1); }
    double dt() const { return T / n_t; }
    double x(int i) const { return i * dx(); }  // i = 0 .. n_x+1, endpoints included
    double t(int k) const { return k * dt(); }
    void validate() const;
};

struct Potential {
    std::vector<double> values;  // on the n_x interior nodes
    double sup_norm() const;
    static Potential constant(int n_x, double c);
    static Potential from_function(const Grid& g, const std::function<double(double)>& f);
};

// Complex field sampled at (n_t+1) times and n_x+2 nodes, endpoints included.
struct SpaceTimeField {
    Grid grid;
    std::vector<cplx> values;

    SpaceTimeField() = default;
    explicit SpaceTimeField(const Grid& g);
    cplx& operator()(int k, int i) { return values[index(k, i)]; }
    const cplx& operator()(int k, int i) const { return values[index(k, i)]; }
    int nt() const { return grid.n_t; }
    int nx() const { return grid.n_x; }
    std::size_t index(int k, int i) const {
        return static_cast<std::size_t>(k) * static_cast<std::size_t>(grid.n_x + 2) +
               static_cast<std::size_t>(i);
    }
    // Interior values at time index k.
    std::vector<cplx> interior(int k) const;
    void set_interior(int k, const std::vector<cplx>& u);
};

struct BoundaryTrace {
    std::vector<cplx> uxx;
    std::vector<cplx> uxxx;
};

// Real symmetric pentadiagonal L = D4 + diag(p), stored by diagonals.
struct Generator {
    std::vector<double> d0, d1, d2;  // main, first and second off-diagonals
    double dx = 0.0;
    int n() const { return static_cast<int>(d0.size()); }
    std::vector<cplx> apply(const std::vector<cplx>& u) const;
};
Generator assemble_generator(const Grid& g, const Potential& p);

// LU factors of a complex pentadiagonal matrix, no pivoting.
class BandedLU {
public:
    BandedLU() = default;
    // Matrix a I + b L for complex a, b.
    BandedLU(const Generator& L, cplx a, cplx b);
    std::vector<cplx> solve(std::vector<cplx> rhs) const;

private:
    int n_ = 0;
    // L has unit diagonal with subdiagonals l1, l2; U has diagonal u0 and superdiagonals u1, u2.
    std::vector<cplx> l1_, l2_, u0_, u1_, u2_;
};

using Source = std::function<void(double t, std::vector<cplx>& out)>;

// Initial data u0 on interior nodes.  `f` is optional.
SpaceTimeField solve(const std::vector<cplx>& u0, const Potential& p, const Grid& g,
                     const Source& f = nullptr);
// Source given as a sampled field.
SpaceTimeField solve(const std::vector<cplx>& u0, const Potential& p, const Grid& g,
                     const SpaceTimeField& f);

BoundaryTrace extract_traces(const SpaceTimeField& u);
// Fit u(s) = sum_{m=2}^{5} b_m (s/dx)^m through near4[k] = u((k+1) dx), where s is
// the distance to a clamped end.  Returns b_2 .. b_5.
std::array<cplx, 4> clamped_fit(const cplx* near4);
// u_xx(1) and u_xxx(1) from last4[k] = u(1 - (k+1) dx).
std::pair<cplx, cplx> trace_at(const cplx* last4, double dx);

double mass(const SpaceTimeField& u, int k);

}  // namespace schro4
