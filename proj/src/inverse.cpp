#include "schro4/inverse.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "schro4/parallel.hpp"

namespace schro4 {

namespace {

double max_abs(const std::vector<cplx>& v) {
    double m = 0;
    for (const auto& z : v) m = std::max(m, std::abs(z));
    return m;
}

void require_same_grid(const SpaceTimeField& a, const SpaceTimeField& b, const char* what) {
    if (a.nx() != b.nx() || a.nt() != b.nt() || a.grid.T != b.grid.T)
        throw SolverError(std::string(what) + ": grid mismatch");
}

}  // namespace

Realness detect_realness(const std::vector<cplx>& u0) {
    const double scale = max_abs(u0);
    double re = 0, im = 0;
    for (const auto& z : u0) {
        re = std::max(re, std::abs(z.real()));
        im = std::max(im, std::abs(z.imag()));
    }
    if (im <= 1e-12 * scale) return Realness::Real;
    if (re <= 1e-12 * scale) return Realness::Imaginary;
    throw HypothesisError("u0 is neither real nor purely imaginary");
}

void InversionSetup::validate() const {
    grid.validate();
    params.validate();
    const auto n = static_cast<std::size_t>(grid.n_x);
    if (p.values.size() != n || q.values.size() != n || u0.size() != n)
        throw HypothesisError("setup: p, q and u0 must have n_x entries");
    if (!(r > 0)) throw HypothesisError("setup: r must be positive");
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& z : u0) mn = std::min(mn, std::abs(z));
    if (mn < r) throw HypothesisError("setup: min |u0| = " + std::to_string(mn) + " is below r");
    if (q.sup_norm() > m || p.sup_norm() > m) throw HypothesisError("setup: potential exceeds the bound m");
    for (double v : p.values)
        if (!std::isfinite(v)) throw HypothesisError("setup: p is not finite");
    for (double v : q.values)
        if (!std::isfinite(v)) throw HypothesisError("setup: q is not finite");
    if (detect_realness(u0) != realness) throw HypothesisError("setup: realness flag does not match u0");
    if (std::abs(params.T - 2.0 * grid.T) > 1e-12 * params.T)
        throw HypothesisError("setup: weight horizon must be twice the grid horizon");
}

double difference_residual(const SpaceTimeField& y, const SpaceTimeField& R, const Potential& q,
                           const std::vector<double>& f) {
    require_same_grid(y, R, "difference_residual");
    const Generator L = assemble_generator(y.grid, q);
    const double dt = y.grid.dt();
    const cplx I(0, 1);
    const int n = y.nx();
    double worst = 0, scale = 1;
    std::vector<cplx> a = y.interior(0), b;
    for (int k = 0; k < y.nt(); ++k) {
        b = y.interior(k + 1);
        std::vector<cplx> mid(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
        const std::vector<cplx> Lm = L.apply(mid);
        for (int i = 0; i < n; ++i) {
            const auto I_ = static_cast<std::size_t>(i);
            const cplx fR = f[I_] * 0.5 * (R(k, i + 1) + R(k + 1, i + 1));
            const cplx res = I * (b[I_] - a[I_]) / dt + Lm[I_] - fR;
            worst = std::max(worst, std::abs(res));
            scale = std::max({scale, std::abs(Lm[I_]), std::abs(fR)});
        }
        a.swap(b);
    }
    return worst / scale;
}

DifferenceSystem difference_system(const InversionSetup& s) {
    s.validate();
    DifferenceSystem d;
    d.R = solve(s.u0, s.p, s.grid);
    const SpaceTimeField uq = solve(s.u0, s.q, s.grid);
    d.y = d.R;
    for (std::size_t i = 0; i < d.y.values.size(); ++i) d.y.values[i] -= uq.values[i];
    d.f.resize(s.q.values.size());
    for (std::size_t i = 0; i < d.f.size(); ++i) d.f[i] = s.q.values[i] - s.p.values[i];
    d.residual = difference_residual(d.y, d.R, s.q, d.f);
    return d;
}

Extended extend_and_shift(const SpaceTimeField& y, const SpaceTimeField& R, Realness branch) {
    require_same_grid(y, R, "extend_and_shift");
    const int n = y.nx(), nt = y.nt();
    double scale = 0, bad = 0;
    for (int i = 0; i <= n + 1; ++i) {
        const cplx z = R(0, i);
        scale = std::max(scale, std::abs(z));
        bad = std::max(bad, branch == Realness::Real ? std::abs(z.imag()) : std::abs(z.real()));
    }
    if (bad > 1e-8 * std::max(scale, 1e-300))
        throw HypothesisError(branch == Realness::Real ? "extend_and_shift: R(0) is not real"
                                                       : "extend_and_shift: i R(0) is not real");
    const double s = branch == Realness::Real ? 1.0 : -1.0;
    Grid g2(n, 2 * nt, 2.0 * y.grid.T);
    Extended e{SpaceTimeField(g2), SpaceTimeField(g2)};
    for (int k = 0; k <= nt; ++k)
        for (int i = 0; i <= n + 1; ++i) {
            e.y2(nt + k, i) = y(k, i);
            e.R2(nt + k, i) = R(k, i);
            if (k > 0) {
                e.y2(nt - k, i) = s * std::conj(y(k, i));
                e.R2(nt - k, i) = s * std::conj(R(k, i));
            }
        }
    return e;
}

SpaceTimeField z_field(const SpaceTimeField& y2) {
    const int N = y2.nt(), n = y2.nx();
    const double dt = y2.grid.dt();
    SpaceTimeField yt(y2.grid);
    for (int i = 0; i <= n + 1; ++i) {
        for (int k = 1; k < N; ++k) yt(k, i) = (y2(k + 1, i) - y2(k - 1, i)) / (2 * dt);
        yt(0, i) = (-3.0 * y2(0, i) + 4.0 * y2(1, i) - y2(2, i)) / (2 * dt);
        yt(N, i) = (3.0 * y2(N, i) - 4.0 * y2(N - 1, i) + y2(N - 2, i)) / (2 * dt);
    }
    SpaceTimeField z(y2.grid);
    for (int k = 0; k <= N; ++k)
        for (int i = 0; i <= n + 1; ++i) z(k, i) = yt(N - k, i);
    return z;
}

double j_log_scale(const SpaceTimeField& z, const CarlemanParams& params) {
    if (z.nt() % 2 != 0) throw SolverError("j_log_scale: z needs an even number of steps");
    const double Th = 0.5 * z.grid.T;
    double S = -std::numeric_limits<double>::infinity();
    for (int i = 1; i <= z.nx(); ++i) S = std::max(S, 2.0 * ell(Th, z.grid.x(i), params));
    return S;
}

JValue j_functional(const SpaceTimeField& z, const CarlemanParams& params, PsiMode mode, double log_scale,
                    const std::vector<double>& psi_poly) {
    if (z.nt() % 2 != 0) throw SolverError("j_functional: z needs an even number of steps");
    if (std::abs(params.T - z.grid.T) > 1e-12 * params.T)
        throw DomainError("j_functional: weight horizon differs from the horizon of z");
    const Grid& g = z.grid;
    const int n = g.n_x, K = g.n_t / 2;
    const double dx = g.dx(), dt = g.dt();
    const auto N = static_cast<std::size_t>(n);
    const Generator D4 = assemble_generator(g, Potential::constant(n, 0.0));
    auto v_at = [&](int k) {
        std::vector<cplx> v(N, 0.0);
        if (k == 0) return v;
        for (int i = 0; i < n; ++i)
            v[static_cast<std::size_t>(i)] = std::exp(ell(g.t(k), g.x(i + 1), params) - 0.5 * log_scale) * z(k, i + 1);
        return v;
    };
    const cplx I(0, 1);
    cplx J = 0.0;
    std::vector<cplx> a = v_at(0), b, vm(N);
    for (int k = 0; k < K; ++k) {
        b = v_at(k + 1);
        for (std::size_t i = 0; i < N; ++i) vm[i] = 0.5 * (a[i] + b[i]);
        const std::vector<cplx> d4 = D4.apply(vm);
        const double tm = (k + 0.5) * dt;
        cplx row = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto I_ = static_cast<std::size_t>(i);
            const WeightJet w = weight_jet(tm, g.x(i + 1), params, 2, 0);
            const double lx = w.l.derivative(1, 0), lxx = w.l.derivative(2, 0);
            const double a2 = 6.0 * (lx * lx - lxx);
            const double Psi = make_psi(mode, w, psi_poly).value();
            const cplx left = i > 0 ? vm[I_ - 1] : cplx{};
            const cplx right = i + 1 < n ? vm[I_ + 1] : cplx{};
            const cplx d2 = (left - 2.0 * vm[I_] + right) / (dx * dx);
            const cplx I1 = I * (b[I_] - a[I_]) / dt + Psi * vm[I_] + a2 * d2 + d4[I_];
            row += I1 * std::conj(vm[I_]);
        }
        J += row * dx * dt;
        a.swap(b);
    }
    return {J, log_scale};
}

double BKReport::relative_gap() const { return std::abs(J.imag() - im_target) / im_target; }

BKReport bk_identity(const InversionSetup& s, const DifferenceSystem& d, PsiMode mode) {
    const Extended e = extend_and_shift(d.y, d.R, s.realness);
    const SpaceTimeField z = z_field(e.y2);
    BKReport rep;
    rep.log_scale = j_log_scale(z, s.params);
    rep.J = j_functional(z, s.params, mode, rep.log_scale).J;
    const Grid& g = z.grid;
    const int K = g.n_t / 2;
    const double Th = g.t(K);
    double num = 0, den = 0;
    for (int i = 1; i <= g.n_x; ++i) {
        const double f = d.f[static_cast<std::size_t>(i - 1)];
        const double w = std::exp(2.0 * ell(Th, g.x(i), s.params) - rep.log_scale) * g.dx();
        const cplx fR = f * e.R2(K, i);
        rep.im_target += 0.5 * w * std::norm(fR);
        rep.lower_bound += 0.5 * s.r * s.r * w * f * f;
        num += std::norm(z(K, i) + cplx(0, 1) * fR);
        den += std::norm(fR);
    }
    rep.terminal_error = den > 0 ? std::sqrt(num / den) : 0.0;
    return rep;
}

double h1_norm_sq(const std::vector<cplx>& g, double dt) {
    const int N = static_cast<int>(g.size()) - 1;
    if (N < 2) throw SolverError("h1_norm_sq: need at least 3 samples");
    double s = 0;
    for (int k = 0; k <= N; ++k) {
        cplx gt;
        if (k == 0)
            gt = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2 * dt);
        else if (k == N)
            gt = (3.0 * g[N] - 4.0 * g[N - 1] + g[N - 2]) / (2 * dt);
        else
            gt = (g[k + 1] - g[k - 1]) / (2 * dt);
        const double w = (k == 0 || k == N) ? 0.5 * dt : dt;
        s += w * (std::norm(g[k]) + std::norm(gt));
    }
    return s;
}

double trace_h1_norm(const BoundaryTrace& tr, double dt) { return h1_norm_sq(tr.uxx, dt) + h1_norm_sq(tr.uxxx, dt); }

BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b) {
    if (a.uxx.size() != b.uxx.size() || a.uxxx.size() != b.uxxx.size())
        throw SolverError("trace_difference: length mismatch");
    BoundaryTrace d = a;
    for (std::size_t k = 0; k < d.uxx.size(); ++k) d.uxx[k] -= b.uxx[k];
    for (std::size_t k = 0; k < d.uxxx.size(); ++k) d.uxxx[k] -= b.uxxx[k];
    return d;
}

StabilityReport stability_ratio(const InversionSetup& s) {
    const DifferenceSystem d = difference_system(s);
    StabilityReport rep;
    for (double v : d.f) rep.f_norm_sq += v * v * s.grid.dx();
    rep.trace_h1_sq = trace_h1_norm(extract_traces(d.y), s.grid.dt());
    rep.degenerate = !(rep.trace_h1_sq > 0.0);
    if (rep.degenerate) return rep;
    rep.ratio = rep.f_norm_sq / rep.trace_h1_sq;
    const BKReport bk = bk_identity(s, d);
    rep.J = bk.J;
    rep.imJ_lower_bound = bk.lower_bound;
    return rep;
}

LadderResult stability_ladder(const InversionSetup& base, const std::vector<double>& epsilons) {
    LadderResult res;
    res.rows.resize(epsilons.size());
    parallel_for(static_cast<int>(epsilons.size()), [&](int j) {
        InversionSetup s = base;
        const double eps = epsilons[static_cast<std::size_t>(j)];
        s.q = Potential::from_function(s.grid, [&](double x) {
            const double b = x * (1 - x);
            return eps * b * b;
        });
        for (std::size_t i = 0; i < s.q.values.size(); ++i) s.q.values[i] += base.p.values[i];
        res.rows[static_cast<std::size_t>(j)] = {eps, stability_ratio(s)};
    });
    double sx = 0, sy = 0, sxx = 0, sxy = 0, lo = std::numeric_limits<double>::infinity(), hi = 0;
    int n = 0;
    for (const auto& r : res.rows) {
        if (r.report.degenerate) continue;
        const double X = std::log(r.report.trace_h1_sq), Y = std::log(r.report.f_norm_sq);
        sx += X;
        sy += Y;
        sxx += X * X;
        sxy += X * Y;
        ++n;
        lo = std::min(lo, r.report.ratio);
        hi = std::max(hi, r.report.ratio);
    }
    if (n >= 2) res.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    res.ratio_spread = n >= 1 ? hi / lo : 0.0;
    return res;
}

BoundaryTrace boundary_data(const std::vector<cplx>& u0, const Potential& q, const Grid& g) {
    return extract_traces(solve(u0, q, g));
}

namespace {

// Residual whose squared norm is the reconstruction misfit.
Eigen::VectorXd misfit_vector(const BoundaryTrace& target, const BoundaryTrace& model, const Potential& q,
                              const Potential& p_init, double reg, const Grid& g) {
    const int N = g.n_t;
    const double dt = g.dt();
    const int per = 2 * (N + 1);
    const int n = g.n_x;
    Eigen::VectorXd r(2 * 2 * per + n);
    int o = 0;
    auto put = [&](const std::vector<cplx>& a, const std::vector<cplx>& b) {
        std::vector<cplx> d(a.size());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = a[k] - b[k];
        for (int k = 0; k <= N; ++k) {
            const double sw = std::sqrt((k == 0 || k == N) ? 0.5 * dt : dt);
            const auto K = static_cast<std::size_t>(k);
            cplx dtv;
            if (k == 0)
                dtv = (-3.0 * d[0] + 4.0 * d[1] - d[2]) / (2 * dt);
            else if (k == N)
                dtv = (3.0 * d[K] - 4.0 * d[K - 1] + d[K - 2]) / (2 * dt);
            else
                dtv = (d[K + 1] - d[K - 1]) / (2 * dt);
            r[o + 2 * k] = sw * d[K].real();
            r[o + 2 * k + 1] = sw * d[K].imag();
            r[o + per + 2 * k] = sw * dtv.real();
            r[o + per + 2 * k + 1] = sw * dtv.imag();
        }
        o += 2 * per;
    };
    put(model.uxx, target.uxx);
    put(model.uxxx, target.uxxx);
    const double sr = std::sqrt(reg * g.dx());
    for (int i = 0; i < n; ++i)
        r[o + i] = sr * (q.values[static_cast<std::size_t>(i)] - p_init.values[static_cast<std::size_t>(i)]);
    return r;
}

}  // namespace

double reconstruction_misfit(const BoundaryTrace& target, const BoundaryTrace& model, const Potential& q,
                             const Potential& p_init, double reg, const Grid& g) {
    return misfit_vector(target, model, q, p_init, reg, g).squaredNorm();
}

double relative_l2_error(const Potential& a, const Potential& ref) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
        num += (a.values[i] - ref.values[i]) * (a.values[i] - ref.values[i]);
        den += ref.values[i] * ref.values[i];
    }
    return std::sqrt(num / den);
}

ReconstructionResult reconstruct_potential(const BoundaryTrace& target, const std::vector<cplx>& u0,
                                           const Potential& p_init, double reg, const Grid& g,
                                           const ReconstructionOptions& opt, const Potential* q_true) {
    if (!(reg >= 0)) throw DomainError("reconstruct_potential: reg must be nonnegative");
    if (static_cast<int>(target.uxx.size()) != g.n_t + 1 || static_cast<int>(target.uxxx.size()) != g.n_t + 1)
        throw DomainError("reconstruct_potential: target traces do not match the grid");
    const int n = g.n_x;
    auto residual = [&](const Potential& q) {
        return misfit_vector(target, boundary_data(u0, q, g), q, p_init, reg, g);
    };
    const double tol = opt.rel_tolerance * trace_h1_norm(target, g.dt());

    ReconstructionResult res;
    res.q = p_init;
    Eigen::VectorXd r = residual(res.q);
    double m = r.squaredNorm();
    auto record = [&](int it, double alpha, double damping) {
        ReconstructionStep s;
        s.iteration = it;
        s.misfit = m;
        s.step_length = alpha;
        s.damping = damping;
        if (q_true) s.rel_error = relative_l2_error(res.q, *q_true);
        res.history.push_back(s);
    };
    record(0, 0.0, 0.0);
    if (m <= tol) {
        res.converged = true;
        res.message = "initial guess fits the data";
        return res;
    }
    double damping = opt.initial_damping;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::MatrixXd Jm(r.size(), n);
        parallel_for(n, [&](int j) {
            Potential qq = res.q;
            qq.values[static_cast<std::size_t>(j)] += opt.fd_step;
            Jm.col(j) = (residual(qq) - r) / opt.fd_step;
        });
        auto try_step = [&](const Eigen::VectorXd& step, double alpha, Potential& trial, Eigen::VectorXd& rn) {
            trial = res.q;
            for (int i = 0; i < n; ++i) trial.values[static_cast<std::size_t>(i)] += alpha * step[i];
            rn = residual(trial);
            const double mn = rn.squaredNorm();
            return std::isfinite(mn) && mn <= m;
        };
        Potential trial;
        Eigen::VectorXd rn;
        bool accepted = false;
        double alpha = 1.0, used_damping = 0.0;
        if (opt.control == StepControl::LineSearch) {
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Jm);
            cod.setThreshold(opt.rank_threshold);
            const Eigen::VectorXd step = cod.solve(-r);
            for (; alpha >= opt.min_step; alpha *= 0.5)
                if ((accepted = try_step(step, alpha, trial, rn))) break;
        } else {
            const Eigen::MatrixXd JtJ = Jm.transpose() * Jm;
            const Eigen::VectorXd grad = Jm.transpose() * r;
            const double scale = JtJ.trace() / n;
            for (; damping <= opt.max_damping; damping *= 4.0) {
                Eigen::MatrixXd A = JtJ;
                A.diagonal().array() += damping * scale;
                const Eigen::VectorXd step = A.ldlt().solve(-grad);
                if ((accepted = try_step(step, 1.0, trial, rn))) break;
            }
            used_damping = damping;
            damping = std::max(damping / 3.0, 1e-12);
        }
        if (!accepted) {
            if (opt.control == StepControl::Damped) {
                res.converged = true;
                res.message = "no decreasing step at maximal damping; misfit stationary";
            } else {
                res.warning = true;
                res.message = "line search failed at iteration " + std::to_string(it);
            }
            return res;
        }
        const double mn = rn.squaredNorm();
        const double drop = (m - mn) / m;
        res.q = trial;
        r = rn;
        m = mn;
        record(it, alpha, used_damping);
        if (m <= tol) {
            res.converged = true;
            res.message = "misfit below tolerance";
            return res;
        }
        if (drop < opt.stall_tolerance) {
            res.converged = true;
            res.message = "misfit stationary";
            return res;
        }
    }
    res.warning = true;
    res.message = "iteration cap reached";
    return res;
}

}  // namespace schro4
