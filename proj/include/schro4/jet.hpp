// Bivariate truncated Taylor series in (x, t).
//
// A Jet2 of orders (Kx, Kt) at base point (t0, x0) stores
//   c[j][k] = d^j/dx^j d^k/dt^k f(t0, x0) / (j! k!)
// for 0 <= j <= Kx, 0 <= k <= Kt.  Products are truncated Cauchy products.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace schro4 {

using cplx = std::complex<double>;

class JetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}
template <class S>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};
}  // namespace detail

template <class S>
class Jet2 {
public:
    using value_type = S;

    Jet2() = default;
    Jet2(int kx, int kt, double t0, double x0)
        : kx_(kx), kt_(kt), t0_(t0), x0_(x0),
          c_(static_cast<std::size_t>((kx + 1) * (kt + 1)), S{}) {
        if (kx < 0 || kt < 0) throw JetError("negative jet order");
    }

    static Jet2 constant(S value, int kx, int kt, double t0, double x0) {
        Jet2 j(kx, kt, t0, x0);
        j.at(0, 0) = value;
        return j;
    }
    // The coordinate function x (or t) expanded at the base point.
    static Jet2 var_x(int kx, int kt, double t0, double x0) {
        Jet2 j(kx, kt, t0, x0);
        j.at(0, 0) = S(x0);
        if (kx >= 1) j.at(1, 0) = S(1);
        return j;
    }
    static Jet2 var_t(int kx, int kt, double t0, double x0) {
        Jet2 j(kx, kt, t0, x0);
        j.at(0, 0) = S(t0);
        if (kt >= 1) j.at(0, 1) = S(1);
        return j;
    }
    Jet2 like(S value = S{}) const { return constant(value, kx_, kt_, t0_, x0_); }

    int kx() const { return kx_; }
    int kt() const { return kt_; }
    double t0() const { return t0_; }
    double x0() const { return x0_; }
    std::size_t size() const { return c_.size(); }

    S& at(int j, int k) { return c_[idx(j, k)]; }
    const S& at(int j, int k) const { return c_[idx(j, k)]; }
    S value() const { return c_[0]; }
    // d^j/dx^j d^k/dt^k at the base point.
    S derivative(int j, int k) const {
        return at(j, k) * (detail::factorial(j) * detail::factorial(k));
    }

    // Jet of d^n f / dx^n; the x-order drops by n.
    Jet2 dx(int n = 1) const {
        if (n > kx_) throw JetError("dx: jet order exhausted");
        Jet2 r(kx_ - n, kt_, t0_, x0_);
        for (int j = 0; j <= r.kx_; ++j) {
            double f = detail::factorial(j + n) / detail::factorial(j);
            for (int k = 0; k <= kt_; ++k) r.at(j, k) = at(j + n, k) * f;
        }
        return r;
    }
    Jet2 dt(int n = 1) const {
        if (n > kt_) throw JetError("dt: jet order exhausted");
        Jet2 r(kx_, kt_ - n, t0_, x0_);
        for (int k = 0; k <= r.kt_; ++k) {
            double f = detail::factorial(k + n) / detail::factorial(k);
            for (int j = 0; j <= kx_; ++j) r.at(j, k) = at(j, k + n) * f;
        }
        return r;
    }
    Jet2 d(int nx, int nt) const { return dx(nx).dt(nt); }

    Jet2 truncated(int kx, int kt) const {
        if (kx > kx_ || kt > kt_) throw JetError("truncated: cannot raise order");
        Jet2 r(kx, kt, t0_, x0_);
        for (int j = 0; j <= kx; ++j)
            for (int k = 0; k <= kt; ++k) r.at(j, k) = at(j, k);
        return r;
    }

    Jet2 conj() const {
        Jet2 r = *this;
        if constexpr (detail::is_complex<S>::value)
            for (auto& v : r.c_) v = std::conj(v);
        return r;
    }

    template <class U>
    Jet2<U> cast() const {
        Jet2<U> r(kx_, kt_, t0_, x0_);
        for (int j = 0; j <= kx_; ++j)
            for (int k = 0; k <= kt_; ++k) r.at(j, k) = U(at(j, k));
        return r;
    }

    double max_abs() const {
        double m = 0;
        for (const auto& v : c_) m = std::max(m, static_cast<double>(std::abs(v)));
        return m;
    }

    bool same_point(double t0, double x0) const { return t0 == t0_ && x0 == x0_; }

    Jet2 operator-() const {
        Jet2 r = *this;
        for (auto& v : r.c_) v = -v;
        return r;
    }
    Jet2& operator*=(S s) {
        for (auto& v : c_) v *= s;
        return *this;
    }

private:
    std::size_t idx(int j, int k) const {
        if (j < 0 || j > kx_ || k < 0 || k > kt_)
            throw JetError("jet index (" + std::to_string(j) + "," + std::to_string(k) +
                           ") outside orders (" + std::to_string(kx_) + "," +
                           std::to_string(kt_) + ")");
        return static_cast<std::size_t>(j * (kt_ + 1) + k);
    }

    int kx_ = 0, kt_ = 0;
    double t0_ = 0, x0_ = 0;
    std::vector<S> c_;
};

using RJet = Jet2<double>;
using CJet = Jet2<cplx>;

namespace detail {
template <class A, class B>
void check_point(const Jet2<A>& a, const Jet2<B>& b) {
    if (!a.same_point(b.t0(), b.x0())) throw JetError("jet base points differ");
}
template <class A, class B>
void check_orders(const Jet2<A>& a, const Jet2<B>& b) {
    check_point(a, b);
    if (a.kx() != b.kx() || a.kt() != b.kt()) throw JetError("jet orders differ");
}
template <class A, class B>
using prod_t = decltype(std::declval<A>() * std::declval<B>());

template <class R, class A, class B>
Jet2<R> add_impl(const Jet2<A>& a, const Jet2<B>& b, double sign) {
    int kx = std::min(a.kx(), b.kx()), kt = std::min(a.kt(), b.kt());
    Jet2<R> r(kx, kt, a.t0(), a.x0());
    for (int j = 0; j <= kx; ++j)
        for (int k = 0; k <= kt; ++k) r.at(j, k) = R(a.at(j, k)) + sign * R(b.at(j, k));
    return r;
}
template <class R, class A, class B>
Jet2<R> mul_impl(const Jet2<A>& a, const Jet2<B>& b) {
    int kx = std::min(a.kx(), b.kx()), kt = std::min(a.kt(), b.kt());
    Jet2<R> r(kx, kt, a.t0(), a.x0());
    for (int j = 0; j <= kx; ++j)
        for (int k = 0; k <= kt; ++k) {
            R s{};
            for (int i = 0; i <= j; ++i)
                for (int m = 0; m <= k; ++m) s += R(a.at(i, m)) * R(b.at(j - i, k - m));
            r.at(j, k) = s;
        }
    return r;
}
}  // namespace detail

// Strict arithmetic: operands must share base point and orders.
template <class S>
Jet2<S> jet_add(const Jet2<S>& a, const Jet2<S>& b) {
    detail::check_orders(a, b);
    return detail::add_impl<S>(a, b, 1.0);
}
template <class S>
Jet2<S> jet_mul(const Jet2<S>& a, const Jet2<S>& b) {
    detail::check_orders(a, b);
    return detail::mul_impl<S>(a, b);
}

// Operator forms truncate to the common (smaller) orders, which is what
// expressions mixing differentiated jets need.
template <class A, class B>
auto operator+(const Jet2<A>& a, const Jet2<B>& b) {
    detail::check_point(a, b);
    return detail::add_impl<detail::prod_t<A, B>>(a, b, 1.0);
}
template <class A, class B>
auto operator-(const Jet2<A>& a, const Jet2<B>& b) {
    detail::check_point(a, b);
    return detail::add_impl<detail::prod_t<A, B>>(a, b, -1.0);
}
template <class A, class B>
auto operator*(const Jet2<A>& a, const Jet2<B>& b) {
    detail::check_point(a, b);
    return detail::mul_impl<detail::prod_t<A, B>>(a, b);
}

template <class S, class T, class = std::enable_if_t<std::is_arithmetic_v<T> || detail::is_complex<T>::value>>
auto operator*(const Jet2<S>& a, T s) {
    using R = detail::prod_t<S, T>;
    Jet2<R> r = a.template cast<R>();
    r *= R(s);
    return r;
}
template <class S, class T, class = std::enable_if_t<std::is_arithmetic_v<T> || detail::is_complex<T>::value>>
auto operator*(T s, const Jet2<S>& a) {
    return a * s;
}
template <class S, class T, class = std::enable_if_t<std::is_arithmetic_v<T> || detail::is_complex<T>::value>>
auto operator+(const Jet2<S>& a, T s) {
    using R = detail::prod_t<S, T>;
    Jet2<R> r = a.template cast<R>();
    r.at(0, 0) += R(s);
    return r;
}
template <class S, class T, class = std::enable_if_t<std::is_arithmetic_v<T> || detail::is_complex<T>::value>>
auto operator+(T s, const Jet2<S>& a) {
    return a + s;
}
template <class S, class T, class = std::enable_if_t<std::is_arithmetic_v<T> || detail::is_complex<T>::value>>
auto operator-(const Jet2<S>& a, T s) {
    return a + (-s);
}
template <class S, class T, class = std::enable_if_t<std::is_arithmetic_v<T> || detail::is_complex<T>::value>>
auto operator-(T s, const Jet2<S>& a) {
    return (-a) + s;
}

template <class S>
Jet2<S> pow(const Jet2<S>& a, int n) {
    if (n < 0) throw JetError("pow: negative exponent");
    Jet2<S> r = a.like(S(1));
    for (int i = 0; i < n; ++i) r = r * a;
    return r;
}

// exp(f) via (exp f)_t = f_t exp f on the t = t0 line, then
// (exp f)_x = f_x exp f for the remaining rows.
template <class S>
Jet2<S> jet_exp(const Jet2<S>& a) {
    const int kx = a.kx(), kt = a.kt();
    Jet2<S> g(kx, kt, a.t0(), a.x0());
    g.at(0, 0) = std::exp(a.at(0, 0));
    for (int k = 1; k <= kt; ++k) {
        S s{};
        for (int m = 1; m <= k; ++m) s += double(m) * a.at(0, m) * g.at(0, k - m);
        g.at(0, k) = s / double(k);
    }
    for (int j = 1; j <= kx; ++j)
        for (int k = 0; k <= kt; ++k) {
            S s{};
            for (int i = 1; i <= j; ++i)
                for (int m = 0; m <= k; ++m) s += double(i) * a.at(i, m) * g.at(j - i, k - m);
            g.at(j, k) = s / double(j);
        }
    return g;
}

template <class S>
Jet2<S> jet_recip(const Jet2<S>& a) {
    const S a0 = a.at(0, 0);
    if (a0 == S{}) throw JetError("jet_recip: zero value coefficient");
    const int kx = a.kx(), kt = a.kt();
    Jet2<S> h(kx, kt, a.t0(), a.x0());
    for (int j = 0; j <= kx; ++j)
        for (int k = 0; k <= kt; ++k) {
            S s = (j == 0 && k == 0) ? S(1) : S{};
            for (int i = 0; i <= j; ++i)
                for (int m = 0; m <= k; ++m) {
                    if (i == 0 && m == 0) continue;
                    s -= a.at(i, m) * h.at(j - i, k - m);
                }
            h.at(j, k) = s / a0;
        }
    return h;
}

inline RJet re(const CJet& a) {
    RJet r(a.kx(), a.kt(), a.t0(), a.x0());
    for (int j = 0; j <= a.kx(); ++j)
        for (int k = 0; k <= a.kt(); ++k) r.at(j, k) = a.at(j, k).real();
    return r;
}
inline RJet im(const CJet& a) {
    RJet r(a.kx(), a.kt(), a.t0(), a.x0());
    for (int j = 0; j <= a.kx(); ++j)
        for (int k = 0; k <= a.kt(); ++k) r.at(j, k) = a.at(j, k).imag();
    return r;
}

}  // namespace schro4
