#pragma once

// Log-domain special functions shared by the rate and kernel code.
// Everything here is pure and thread-safe for positive arguments.

#include <cmath>
#include <stdexcept>
#include <string>

namespace coalsim {

// Thrown when an iterative numeric routine fails to reach its target
// tolerance. `achieved` carries the best error estimate at bail-out.
struct numeric_error : std::runtime_error {
    double achieved;
    numeric_error(const std::string& what, double achieved_tol)
        : std::runtime_error(what + " (achieved tolerance " +
                             std::to_string(achieved_tol) + ")"),
          achieved(achieved_tol) {}
};

inline double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
    return std::lgamma(x);
}

inline double log_beta(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

// log C(n, k) for integer 0 <= k <= n. Arguments pass through lgamma, so
// n up to ~1e15 is exact to double rounding.
inline double log_choose(double n, double k) {
    if (k < 0 || k > n) throw std::domain_error("log_choose: need 0 <= k <= n");
    return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

inline double harmonic(int n) {
    double h = 0.0;
    for (int i = 1; i <= n; ++i) h += 1.0 / i;
    return h;
}

namespace detail {

// Continued fraction for the regularized incomplete beta, modified
// Lentz scheme. Requires x < (a+1)/(a+b+2) for fast convergence; the
// caller flips via the symmetry identity otherwise.
inline double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 400;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw numeric_error("incomplete beta continued fraction stalled", eps);
}

} // namespace detail

// Regularized incomplete beta I_x(a,b) = P(Beta(a,b) <= x).
// Exact saturation to 0/1 through exp underflow is intended behavior
// for extreme parameter/argument combinations.
inline double inc_beta_reg(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw std::domain_error("inc_beta_reg: shape parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln_front) * detail::beta_cf(a, b, x) / a;
    return 1.0 - std::exp(ln_front) * detail::beta_cf(b, a, 1.0 - x) / b;
}

} // namespace coalsim
