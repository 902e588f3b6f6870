#pragma once

// Adaptive Gauss-Kronrod 7-15 integration plus endpoint power
// substitutions. The substitutions are what make the x^(p-1) and
// (1-x)^(q-1) endpoint singularities of collision-rate and Laplace
// exponent integrands cheap: they map the singular factor away so the
// panel integrand is smooth and the panel count stays small.

#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

#include "coalsim/special.hpp"

namespace coalsim {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;     // accumulated error estimate, absolute
    int evaluations = 0;
};

namespace detail {

// 15-point Kronrod extension of 7-point Gauss on [-1,1].
inline constexpr double gk_nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double gk_wk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double gk_wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

} // namespace detail

// Integrate f over [a,b] to relative tolerance rel_tol. Worst panels are
// bisected first; failure to converge within max_panels throws
// numeric_error carrying the achieved relative error.
template <class F>
inline QuadratureResult integrate_adaptive(const F& f, double a, double b,
                                           double rel_tol = 1e-10,
                                           int max_panels = 4000) {
    QuadratureResult out;
    if (a == b) return out;

    auto eval_panel = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double resk = 0.0, resg = 0.0;
        for (int i = 0; i < 7; ++i) {
            const double dx = h * detail::gk_nodes[i];
            const double fv = f(c - dx) + f(c + dx);
            if (!std::isfinite(fv))
                throw numeric_error("non-finite integrand value", 1.0);
            resk += detail::gk_wk[i] * fv;
            if (i % 2 == 1) resg += detail::gk_wg[i / 2] * fv;
        }
        const double fc = f(c);
        if (!std::isfinite(fc))
            throw numeric_error("non-finite integrand value", 1.0);
        resk += detail::gk_wk[7] * fc;
        resg += detail::gk_wg[3] * fc;
        out.evaluations += 15;
        const double err = std::fabs(resk - resg) * h;
        return detail::Panel{lo, hi, resk * h, err};
    };

    std::priority_queue<detail::Panel> panels;
    panels.push(eval_panel(a, b));
    double total = panels.top().value, total_err = panels.top().error;
    int count = 1;
    while (total_err > rel_tol * std::fabs(total) && total_err > 1e-305) {
        if (count >= max_panels)
            throw numeric_error("adaptive quadrature did not converge",
                                total_err / std::max(std::fabs(total), 1e-300));
        detail::Panel worst = panels.top();
        panels.pop();
        total -= worst.value;
        total_err -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b)
            throw numeric_error("panel width exhausted double precision",
                                total_err / std::max(std::fabs(total), 1e-300));
        detail::Panel left = eval_panel(worst.a, mid);
        detail::Panel right = eval_panel(mid, worst.b);
        total += left.value + right.value;
        total_err += left.error + right.error;
        panels.push(left);
        panels.push(right);
        ++count;
    }
    out.value = total;
    out.error = total_err;
    return out;
}

// Integral over [0, upper] of x^(p-1) * g(x) dx with g bounded at 0 and
// p > 0. Substituting w = x^p removes the endpoint singularity:
//   (1/p) * integral over [0, upper^p] of g(w^(1/p)) dw.
template <class G>
inline QuadratureResult integrate_power_zero(const G& g, double p, double upper,
                                             double rel_tol = 1e-10) {
    if (!(p > 0.0)) throw std::domain_error("integrate_power_zero: p must be > 0");
    if (upper <= 0.0) return {};
    const double inv_p = 1.0 / p;
    auto h = [&](double w) { return g(std::pow(w, inv_p)); };
    QuadratureResult r = integrate_adaptive(h, 0.0, std::pow(upper, p), rel_tol);
    r.value *= inv_p;
    r.error *= inv_p;
    return r;
}

// Integral over [lo, 1] of (1-x)^(q-1) * h(x) dx with h bounded at 1 and
// q > 0, by the mirrored substitution w = (1-x)^q.
template <class H>
inline QuadratureResult integrate_power_one(const H& h, double q, double lo,
                                            double rel_tol = 1e-10) {
    if (!(q > 0.0)) throw std::domain_error("integrate_power_one: q must be > 0");
    if (lo >= 1.0) return {};
    const double inv_q = 1.0 / q;
    auto g = [&](double w) { return h(1.0 - std::pow(w, inv_q)); };
    QuadratureResult r = integrate_adaptive(g, 0.0, std::pow(1.0 - lo, q), rel_tol);
    r.value *= inv_q;
    r.error *= inv_q;
    return r;
}

// Integral over [0, hi] of x^(p-1) * (1-x)^(q-1) * g(x) dx, hi <= 1.
// Split at hi/2 so each endpoint substitution sees only its own
// singular factor; the opposite factor is folded into the panel
// integrand where it is smooth.
template <class G>
inline QuadratureResult integrate_beta_weighted(const G& g, double p, double q,
                                                double hi = 1.0,
                                                double rel_tol = 1e-10) {
    if (hi <= 0.0) return {};
    const double mid = 0.5 * hi;
    auto left_g = [&](double x) {
        return std::pow(1.0 - x, q - 1.0) * g(x);
    };
    QuadratureResult left = integrate_power_zero(left_g, p, mid, rel_tol);
    auto right_h = [&](double x) {
        return std::pow(x, p - 1.0) * g(x);
    };
    QuadratureResult right =
        hi >= 1.0 ? integrate_power_one(right_h, q, mid, rel_tol)
                  : [&] {
                        auto plain = [&](double x) {
                            return std::pow(x, p - 1.0) *
                                   std::pow(1.0 - x, q - 1.0) * g(x);
                        };
                        return integrate_adaptive(plain, mid, hi, rel_tol);
                    }();
    QuadratureResult out;
    out.value = left.value + right.value;
    out.error = left.error + right.error;
    out.evaluations = left.evaluations + right.evaluations;
    return out;
}

} // namespace coalsim
