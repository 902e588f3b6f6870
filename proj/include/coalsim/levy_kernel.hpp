#pragma once

// Laplace-exponent machinery for a measure Lambda:
//
//   psi(q)  = integral of (e^(-qx) - 1 + qx) x^(-2) dLambda(x)
//   tail(s) = integral of dq/psi(q) over [s, infinity)
//   v(t)    = inf { s : tail(s) < t }      (speed of descent)
//   t_n     = tail(n)                      (time to reach level n)
//
// tail() converging at infinity is exactly the coming-down-from-infinity
// criterion; every s-addressed operation requires it. Measures with a
// regular-variation tag get closed-form handling of the q > q_switch
// region, validated against the numeric psi at the switch point during
// construction.

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "coalsim/measure.hpp"
#include "coalsim/quadrature.hpp"

namespace coalsim {

struct GreyResult {
    enum class Status { finite, infinite, undecidable };
    Status status = Status::undecidable;
    double value = 0.0;  // meaningful only when status == finite
};

namespace detail {

// (e^(-y) - 1 + y) / y^2, stable down to y = 0. The series cutoff at
// 1e-4 keeps the relative error below 1e-12 on both sides.
inline double h_rel(double y) {
    if (y < 1e-4) return 0.5 - y / 6.0 + y * y / 24.0;
    return (std::expm1(-y) + y) / (y * y);
}

} // namespace detail

class LevyKernel {
  public:
    explicit LevyKernel(LambdaMeasure measure, double quad_tol = 1e-10,
                        double q_switch = 1e8)
        : measure_(std::move(measure)),
          quad_tol_(quad_tol),
          q_switch_(q_switch),
          tail_cache_(std::make_shared<TailCache>()) {
        if (const auto& rv = measure_.regvar()) {
            const double a = rv->alpha;
            psi_tail_scale_ = rv->scale * std::tgamma(2.0 - a) / (a * (a - 1.0));
            // The closed-form tail is only trusted if the numeric psi has
            // actually entered its power regime at the switch point. The
            // genuine finite-q correction is of order q_switch^(1-alpha)
            // (the support cutoff and the density away from zero both
            // contribute linearly in q), so the gate scales with it; a tag
            // with the wrong exponent or scale still misses by orders of
            // magnitude. The check loses power as alpha approaches 1,
            // where the correction itself becomes order one.
            const double numeric = psi(q_switch_);
            const double asymptote = psi_tail_scale_ * std::pow(q_switch_, a);
            const double gate =
                std::max(1e-3, 10.0 * std::pow(q_switch_, 1.0 - a));
            if (std::fabs(numeric / asymptote - 1.0) > gate)
                throw numeric_error(
                    "psi power tail not reached at switch point; raise q_switch",
                    std::fabs(numeric / asymptote - 1.0));
        }
    }

    const LambdaMeasure& measure() const { return measure_; }

    // Scale of psi(q) ~ scale * q^alpha; only for tagged measures.
    double psi_tail_scale() const {
        if (!measure_.regvar())
            throw std::domain_error("psi_tail_scale: measure has no regular variation tag");
        return psi_tail_scale_;
    }

    double psi(double q) const {
        if (!(q >= 0.0)) throw std::domain_error("psi: need q >= 0");
        if (q == 0.0) return 0.0;
        if (measure_.kind() == MeasureKind::kingman)
            return 0.5 * measure_.total_mass() * q * q;
        const double cutoff = measure_.cutoff();
        // Split where the integrand changes character: below 1/q it is
        // ~ q^2/2 times the density, above it decays like q/x.
        const double x1 = std::min(1.0 / q, 0.5 * cutoff);
        double value = 0.0;
        if (measure_.closed_form()) {
            const double a = measure_.shape_a();
            const double b = measure_.shape_b();
            const double coeff = std::exp(measure_.log_coeff());
            auto left = [&](double x) {
                return coeff * q * q * detail::h_rel(q * x) *
                       std::pow(1.0 - x, b - 1.0);
            };
            value += integrate_power_zero(left, a, x1, quad_tol_).value;
            if (cutoff >= 1.0) {
                auto right = [&](double x) {
                    return coeff * q * q * detail::h_rel(q * x) *
                           std::pow(x, a - 1.0);
                };
                value += integrate_power_one(right, b, x1, quad_tol_).value;
            } else {
                auto mid = [&](double x) {
                    return coeff * q * q * detail::h_rel(q * x) *
                           std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0);
                };
                value += integrate_adaptive(mid, x1, cutoff, quad_tol_).value;
            }
        } else {
            const auto& spec = measure_.density();
            const double e = spec.zero_exponent;
            auto left = [&](double x) {
                const double ratio = x > 0.0 ? spec.f(x) * std::pow(x, -e)
                                             : spec.zero_coeff;
                return q * q * detail::h_rel(q * x) * ratio;
            };
            value += integrate_power_zero(left, e + 1.0, x1, quad_tol_).value;
            auto rest = [&](double x) {
                return q * q * detail::h_rel(q * x) * spec.f(x);
            };
            value += integrate_adaptive(rest, x1, cutoff, quad_tol_).value;
        }
        return value;
    }

    GreyResult grey_condition() const {
        GreyResult out;
        if (measure_.kind() == MeasureKind::kingman) {
            out.status = GreyResult::Status::finite;
            out.value = 2.0 / measure_.total_mass();
            return out;
        }
        if (measure_.known_cdi_fails()) {
            out.status = GreyResult::Status::infinite;
            return out;
        }
        if (measure_.regvar()) {
            out.status = GreyResult::Status::finite;
            out.value = tail_integral(1.0);
            return out;
        }
        // No tail information. psi(q)/q staying bounded certifies
        // divergence of the tail integral; anything else is left open.
        const double r_lo = psi(1e2) / 1e2;
        const double r_hi = psi(1e12) / 1e12;
        out.status = (r_hi / r_lo < 4.0) ? GreyResult::Status::infinite
                                         : GreyResult::Status::undecidable;
        return out;
    }

    // integral of dq/psi over [s, infinity). Requires a finite tail.
    double tail_integral(double s) const {
        if (!(s > 0.0)) throw std::domain_error("tail_integral: need s > 0");
        if (measure_.kind() == MeasureKind::kingman)
            return 2.0 / (measure_.total_mass() * s);
        require_regvar("tail_integral");
        const double alpha = measure_.regvar()->alpha;
        if (s >= q_switch_)
            return std::pow(s, 1.0 - alpha) / (psi_tail_scale_ * (alpha - 1.0));
        const TailCache& cache = tail_grid();
        // Grid index with node[j] = q_switch * step^-j >= s.
        const std::size_t j = std::min(
            cache.cumulative.size() - 1,
            static_cast<std::size_t>(
                std::floor(std::log(q_switch_ / s) / std::log(cache.step))));
        const double node = cache.nodes[j];
        return cache.cumulative[j] + segment_integral(s, node);
    }

    double t_n(double n) const {
        if (!(n >= 1.0)) throw std::domain_error("t_n: need n >= 1");
        return tail_integral(n);
    }

    // v(t) = inf{s : tail(s) < t}, bisected to relative width 1e-8.
    double speed_v(double t) const {
        if (!(t > 0.0)) throw std::domain_error("speed_v: need t > 0");
        if (measure_.kind() == MeasureKind::kingman)
            return 2.0 / (measure_.total_mass() * t);
        require_regvar("speed_v");
        const double alpha = measure_.regvar()->alpha;
        const double c = 1.0 / (psi_tail_scale_ * (alpha - 1.0));
        double guess = std::pow(c / t, 1.0 / (alpha - 1.0));
        double lo = std::max(guess / 4.0, 1e-300);
        double hi = std::max(2.0, 2.0 * guess);
        while (tail_integral(lo) < t) {
            hi = lo;
            lo *= 0.25;
            if (lo < 1e-290)
                throw numeric_error("speed_v: bracket collapsed toward zero", t);
        }
        while (tail_integral(hi) >= t) {
            lo = hi;
            hi *= 4.0;
            if (hi > 1e290)
                throw numeric_error("speed_v: bracket exceeded range", t);
        }
        while ((hi - lo) > 1e-8 * hi) {
            const double mid = 0.5 * (lo + hi);
            if (tail_integral(mid) >= t)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    // integral of q/psi(q) over [1, n]: the expected-length normalizer.
    double length_integral(double n) const {
        if (!(n >= 1.0)) throw std::domain_error("length_integral: need n >= 1");
        if (n == 1.0) return 0.0;
        if (measure_.kind() == MeasureKind::kingman)
            return 2.0 * std::log(n) / measure_.total_mass();
        const double upper = std::min(n, q_switch_);
        auto integrand = [&](double y) {
            const double q = std::exp(y);
            return q * q / psi(q);
        };
        double value =
            integrate_adaptive(integrand, 0.0, std::log(upper), 1e-9).value;
        if (n > q_switch_) {
            require_regvar("length_integral");
            const double alpha = measure_.regvar()->alpha;
            value += (std::pow(n, 2.0 - alpha) - std::pow(q_switch_, 2.0 - alpha)) /
                     (psi_tail_scale_ * (2.0 - alpha));
        }
        return value;
    }

  private:
    struct TailCache {
        std::mutex mutex;
        bool built = false;
        double step = 0.0;
        std::vector<double> nodes;       // q_switch * step^-j
        std::vector<double> cumulative;  // tail integral at nodes[j]
    };

    void require_regvar(const char* who) const {
        if (!measure_.regvar())
            throw std::domain_error(std::string(who) +
                                    ": requires a coming-down measure with tail info");
    }

    // integral of dq/psi over [s, e], log-substituted; s <= e <= q_switch.
    double segment_integral(double s, double e) const {
        if (s >= e) return 0.0;
        auto integrand = [&](double y) {
            const double q = std::exp(y);
            return q / psi(q);
        };
        return integrate_adaptive(integrand, std::log(s), std::log(e), 1e-9).value;
    }

    // Cumulative tail integrals on a descending geometric grid, built on
    // first use. Every entry is plain quadrature at the same tolerances
    // as a direct evaluation; the cache only avoids recomputing shared
    // upper segments, it never interpolates.
    const TailCache& tail_grid() const {
        TailCache& cache = *tail_cache_;
        std::lock_guard<std::mutex> lock(cache.mutex);
        if (!cache.built) {
            const double alpha = measure_.regvar()->alpha;
            cache.step = std::pow(10.0, 0.125);
            double tail = std::pow(q_switch_, 1.0 - alpha) /
                          (psi_tail_scale_ * (alpha - 1.0));
            double node = q_switch_;
            cache.nodes.push_back(node);
            cache.cumulative.push_back(tail);
            while (node > 1e-14) {
                const double next = node / cache.step;
                tail += segment_integral(next, node);
                node = next;
                cache.nodes.push_back(node);
                cache.cumulative.push_back(tail);
            }
            cache.built = true;
        }
        return cache;
    }

    LambdaMeasure measure_;
    double quad_tol_;
    double q_switch_;
    double psi_tail_scale_ = 0.0;
    std::shared_ptr<TailCache> tail_cache_;
};

} // namespace coalsim
