#pragma once

// Finite measures on [0,1] driving multiple-merger coalescent rates.
//
// With b lineages, any fixed k-subset merges at rate
//   lambda(b,k) = integral of x^(k-2) (1-x)^(b-k) dLambda(x).
// Representable measures are a unit-style atom at zero (pair mergers
// only), scaled Beta-family densities, the uniform density, a pure
// power density, a user-supplied density with small-x metadata, and any
// of these truncated to [0, 1-eta]. Nothing representable carries an
// atom at 1, and parameter validation rejects the degenerate shapes
// that would approximate one; sampling from such a measure would allow
// a single event to swallow every lineage almost surely.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coalsim/quadrature.hpp"
#include "coalsim/special.hpp"

namespace coalsim {

enum class MeasureKind { kingman, beta, uniform, density };

// f(x) ~ scale * x^(1 - alpha) as x -> 0 with alpha in (1,2). Measures
// carrying this tag admit the power-law kernel asymptotics and the
// closed-form tail handling in the Levy kernel.
struct RegularVariation {
    double alpha;
    double scale;
};

// User density on (0,1). zero_exponent / zero_coeff describe the leading
// behavior f(x) ~ zero_coeff * x^zero_exponent near 0; collision-rate
// integrals use them for the analytic piece below epsilon, so they must
// be the true leading term, not a bound.
struct DensitySpec {
    std::function<double(double)> f;
    double zero_exponent = 0.0;
    double zero_coeff = 1.0;
    std::string name = "custom";
};

class LambdaMeasure {
  public:
    static LambdaMeasure kingman(double mass = 1.0) {
        require_mass(mass);
        LambdaMeasure m(MeasureKind::kingman, mass);
        m.base_mass_ = mass;
        return m;
    }

    // mass * Beta(a,b) as a probability density; a in (0,1) yields
    // regular variation with index alpha = 2 - a.
    static LambdaMeasure beta_family(double a, double b, double mass = 1.0) {
        require_mass(mass);
        if (!(a > 0.0) || !(b > 0.0))
            throw std::domain_error("beta_family: shape parameters must be positive");
        LambdaMeasure m(MeasureKind::beta, mass);
        m.base_mass_ = mass;
        m.shape_a_ = a;
        m.shape_b_ = b;
        m.log_coeff_ = std::log(mass) - log_beta(a, b);
        m.closed_form_ = true;
        if (a < 1.0)
            m.regvar_ = RegularVariation{2.0 - a, mass / std::exp(log_beta(a, b))};
        return m;
    }

    // The standard one-parameter family Beta(2-alpha, alpha).
    static LambdaMeasure beta_coalescent(double alpha, double mass = 1.0) {
        if (!(alpha > 1.0) || !(alpha < 2.0))
            throw std::domain_error("beta_coalescent: alpha must lie in (1,2)");
        return beta_family(2.0 - alpha, alpha, mass);
    }

    static LambdaMeasure uniform(double mass = 1.0) {
        require_mass(mass);
        LambdaMeasure m(MeasureKind::uniform, mass);
        m.base_mass_ = mass;
        m.shape_a_ = 1.0;
        m.shape_b_ = 1.0;
        m.log_coeff_ = std::log(mass);
        m.closed_form_ = true;
        // Known classification: the uniform measure never comes down
        // from infinity, and the kernel module relies on this flag
        // because no numeric probe can certify it.
        m.known_cdi_fails_ = true;
        return m;
    }

    // f(x) = scale * x^(1-alpha) on (0,1]; total mass scale/(2-alpha).
    static LambdaMeasure power_density(double alpha, double scale) {
        if (!(alpha > 1.0) || !(alpha < 2.0))
            throw std::domain_error("power_density: alpha must lie in (1,2)");
        if (!(scale > 0.0))
            throw std::domain_error("power_density: scale must be positive");
        LambdaMeasure m(MeasureKind::beta, scale / (2.0 - alpha));
        m.base_mass_ = m.mass_;
        m.shape_a_ = 2.0 - alpha;
        m.shape_b_ = 1.0;
        m.log_coeff_ = std::log(scale);
        m.closed_form_ = true;
        m.regvar_ = RegularVariation{alpha, scale};
        return m;
    }

    static LambdaMeasure general_density(DensitySpec spec,
                                         std::optional<RegularVariation> regvar = {}) {
        if (!spec.f) throw std::domain_error("general_density: density is empty");
        if (spec.zero_exponent <= -1.0)
            throw std::domain_error(
                "general_density: not integrable near zero (exponent <= -1)");
        LambdaMeasure m(MeasureKind::density, 0.0);
        m.density_ = std::move(spec);
        m.regvar_ = regvar;
        m.mass_ = m.density_integral(0);
        m.base_mass_ = m.mass_;
        if (!std::isfinite(m.mass_) || !(m.mass_ > 0.0))
            throw std::domain_error("general_density: density mass is not finite and positive");
        return m;
    }

    MeasureKind kind() const { return kind_; }
    double total_mass() const { return mass_; }
    bool is_truncated() const { return cutoff_ < 1.0; }
    double cutoff() const { return cutoff_; }
    double truncation_eta() const { return 1.0 - cutoff_; }
    const std::optional<RegularVariation>& regvar() const { return regvar_; }
    bool closed_form() const { return closed_form_; }
    double shape_a() const { return shape_a_; }
    double shape_b() const { return shape_b_; }
    double log_coeff() const { return log_coeff_; }
    bool known_cdi_fails() const { return known_cdi_fails_; }
    std::uint64_t id() const { return id_; }
    const DensitySpec& density() const { return density_; }

    // Density value at an interior point, including the truncation
    // indicator. Undefined for the Kingman atom.
    double density_value(double x) const {
        if (kind_ == MeasureKind::kingman)
            throw std::domain_error("density_value: atom measure has no density");
        if (x <= 0.0 || x >= 1.0) return 0.0;
        if (x > cutoff_) return 0.0;
        if (closed_form_)
            return std::exp(log_coeff_ + (shape_a_ - 1.0) * std::log(x) +
                            (shape_b_ - 1.0) * std::log1p(-x));
        return density_.f(x);
    }

    // lambda(b,k): merger rate of one fixed k-subset out of b blocks.
    double collision_rate(int b, int k) const {
        if (b < 2) throw std::domain_error("collision_rate: need b >= 2");
        if (k < 2 || k > b) throw std::domain_error("collision_rate: need 2 <= k <= b");
        switch (kind_) {
            case MeasureKind::kingman:
                return k == 2 ? mass_ : 0.0;
            case MeasureKind::beta:
            case MeasureKind::uniform: {
                const double p = k - 2 + shape_a_;
                const double q = b - k + shape_b_;
                double rate = std::exp(log_coeff_ + log_beta(p, q));
                if (cutoff_ < 1.0) rate *= inc_beta_reg(p, q, cutoff_);
                return rate;
            }
            case MeasureKind::density:
                return density_integral(k - 2, b - k);
        }
        return 0.0;
    }

    // Truncation composes: the support only ever shrinks.
    LambdaMeasure truncated(double eta) const {
        if (!(eta >= 0.0) || !(eta < 1.0))
            throw std::domain_error("truncated: eta must lie in [0,1)");
        LambdaMeasure out(*this);
        out.id_ = next_id();
        out.cutoff_ = std::min(cutoff_, 1.0 - eta);
        if (out.cutoff_ == cutoff_) {
            out.mass_ = mass_;
            return out;
        }
        switch (kind_) {
            case MeasureKind::kingman:
                out.mass_ = mass_;  // the atom at 0 survives any cutoff
                break;
            case MeasureKind::beta:
            case MeasureKind::uniform:
                out.mass_ = std::exp(log_coeff_ + log_beta(shape_a_, shape_b_)) *
                            inc_beta_reg(shape_a_, shape_b_, out.cutoff_);
                break;
            case MeasureKind::density:
                out.mass_ = out.density_integral(0);
                break;
        }
        return out;
    }

  private:
    explicit LambdaMeasure(MeasureKind kind, double mass)
        : kind_(kind), mass_(mass), id_(next_id()) {}

    static void require_mass(double mass) {
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw std::domain_error("measure mass must be finite and positive");
    }

    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    // integral of x^xpow * (1-x)^ypow * f(x) over (0, cutoff] for the
    // general-density kind: analytic piece below epsilon from the
    // declared leading term, adaptive quadrature above it.
    double density_integral(int xpow, int ypow = 0) const {
        constexpr double eps = 1e-8;
        const double lead = xpow + density_.zero_exponent;
        if (lead <= -1.0)
            throw std::domain_error("density integral divergent near zero");
        double head = density_.zero_coeff * std::pow(eps, lead + 1.0) / (lead + 1.0);
        auto integrand = [&](double x) {
            double v = density_.f(x) * std::pow(x, double(xpow));
            if (ypow != 0) v *= std::pow(1.0 - x, double(ypow));
            return v;
        };
        QuadratureResult tail =
            integrate_adaptive(integrand, eps, cutoff_, 1e-10);
        return head + tail.value;
    }

    MeasureKind kind_;
    double mass_;
    double base_mass_ = 0.0;
    double shape_a_ = 0.0, shape_b_ = 0.0;
    double log_coeff_ = 0.0;        // log of the x^(a-1)(1-x)^(b-1) prefactor
    bool closed_form_ = false;
    double cutoff_ = 1.0;
    DensitySpec density_;
    std::optional<RegularVariation> regvar_;
    bool known_cdi_fails_ = false;
    std::uint64_t id_;
};

// All subset rates at one block count, log domain. Entry j holds
// log lambda(b, j+2) + log C(b, j+2), the total rate of mergers of that
// size; `total` is the linear-domain sum of all entries.
struct RateTable {
    int b = 0;
    std::vector<double> log_rates;  // size b-1, k = 2..b
    double total = 0.0;
};

inline double collision_rate(const LambdaMeasure& m, int b, int k) {
    return m.collision_rate(b, k);
}

inline LambdaMeasure truncate(const LambdaMeasure& m, double eta) {
    return m.truncated(eta);
}

inline RateTable build_rate_table(const LambdaMeasure& m, int b) {
    if (b < 2) throw std::domain_error("rate_table: need b >= 2");
    RateTable t;
    t.b = b;
    t.log_rates.resize(b - 1);
    double shift = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= b; ++k) {
        const double rate = m.collision_rate(b, k);
        const double lr = rate > 0.0 ? std::log(rate) + log_choose(b, k)
                                     : -std::numeric_limits<double>::infinity();
        t.log_rates[k - 2] = lr;
        if (lr > shift) shift = lr;
    }
    // Exponent-shifted summation keeps the total exact even when the
    // individual log rates span hundreds of orders of magnitude.
    double sum = 0.0;
    for (double lr : t.log_rates)
        if (lr > -std::numeric_limits<double>::infinity())
            sum += std::exp(lr - shift);
    t.total = std::exp(shift) * sum;
    return t;
}

// Inverse CDF over the exponent-normalized weights. Intervals are
// half-open with ties resolving to the lowest k, so u = 0 gives k = 2
// and u exactly on a boundary picks the lower of the two sizes.
inline int sample_merger_size(const RateTable& t, double u) {
    if (!(u >= 0.0) || !(u < 1.0))
        throw std::domain_error("sample_merger_size: u must lie in [0,1)");
    double shift = -std::numeric_limits<double>::infinity();
    for (double lr : t.log_rates)
        if (lr > shift) shift = lr;
    double sum = 0.0;
    for (double lr : t.log_rates)
        if (lr > -std::numeric_limits<double>::infinity())
            sum += std::exp(lr - shift);
    const double threshold = u * sum;
    double cum = 0.0;
    for (int k = 2; k <= t.b; ++k) {
        const double lr = t.log_rates[k - 2];
        if (lr > -std::numeric_limits<double>::infinity())
            cum += std::exp(lr - shift);
        if (cum >= threshold && cum > 0.0) return k;
    }
    return t.b;
}

// Memoized rate-table lookup keyed by (measure identity, b). Eviction is
// least-recently-used; concurrent lookups may rebuild the same table but
// always return values equal to a fresh computation.
class RateTableCache {
  public:
    explicit RateTableCache(std::size_t capacity = 4096) : capacity_(capacity) {}

    std::shared_ptr<const RateTable> get(const LambdaMeasure& m, int b) {
        const Key key{m.id(), b};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = map_.find(key);
            if (it != map_.end()) {
                order_.splice(order_.begin(), order_, it->second.second);
                return it->second.first;
            }
        }
        auto table = std::make_shared<const RateTable>(build_rate_table(m, b));
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = map_.find(key);
        if (it != map_.end()) return it->second.first;
        order_.push_front(key);
        map_.emplace(key, std::make_pair(table, order_.begin()));
        if (map_.size() > capacity_) {
            map_.erase(order_.back());
            order_.pop_back();
        }
        return table;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return map_.size();
    }

  private:
    struct Key {
        std::uint64_t id;
        int b;
        bool operator==(const Key& o) const { return id == o.id && b == o.b; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return std::hash<std::uint64_t>()(k.id * 1000003ull +
                                              static_cast<std::uint64_t>(k.b));
        }
    };

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<Key> order_;
    std::unordered_map<Key, std::pair<std::shared_ptr<const RateTable>,
                                      std::list<Key>::iterator>,
                       KeyHash>
        map_;
};

inline RateTableCache& global_rate_cache() {
    static RateTableCache cache;
    return cache;
}

inline std::shared_ptr<const RateTable> rate_table(const LambdaMeasure& m, int b) {
    return global_rate_cache().get(m, b);
}

} // namespace coalsim
