#pragma once

// Closed-form limit predictions for measures whose density varies
// regularly at zero, f(x) ~ A x^(1-alpha) with alpha in (1,2).
//
// Everything is parameterized by (alpha, A, theta). The derived
// constants:
//   B         = alpha(alpha-1) / (A Gamma(2-alpha) (2-alpha))
//   c         = alpha / (A Gamma(2-alpha))
//   alpha_bar = (2-alpha)/(alpha-1)
//   C         = (theta B / Gamma(alpha-1))^(1/(2-alpha))
//   c_k       = (2-alpha) Gamma(k+alpha-2) / (k! Gamma(alpha-1))
// B and c are tied by B = c (alpha-1)/(2-alpha); the c_k sum to one and
// their tails have the closed form cbar_k = Gamma(k+alpha-2) /
// (Gamma(alpha-1) (k-1)!), which is what makes tail checks feasible:
// near alpha = 2 the direct sum would need astronomically many terms.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "coalsim/measure.hpp"
#include "coalsim/special.hpp"

namespace coalsim {

class PredictionSet {
  public:
    PredictionSet(double alpha, double scale, double theta, int kmax = 64)
        : alpha_(alpha), scale_(scale), theta_(theta) {
        if (!(alpha > 1.0) || !(alpha < 2.0))
            throw std::domain_error("PredictionSet: alpha must lie in (1,2)");
        if (!(scale > 0.0))
            throw std::domain_error("PredictionSet: scale must be positive");
        if (!(theta >= 0.0))
            throw std::domain_error("PredictionSet: theta must be >= 0");
        if (kmax < 1) throw std::domain_error("PredictionSet: kmax must be >= 1");
        const double g2a = std::tgamma(2.0 - alpha);
        c_ = alpha / (scale * g2a);
        B_ = c_ * (alpha - 1.0) / (2.0 - alpha);
        alpha_bar_ = (2.0 - alpha) / (alpha - 1.0);
        C_ = theta > 0.0
                 ? std::pow(theta * B_ / std::tgamma(alpha - 1.0),
                            1.0 / (2.0 - alpha))
                 : 0.0;
        ck_.resize(kmax);
        ck_[0] = 2.0 - alpha;
        for (int k = 1; k < kmax; ++k)
            ck_[k] = ck_[k - 1] * (k + alpha - 2.0) / (k + 1.0);
    }

    static PredictionSet for_measure(const LambdaMeasure& m, double theta,
                                     int kmax = 64) {
        if (!m.regvar())
            throw std::domain_error(
                "PredictionSet: measure carries no regular variation tag");
        return PredictionSet(m.regvar()->alpha, m.regvar()->scale, theta, kmax);
    }

    double alpha() const { return alpha_; }
    double scale() const { return scale_; }
    double theta() const { return theta_; }
    double B() const { return B_; }
    double c() const { return c_; }
    double alpha_bar() const { return alpha_bar_; }
    double C() const { return C_; }
    int kmax() const { return static_cast<int>(ck_.size()); }

    double c_k(int k) const {
        if (k < 1 || k > kmax())
            throw std::domain_error("c_k: k out of stored range");
        return ck_[k - 1];
    }

    // Tail sum of the c_k from k on, in closed form; cbar(1) = 1.
    double cbar(int k) const {
        if (k < 1) throw std::domain_error("cbar: need k >= 1");
        return std::exp(log_gamma(k + alpha_ - 2.0) - log_gamma(alpha_ - 1.0) -
                        log_gamma(double(k)));
    }

    // Leading-order segregating sites and allele counts at sample size n.
    struct Counts {
        double sites;
        double alleles;
    };
    Counts predict_counts(double n) const {
        require_n(n);
        const double v = theta_ * B_ * std::pow(n, 2.0 - alpha_);
        return {v, v};
    }

    // Expected M_k and F_k, k = 1..kmax: both theta B c_k n^(2-alpha).
    std::vector<double> predict_spectrum(double n, int kmax) const {
        require_n(n);
        if (kmax < 1 || kmax > this->kmax())
            throw std::domain_error("predict_spectrum: kmax out of range");
        std::vector<double> out(kmax);
        const double lead = theta_ * B_ * std::pow(n, 2.0 - alpha_);
        for (int k = 1; k <= kmax; ++k) out[k - 1] = lead * ck_[k - 1];
        return out;
    }

    // Sorted allele frequency at rank j: C j^(-1/(2-alpha)).
    double predict_allele_frequency(double j) const {
        if (!(j >= 1.0))
            throw std::domain_error("predict_allele_frequency: need j >= 1");
        return C_ * std::pow(j, -1.0 / (2.0 - alpha_));
    }

    // Limit law of the scaled age of a random mutation:
    //   X = c (U^(-(alpha-1)/(2-alpha)) - 1),  U uniform on (0,1).
    double mn_limit_quantile(double u) const {
        if (!(u >= 0.0) || !(u < 1.0))
            throw std::domain_error("mn_limit_quantile: u must lie in [0,1)");
        const double beta = (alpha_ - 1.0) / (2.0 - alpha_);
        return c_ * (std::pow(1.0 - u, -beta) - 1.0);
    }

    double mn_limit_cdf(double x) const {
        if (x <= 0.0) return 0.0;
        const double beta = (alpha_ - 1.0) / (2.0 - alpha_);
        return 1.0 - std::pow(1.0 + x / c_, -1.0 / beta);
    }

    // Mean of the limit law, finite only for alpha < 3/2:
    // E X = c beta/(1-beta) with beta = (alpha-1)/(2-alpha).
    double mn_limit_mean() const {
        const double beta = (alpha_ - 1.0) / (2.0 - alpha_);
        if (!(beta < 1.0))
            throw std::domain_error("mn_limit_mean: infinite for alpha >= 3/2");
        return c_ * beta / (1.0 - beta);
    }

    // Normalizing scale g(n) for the mean age of a random mutation.
    // The regime splits at alpha = 3/2 and the discontinuity across it
    // is real, not a numerical artifact.
    double g_scale(double n) const {
        require_n(n);
        if (alpha_ < 1.5) return std::pow(n, 1.0 - alpha_);
        if (alpha_ == 1.5) return std::log(n) / std::sqrt(n);
        return std::pow(n, alpha_ - 2.0);
    }

    // Time to descend to n lineages: t_n ~ c n^(1-alpha).
    double predict_tau(double n) const {
        require_n(n);
        return c_ * std::pow(n, 1.0 - alpha_);
    }

    // Block count near time t: v(t) ~ (c/t)^(1/(alpha-1)).
    double predict_block_count(double t) const {
        if (!(t > 0.0)) throw std::domain_error("predict_block_count: need t > 0");
        return std::pow(c_ / t, 1.0 / (alpha_ - 1.0));
    }

    // Total branch length ~ (c/alpha_bar) n^(2-alpha); the coefficient
    // equals B, which ties the length and count predictions together.
    double predict_length(double n) const {
        require_n(n);
        return (c_ / alpha_bar_) * std::pow(n, 2.0 - alpha_);
    }

    // Small-x behavior of the weighted length integral of u N(u) over
    // [x, tmrca]. Three regimes in alpha_bar: a power law with
    // coefficient c^(1/(alpha-1)) / (alpha_bar - 1), a logarithm with
    // coefficient c^(1/(alpha-1)), and no deterministic limit at all
    // (the integral converges to a random variable).
    struct WeightedLength {
        enum class Regime { power, log, random };
        Regime regime;
        double coefficient;  // 0 in the random regime
        double exponent;     // 1 - alpha_bar in the power regime, else 0
    };
    WeightedLength weighted_length() const {
        WeightedLength w{};
        const double croot = std::pow(c_, 1.0 / (alpha_ - 1.0));
        if (alpha_bar_ > 1.0) {
            w.regime = WeightedLength::Regime::power;
            w.coefficient = croot / (alpha_bar_ - 1.0);
            w.exponent = 1.0 - alpha_bar_;
        } else if (alpha_bar_ == 1.0) {
            w.regime = WeightedLength::Regime::log;
            w.coefficient = croot;
            w.exponent = 0.0;
        } else {
            w.regime = WeightedLength::Regime::random;
            w.coefficient = 0.0;
            w.exponent = 0.0;
        }
        return w;
    }

    double weighted_length_at(double x) const {
        if (!(x > 0.0) || !(x < 1.0))
            throw std::domain_error("weighted_length_at: need x in (0,1)");
        const WeightedLength w = weighted_length();
        switch (w.regime) {
            case WeightedLength::Regime::power:
                return w.coefficient * std::pow(x, w.exponent);
            case WeightedLength::Regime::log:
                return w.coefficient * std::log(1.0 / x);
            case WeightedLength::Regime::random:
                throw std::domain_error(
                    "weighted_length_at: no deterministic limit for alpha_bar < 1");
        }
        return 0.0;
    }

  private:
    static void require_n(double n) {
        if (!(n >= 1.0)) throw std::domain_error("prediction: need n >= 1");
    }

    double alpha_, scale_, theta_;
    double B_, c_, alpha_bar_, C_;
    std::vector<double> ck_;
};

} // namespace coalsim
