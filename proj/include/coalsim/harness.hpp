#pragma once

// Experiment driver: run replicated simulations over a sample-size
// grid, attach kernel and limit-law predictions, and emit results.
//
// Reproducibility contract: every random stream is addressed by
// (seed, n, replicate, purpose), so results do not depend on worker
// count or replicate execution order, and a rerun of the same config
// reproduces the same file except for its timestamp field.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "coalsim/asymptotics.hpp"
#include "coalsim/genealogy.hpp"
#include "coalsim/levy_kernel.hpp"
#include "coalsim/measure.hpp"
#include "coalsim/mutation.hpp"
#include "coalsim/random.hpp"

namespace coalsim {

// ---------------------------------------------------------------- config

struct MeasureConfig {
    std::string kind = "beta";  // kingman | beta | uniform | power
    double alpha = 1.5;
    double mass = 1.0;
    double eta = 0.0;   // truncate support to [0, 1-eta]
    double scale = 0.0; // power kind: density coefficient; 0 = match beta

    LambdaMeasure build() const {
        LambdaMeasure m = [&] {
            if (kind == "kingman") return LambdaMeasure::kingman(mass);
            if (kind == "beta") return LambdaMeasure::beta_coalescent(alpha, mass);
            if (kind == "uniform") return LambdaMeasure::uniform(mass);
            if (kind == "power") {
                const double s =
                    scale > 0.0
                        ? scale
                        : mass / std::exp(log_beta(2.0 - alpha, alpha));
                return LambdaMeasure::power_density(alpha, s);
            }
            throw std::domain_error("measure kind must be kingman|beta|uniform|power");
        }();
        return eta > 0.0 ? m.truncated(eta) : m;
    }
};

struct ExperimentConfig {
    MeasureConfig measure;
    double theta = 1.0;
    std::vector<int> n_grid = {100, 316, 1000, 3162, 10000};
    int replicates = 200;
    std::uint64_t seed = 1;
    // counts | spectrum | frequencies | mutation_age | speed | unblocked
    std::vector<std::string> statistics = {"counts"};
    int kmax = 5;
    int workers = 1;
    std::string format = "csv";  // csv | json
    std::string out_path;

    double ratio_tolerance = 0.10;     // count ratios against predictions
    double spectrum_tolerance = 0.05;  // absolute band on spectrum fractions
    double speed_tolerance = 0.15;     // mean sup deviation of N/v
    double slope_tolerance = 0.15;     // relative band on frequency slope
    double ks_threshold = 0.05;

    bool has_statistic(const char* name) const {
        for (const auto& s : statistics)
            if (s == name) return true;
        return false;
    }
};

// ---------------------------------------------------------------- results

struct ReplicateRow {
    int n = 0;
    int replicate = 0;
    double sites = std::nan("");
    double alleles = std::nan("");
    double length = std::nan("");
    double tmrca = std::nan("");
    double mutation_age = std::nan("");
    double speed_sup_dev = std::nan("");
    double unblocked = std::nan("");
    std::vector<long> m_spectrum;  // k = 1..kmax
    std::vector<long> f_spectrum;
    std::vector<double> frequencies;
};

struct ConvergenceCheck {
    std::string name;
    int n = 0;
    double observed = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool relative = true;
    bool pass = false;
};

struct Aggregate {
    int n = 0;
    int replicates = 0;
    double sites_mean = std::nan(""), sites_se = std::nan("");
    double alleles_mean = std::nan(""), alleles_se = std::nan("");
    double length_mean = std::nan(""), length_se = std::nan("");
    double tmrca_mean = std::nan(""), tmrca_se = std::nan("");
    double age_mean = std::nan(""), age_se = std::nan("");
    double speed_dev_mean = std::nan("");
    double unblocked_mean = std::nan("");
    double slope_mean = std::nan("");
    std::vector<double> m_fraction;  // mean of M_k/S per replicate
    std::vector<double> f_fraction;  // mean of F_k/A
};

struct ConvergenceReport {
    ExperimentConfig config;
    std::vector<ReplicateRow> rows;
    std::vector<Aggregate> aggregates;
    std::vector<ConvergenceCheck> checks;
    bool all_pass = true;
    std::string timestamp;
};

// ------------------------------------------------------------ statistics

struct KsResult {
    double distance = 0.0;
    bool pass = false;
};

// Kolmogorov-Smirnov distance between an empirical sample and the law
// given by its quantile function (strictly increasing on (0,1)).
inline KsResult ks_compare(std::vector<double> samples,
                           const std::function<double(double)>& quantile,
                           double threshold) {
    if (samples.size() < 100)
        throw std::domain_error("ks_compare: need at least 100 samples");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        // Invert the quantile at the sample point by bisection.
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (quantile(mid) <= samples[i])
                lo = mid;
            else
                hi = mid;
        }
        const double u = 0.5 * (lo + hi);
        d = std::max(d, std::fabs((i + 1) / n - u));
        d = std::max(d, std::fabs(u - i / n));
    }
    return {d, d <= threshold};
}

// Least-squares slope of y on x.
inline double regression_slope(const std::vector<double>& x,
                               const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::domain_error("regression_slope: need two matched points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::domain_error("regression_slope: degenerate x");
    return sxy / sxx;
}

namespace detail {

struct MeanSe {
    double mean = std::nan("");
    double se = std::nan("");
};

inline MeanSe mean_se(const std::vector<ReplicateRow>& rows,
                      double ReplicateRow::*field) {
    double sum = 0.0;
    long count = 0;
    for (const auto& r : rows) {
        const double v = r.*field;
        if (!std::isnan(v)) {
            sum += v;
            ++count;
        }
    }
    if (count == 0) return {};
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& r : rows) {
        const double v = r.*field;
        if (!std::isnan(v)) ss += (v - mean) * (v - mean);
    }
    const double se =
        count > 1 ? std::sqrt(ss / (double(count) * (count - 1))) : 0.0;
    return {mean, se};
}

// Geometric subsample of integer ranks in [10, 1000]; log-log power
// laws are regressed on log-uniform rank points.
inline std::vector<int> frequency_ranks() {
    std::vector<int> ranks;
    double r = 10.0;
    while (r <= 1000.0 + 1e-9) {
        const int j = static_cast<int>(std::lround(r));
        if (ranks.empty() || j != ranks.back()) ranks.push_back(j);
        r *= std::pow(100.0, 1.0 / 24.0);
    }
    return ranks;
}

inline double round12(double v) {
    if (std::isnan(v) || std::isinf(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

// ------------------------------------------------------------ experiment

inline std::vector<double> default_speed_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 12; ++i)
        g.push_back(std::pow(10.0, -4.0 + 0.25 * i));
    return g;
}

inline ConvergenceReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.replicates < 1)
        throw std::domain_error("run_experiment: need at least one replicate");
    if (cfg.kmax < 1) throw std::domain_error("run_experiment: kmax must be >= 1");
    const LambdaMeasure measure = cfg.measure.build();
    const LevyKernel kernel(measure);
    const bool tagged = measure.regvar().has_value();
    std::optional<PredictionSet> pred;
    if (tagged)
        pred.emplace(PredictionSet::for_measure(measure, cfg.theta,
                                                std::max(cfg.kmax, 64)));

    const bool want_counts = cfg.has_statistic("counts");
    const bool want_spectrum = cfg.has_statistic("spectrum");
    const bool want_freq = cfg.has_statistic("frequencies");
    const bool want_age = cfg.has_statistic("mutation_age");
    const bool want_speed = cfg.has_statistic("speed");
    const bool want_unblocked = cfg.has_statistic("unblocked");
    const bool want_overlay =
        want_counts || want_spectrum || want_freq || want_age || want_unblocked;

    ConvergenceReport report;
    report.config = cfg;
    report.timestamp = detail::iso_timestamp();

    const std::vector<double> speed_grid = default_speed_grid();
    // Limit-law checks apply only at the largest grid point; smaller n
    // are there to show the trend, not to sit inside the band already.
    const int n_max = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
    for (int n : cfg.n_grid) {
        if (n < 1) throw std::domain_error("run_experiment: n must be >= 1");
        // Kernel curves shared by every replicate at this n.
        std::vector<double> speed_pred;
        if (want_speed) {
            const double tn = kernel.t_n(double(n));
            for (double t : speed_grid)
                speed_pred.push_back(kernel.speed_v(tn + t));
        }

        std::vector<ReplicateRow> rows(cfg.replicates);
        auto run_replicate = [&](int rep) {
            ReplicateRow& row = rows[rep];
            row.n = n;
            row.replicate = rep;
            RngStream tree_rng(cfg.seed, std::uint64_t(n), std::uint64_t(rep),
                               StreamPurpose::tree);
            const SimulatedGenealogy sim = simulate_tree(measure, n, tree_rng);
            row.length = sim.tree.total_length();
            row.tmrca = sim.tree.tmrca();
            if (want_speed) {
                double sup = 0.0;
                for (std::size_t i = 0; i < speed_grid.size(); ++i) {
                    const double ratio =
                        sim.trajectory.count_at(speed_grid[i]) / speed_pred[i];
                    sup = std::max(sup, std::fabs(ratio - 1.0));
                }
                row.speed_sup_dev = sup;
            }
            if (!want_overlay) return;
            RngStream mut_rng(cfg.seed, std::uint64_t(n), std::uint64_t(rep),
                              StreamPurpose::mutation);
            const MutationOverlay overlay =
                overlay_mutations(sim.tree, cfg.theta, mut_rng);
            row.sites = double(overlay.total());
            const AllelicPartition part = allelic_partition(sim.tree, overlay);
            row.alleles = double(part.allele_count);
            if (want_spectrum) {
                const SiteSpectrum ss = site_spectrum(sim.tree, overlay);
                row.m_spectrum.assign(cfg.kmax, 0);
                for (int k = 1; k <= cfg.kmax && k < int(ss.by_size.size()); ++k)
                    row.m_spectrum[k - 1] = ss.by_size[k];
                row.f_spectrum.assign(cfg.kmax, 0);
                for (const auto& block : part.blocks) {
                    const int sz = int(block.size());
                    if (sz <= cfg.kmax) ++row.f_spectrum[sz - 1];
                }
            }
            if (want_freq)
                row.frequencies = allele_frequencies(part, n);
            if (want_age) {
                RngStream aux_rng(cfg.seed, std::uint64_t(n), std::uint64_t(rep),
                                  StreamPurpose::aux);
                row.mutation_age = random_mutation_age(overlay, aux_rng);
            }
            if (want_unblocked)
                row.unblocked = unblocked_fraction(sim.tree, overlay, 1);
        };

        const int workers = std::max(1, cfg.workers);
        if (workers == 1) {
            for (int rep = 0; rep < cfg.replicates; ++rep) run_replicate(rep);
        } else {
            std::vector<std::thread> threads;
            for (int w = 0; w < workers; ++w)
                threads.emplace_back([&, w] {
                    for (int rep = w; rep < cfg.replicates; rep += workers)
                        run_replicate(rep);
                });
            for (auto& th : threads) th.join();
        }

        // ---- aggregate this n
        Aggregate agg;
        agg.n = n;
        agg.replicates = cfg.replicates;
        auto ms = detail::mean_se(rows, &ReplicateRow::sites);
        agg.sites_mean = ms.mean;
        agg.sites_se = ms.se;
        ms = detail::mean_se(rows, &ReplicateRow::alleles);
        agg.alleles_mean = ms.mean;
        agg.alleles_se = ms.se;
        ms = detail::mean_se(rows, &ReplicateRow::length);
        agg.length_mean = ms.mean;
        agg.length_se = ms.se;
        ms = detail::mean_se(rows, &ReplicateRow::tmrca);
        agg.tmrca_mean = ms.mean;
        agg.tmrca_se = ms.se;
        ms = detail::mean_se(rows, &ReplicateRow::mutation_age);
        agg.age_mean = ms.mean;
        agg.age_se = ms.se;
        agg.speed_dev_mean = detail::mean_se(rows, &ReplicateRow::speed_sup_dev).mean;
        agg.unblocked_mean = detail::mean_se(rows, &ReplicateRow::unblocked).mean;
        if (want_spectrum) {
            agg.m_fraction.assign(cfg.kmax, 0.0);
            agg.f_fraction.assign(cfg.kmax, 0.0);
            long m_rows = 0, f_rows = 0;
            for (const auto& r : rows) {
                if (r.sites > 0) {
                    for (int k = 0; k < cfg.kmax; ++k)
                        agg.m_fraction[k] += double(r.m_spectrum[k]) / r.sites;
                    ++m_rows;
                }
                if (r.alleles > 0) {
                    for (int k = 0; k < cfg.kmax; ++k)
                        agg.f_fraction[k] += double(r.f_spectrum[k]) / r.alleles;
                    ++f_rows;
                }
            }
            for (int k = 0; k < cfg.kmax; ++k) {
                agg.m_fraction[k] =
                    m_rows ? agg.m_fraction[k] / m_rows : std::nan("");
                agg.f_fraction[k] =
                    f_rows ? agg.f_fraction[k] / f_rows : std::nan("");
            }
        }
        if (want_freq) {
            const std::vector<int> ranks = detail::frequency_ranks();
            double slope_sum = 0.0;
            long slope_count = 0;
            for (const auto& r : rows) {
                std::vector<double> lx, ly;
                for (int j : ranks) {
                    if (j <= int(r.frequencies.size()) &&
                        r.frequencies[j - 1] > 0.0) {
                        lx.push_back(std::log(double(j)));
                        ly.push_back(std::log(r.frequencies[j - 1]));
                    }
                }
                if (lx.size() >= 3) {
                    slope_sum += regression_slope(lx, ly);
                    ++slope_count;
                }
            }
            agg.slope_mean = slope_count ? slope_sum / slope_count : std::nan("");
        }
        report.aggregates.push_back(agg);

        // ---- checks at this n
        auto add_check = [&](std::string name, double observed, double expected,
                             double tol, bool relative) {
            ConvergenceCheck ck;
            ck.name = std::move(name);
            ck.n = n;
            ck.observed = observed;
            ck.expected = expected;
            ck.tolerance = tol;
            ck.relative = relative;
            if (std::isnan(observed)) {
                ck.pass = false;
            } else if (relative) {
                ck.pass = std::fabs(observed / expected - 1.0) <= tol;
            } else {
                ck.pass = std::fabs(observed - expected) <= tol;
            }
            report.checks.push_back(ck);
            report.all_pass = report.all_pass && ck.pass;
        };

        if (want_counts && cfg.theta > 0.0) {
            const double denom = cfg.theta * kernel.length_integral(double(n));
            if (denom > 0.0)
                add_check("sites_over_length_integral", agg.sites_mean, denom,
                          cfg.ratio_tolerance, true);
            if (pred && n == n_max) {
                const auto counts = pred->predict_counts(double(n));
                add_check("sites_strong", agg.sites_mean, counts.sites,
                          cfg.ratio_tolerance, true);
                add_check("alleles_strong", agg.alleles_mean, counts.alleles,
                          cfg.ratio_tolerance, true);
            }
        }
        if (want_spectrum && pred && n == n_max) {
            for (int k = 1; k <= cfg.kmax; ++k) {
                add_check("site_fraction_k" + std::to_string(k),
                          agg.m_fraction[k - 1], pred->c_k(k),
                          cfg.spectrum_tolerance, false);
                add_check("allele_fraction_k" + std::to_string(k),
                          agg.f_fraction[k - 1], pred->c_k(k),
                          cfg.spectrum_tolerance, false);
            }
        }
        if (want_freq && pred && n == n_max && !std::isnan(agg.slope_mean)) {
            add_check("frequency_slope", agg.slope_mean,
                      -1.0 / (2.0 - pred->alpha()), cfg.slope_tolerance, true);
        }
        if (want_age && pred && n == n_max && cfg.replicates >= 100) {
            std::vector<double> scaled;
            const double f = std::pow(double(n), pred->alpha() - 1.0);
            for (const auto& r : rows)
                if (!std::isnan(r.mutation_age))
                    scaled.push_back(r.mutation_age * f);
            if (scaled.size() >= 100) {
                const PredictionSet& p = *pred;
                const KsResult ks = ks_compare(
                    scaled, [&p](double u) { return p.mn_limit_quantile(u); },
                    cfg.ks_threshold);
                add_check("mutation_age_ks", ks.distance, 0.0, cfg.ks_threshold,
                          false);
            }
        }
        if (want_speed) {
            add_check("speed_sup_deviation", agg.speed_dev_mean, 0.0,
                      cfg.speed_tolerance, false);
        }

        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    return report;
}

// ------------------------------------------------------------------ emit

namespace detail {

inline std::string join_longs(const std::vector<long>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        s += fmt12(v[i]);
    }
    return s;
}

inline void emit_config_lines(const ExperimentConfig& cfg, std::ostream& os,
                              const char* prefix) {
    os << prefix << "kind = " << cfg.measure.kind << "\n";
    os << prefix << "alpha = " << fmt12(cfg.measure.alpha) << "\n";
    os << prefix << "mass = " << fmt12(cfg.measure.mass) << "\n";
    os << prefix << "eta = " << fmt12(cfg.measure.eta) << "\n";
    os << prefix << "theta = " << fmt12(cfg.theta) << "\n";
    os << prefix << "seed = " << cfg.seed << "\n";
    os << prefix << "replicates = " << cfg.replicates << "\n";
    os << prefix << "kmax = " << cfg.kmax << "\n";
    std::string stats;
    for (std::size_t i = 0; i < cfg.statistics.size(); ++i) {
        if (i) stats += ',';
        stats += cfg.statistics[i];
    }
    os << prefix << "statistics = " << stats << "\n";
    std::string grid;
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        if (i) grid += ',';
        grid += std::to_string(cfg.n_grid[i]);
    }
    os << prefix << "n_grid = " << grid << "\n";
}

} // namespace detail

inline void emit_csv(const ConvergenceReport& report, std::ostream& os) {
    detail::emit_config_lines(report.config, os, "# ");
    os << "# timestamp = " << report.timestamp << "\n";
    os << "n,replicate,sites,alleles,length,tmrca,mutation_age,"
          "speed_sup_dev,unblocked,m_spectrum,f_spectrum,frequencies\n";
    auto cell = [](double v) {
        return std::isnan(v) ? std::string() : detail::fmt12(v);
    };
    for (const auto& r : report.rows) {
        os << r.n << ',' << r.replicate << ',' << cell(r.sites) << ','
           << cell(r.alleles) << ',' << cell(r.length) << ',' << cell(r.tmrca)
           << ',' << cell(r.mutation_age) << ',' << cell(r.speed_sup_dev) << ','
           << cell(r.unblocked) << ',' << detail::join_longs(r.m_spectrum)
           << ',' << detail::join_longs(r.f_spectrum) << ','
           << detail::join_doubles(r.frequencies) << "\n";
    }
    os << "# checks: name,n,observed,expected,tolerance,mode,pass\n";
    for (const auto& c : report.checks) {
        os << "# check: " << c.name << ',' << c.n << ','
           << detail::fmt12(c.observed) << ',' << detail::fmt12(c.expected)
           << ',' << detail::fmt12(c.tolerance) << ','
           << (c.relative ? "relative" : "absolute") << ','
           << (c.pass ? "pass" : "fail") << "\n";
    }
    os << "# all_pass = " << (report.all_pass ? "true" : "false") << "\n";
}

inline nlohmann::ordered_json report_to_json(const ConvergenceReport& report) {
    using detail::round12;
    nlohmann::ordered_json j;
    const ExperimentConfig& cfg = report.config;
    j["config"] = {{"kind", cfg.measure.kind},
                   {"alpha", round12(cfg.measure.alpha)},
                   {"mass", round12(cfg.measure.mass)},
                   {"eta", round12(cfg.measure.eta)},
                   {"theta", round12(cfg.theta)},
                   {"seed", cfg.seed},
                   {"replicates", cfg.replicates},
                   {"kmax", cfg.kmax},
                   {"statistics", cfg.statistics},
                   {"n_grid", cfg.n_grid}};
    j["timestamp"] = report.timestamp;
    auto num = [](double v) -> nlohmann::ordered_json {
        if (std::isnan(v)) return nullptr;
        return round12(v);
    };
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["n"] = r.n;
        row["replicate"] = r.replicate;
        row["sites"] = num(r.sites);
        row["alleles"] = num(r.alleles);
        row["length"] = num(r.length);
        row["tmrca"] = num(r.tmrca);
        row["mutation_age"] = num(r.mutation_age);
        row["speed_sup_dev"] = num(r.speed_sup_dev);
        row["unblocked"] = num(r.unblocked);
        row["m_spectrum"] = r.m_spectrum;
        row["f_spectrum"] = r.f_spectrum;
        nlohmann::ordered_json freqs = nlohmann::ordered_json::array();
        for (double f : r.frequencies) freqs.push_back(round12(f));
        row["frequencies"] = std::move(freqs);
        j["rows"].push_back(std::move(row));
    }
    j["aggregates"] = nlohmann::ordered_json::array();
    for (const auto& a : report.aggregates) {
        nlohmann::ordered_json agg;
        agg["n"] = a.n;
        agg["replicates"] = a.replicates;
        agg["sites_mean"] = num(a.sites_mean);
        agg["sites_se"] = num(a.sites_se);
        agg["alleles_mean"] = num(a.alleles_mean);
        agg["alleles_se"] = num(a.alleles_se);
        agg["length_mean"] = num(a.length_mean);
        agg["length_se"] = num(a.length_se);
        agg["tmrca_mean"] = num(a.tmrca_mean);
        agg["tmrca_se"] = num(a.tmrca_se);
        agg["age_mean"] = num(a.age_mean);
        agg["age_se"] = num(a.age_se);
        agg["speed_dev_mean"] = num(a.speed_dev_mean);
        agg["unblocked_mean"] = num(a.unblocked_mean);
        agg["slope_mean"] = num(a.slope_mean);
        nlohmann::ordered_json mf = nlohmann::ordered_json::array();
        for (double v : a.m_fraction) mf.push_back(num(v));
        agg["m_fraction"] = std::move(mf);
        nlohmann::ordered_json ff = nlohmann::ordered_json::array();
        for (double v : a.f_fraction) ff.push_back(num(v));
        agg["f_fraction"] = std::move(ff);
        j["aggregates"].push_back(std::move(agg));
    }
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : report.checks) {
        j["checks"].push_back({{"name", c.name},
                               {"n", c.n},
                               {"observed", round12(c.observed)},
                               {"expected", round12(c.expected)},
                               {"tolerance", round12(c.tolerance)},
                               {"mode", c.relative ? "relative" : "absolute"},
                               {"pass", c.pass}});
    }
    j["all_pass"] = report.all_pass;
    return j;
}

inline void emit_json(const ConvergenceReport& report, std::ostream& os) {
    os << report_to_json(report).dump(2) << "\n";
}

inline void emit(const ConvergenceReport& report, std::ostream& os) {
    if (report.config.format == "json")
        emit_json(report, os);
    else
        emit_csv(report, os);
}

} // namespace coalsim
