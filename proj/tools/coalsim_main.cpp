// Command line front end: simulate genealogies, print predictions,
// evaluate the kernel, and run verification experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "coalsim/coalsim.hpp"

namespace {

struct OutputTarget {
    std::ofstream file;
    std::ostream* os = &std::cout;

    explicit OutputTarget(const std::string& path) {
        if (!path.empty()) {
            file.open(path);
            if (!file) throw CLI::RuntimeError("cannot open " + path, 4);
            os = &file;
        }
    }
    std::ostream& stream() { return *os; }
};

void add_measure_options(CLI::App* cmd, coalsim::MeasureConfig& m) {
    cmd->add_option("--measure", m.kind,
                    "Measure family: kingman, beta, uniform, power")
        ->default_val(m.kind);
    cmd->add_option("--alpha", m.alpha, "Stable index in (1,2) for beta/power")
        ->default_val(m.alpha);
    cmd->add_option("--mass", m.mass, "Total mass of the measure")
        ->default_val(m.mass);
    cmd->add_option("--eta", m.eta, "Truncate support to [0, 1-eta]")
        ->default_val(m.eta);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple-merger coalescent simulation and verification"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML config file");
    app.get_config_formatter_base()->section("");

    coalsim::ExperimentConfig cfg;

    // ---- simulate
    auto* sim_cmd = app.add_subcommand(
        "simulate", "Draw genealogies with mutations and export them");
    int sim_n = 100;
    int sim_reps = 1;
    std::string sim_newick, sim_trajectory, sim_out;
    add_measure_options(sim_cmd, cfg.measure);
    sim_cmd->add_option("--theta", cfg.theta, "Mutation rate")->default_val(1.0);
    sim_cmd->add_option("--n", sim_n, "Sample size")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--reps", sim_reps, "Number of replicates")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", cfg.seed, "Random seed");
    sim_cmd->add_option("--newick", sim_newick,
                        "Write trees to this file, one Newick line each");
    sim_cmd->add_option("--trajectory", sim_trajectory,
                        "Write block-count trajectories to this CSV file");
    sim_cmd->add_option("--out", sim_out, "Summary CSV path (default stdout)");

    // ---- predict
    auto* pred_cmd = app.add_subcommand(
        "predict", "Print asymptotic predictions for a tagged measure");
    std::vector<double> pred_n = {100, 1000, 10000};
    int pred_kmax = 10;
    std::string pred_out, pred_format = "csv";
    add_measure_options(pred_cmd, cfg.measure);
    pred_cmd->add_option("--theta", cfg.theta, "Mutation rate")->default_val(1.0);
    pred_cmd->add_option("--n", pred_n, "Sample sizes")->delimiter(',');
    pred_cmd->add_option("--kmax", pred_kmax, "Spectrum cutoff")
        ->check(CLI::PositiveNumber);
    pred_cmd->add_option("--out", pred_out, "Output path (default stdout)");
    pred_cmd->add_option("--format", pred_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    // ---- kernel
    auto* ker_cmd = app.add_subcommand(
        "kernel", "Evaluate the Levy machinery for a measure");
    std::vector<double> ker_q, ker_t, ker_n;
    std::string ker_out;
    add_measure_options(ker_cmd, cfg.measure);
    ker_cmd->add_option("--q", ker_q, "Evaluate psi at these points")
        ->delimiter(',');
    ker_cmd->add_option("--t", ker_t, "Evaluate the speed v at these times")
        ->delimiter(',');
    ker_cmd->add_option("--n", ker_n,
                        "Evaluate t_n and the length integral at these n")
        ->delimiter(',');
    ker_cmd->add_option("--out", ker_out, "Output path (default stdout)");

    // ---- verify
    auto* ver_cmd = app.add_subcommand(
        "verify", "Run replicated experiments and check predictions");
    add_measure_options(ver_cmd, cfg.measure);
    ver_cmd->add_option("--theta", cfg.theta, "Mutation rate")->default_val(1.0);
    ver_cmd->add_option("--n", cfg.n_grid, "Sample size grid")->delimiter(',');
    ver_cmd->add_option("--reps", cfg.replicates, "Replicates per grid point")
        ->check(CLI::PositiveNumber);
    ver_cmd->add_option("--seed", cfg.seed, "Random seed");
    ver_cmd->add_option("--stats", cfg.statistics,
                        "Statistics: counts, spectrum, frequencies, "
                        "mutation_age, speed, unblocked")
        ->delimiter(',');
    ver_cmd->add_option("--kmax", cfg.kmax, "Spectrum cutoff")
        ->check(CLI::PositiveNumber);
    ver_cmd->add_option("--workers", cfg.workers, "Worker threads")
        ->check(CLI::PositiveNumber);
    ver_cmd->add_option("--out", cfg.out_path, "Report path (default stdout)");
    ver_cmd->add_option("--format", cfg.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    ver_cmd->add_option("--ratio-tol", cfg.ratio_tolerance,
                        "Relative band for count ratios");
    ver_cmd->add_option("--spectrum-tol", cfg.spectrum_tolerance,
                        "Absolute band for spectrum fractions");
    ver_cmd->add_option("--speed-tol", cfg.speed_tolerance,
                        "Band for the mean sup deviation of N/v");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim_cmd) {
            const coalsim::LambdaMeasure measure = cfg.measure.build();
            OutputTarget out(sim_out);
            std::unique_ptr<std::ofstream> newick;
            if (!sim_newick.empty()) {
                newick = std::make_unique<std::ofstream>(sim_newick);
                if (!*newick)
                    throw CLI::RuntimeError("cannot open " + sim_newick, 4);
            }
            std::unique_ptr<std::ofstream> traj;
            if (!sim_trajectory.empty()) {
                traj = std::make_unique<std::ofstream>(sim_trajectory);
                if (!*traj)
                    throw CLI::RuntimeError("cannot open " + sim_trajectory, 4);
                *traj << "replicate,time,blocks\n";
            }
            out.stream() << "replicate,sites,alleles,length,tmrca\n";
            for (int rep = 0; rep < sim_reps; ++rep) {
                coalsim::RngStream tree_rng(cfg.seed, std::uint64_t(sim_n),
                                            std::uint64_t(rep),
                                            coalsim::StreamPurpose::tree);
                const auto sim = coalsim::simulate_tree(measure, sim_n, tree_rng);
                coalsim::RngStream mut_rng(cfg.seed, std::uint64_t(sim_n),
                                           std::uint64_t(rep),
                                           coalsim::StreamPurpose::mutation);
                const auto overlay =
                    coalsim::overlay_mutations(sim.tree, cfg.theta, mut_rng);
                const auto part = coalsim::allelic_partition(sim.tree, overlay);
                out.stream() << rep << ',' << overlay.total() << ','
                             << part.allele_count << ','
                             << fmt(sim.tree.total_length()) << ','
                             << fmt(sim.tree.tmrca()) << "\n";
                if (newick) *newick << coalsim::to_newick(sim.tree) << "\n";
                if (traj) {
                    const auto& tr = sim.trajectory;
                    *traj << rep << ",0," << tr.counts[0] << "\n";
                    for (std::size_t i = 0; i < tr.jump_times.size(); ++i)
                        *traj << rep << ',' << fmt(tr.jump_times[i]) << ','
                              << tr.counts[i + 1] << "\n";
                }
            }
            return 0;
        }

        if (*pred_cmd) {
            const coalsim::LambdaMeasure measure = cfg.measure.build();
            const auto pred = coalsim::PredictionSet::for_measure(
                measure, cfg.theta, std::max(pred_kmax, 64));
            const coalsim::LevyKernel kernel(measure);
            OutputTarget out(pred_out);
            if (pred_format == "json") {
                nlohmann::ordered_json j;
                j["alpha"] = pred.alpha();
                j["scale"] = pred.scale();
                j["theta"] = pred.theta();
                j["B"] = pred.B();
                j["c"] = pred.c();
                j["C"] = pred.C();
                nlohmann::ordered_json spectrum = nlohmann::ordered_json::array();
                for (int k = 1; k <= pred_kmax; ++k)
                    spectrum.push_back({{"k", k},
                                        {"c_k", pred.c_k(k)},
                                        {"cbar_k", pred.cbar(k)}});
                j["spectrum"] = std::move(spectrum);
                nlohmann::ordered_json grid = nlohmann::ordered_json::array();
                for (double n : pred_n) {
                    const auto counts = pred.predict_counts(n);
                    grid.push_back({{"n", n},
                                    {"sites", counts.sites},
                                    {"alleles", counts.alleles},
                                    {"t_n", kernel.t_n(n)},
                                    {"length_integral", kernel.length_integral(n)},
                                    {"g", pred.g_scale(n)}});
                }
                j["grid"] = std::move(grid);
                out.stream() << j.dump(2) << "\n";
            } else {
                out.stream() << "# B = " << fmt(pred.B())
                             << ", c = " << fmt(pred.c())
                             << ", C = " << fmt(pred.C()) << "\n";
                out.stream() << "k,c_k,cbar_k\n";
                for (int k = 1; k <= pred_kmax; ++k)
                    out.stream() << k << ',' << fmt(pred.c_k(k)) << ','
                                 << fmt(pred.cbar(k)) << "\n";
                out.stream() << "n,sites,alleles,t_n,length_integral,g\n";
                for (double n : pred_n) {
                    const auto counts = pred.predict_counts(n);
                    out.stream()
                        << fmt(n) << ',' << fmt(counts.sites) << ','
                        << fmt(counts.alleles) << ',' << fmt(kernel.t_n(n))
                        << ',' << fmt(kernel.length_integral(n)) << ','
                        << fmt(pred.g_scale(n)) << "\n";
                }
            }
            return 0;
        }

        if (*ker_cmd) {
            const coalsim::LambdaMeasure measure = cfg.measure.build();
            const coalsim::LevyKernel kernel(measure);
            OutputTarget out(ker_out);
            const auto grey = kernel.grey_condition();
            const char* status =
                grey.status == coalsim::GreyResult::Status::finite
                    ? "finite"
                    : grey.status == coalsim::GreyResult::Status::infinite
                          ? "infinite"
                          : "undecidable";
            out.stream() << "grey," << status;
            if (grey.status == coalsim::GreyResult::Status::finite)
                out.stream() << ',' << fmt(grey.value);
            out.stream() << "\n";
            for (double q : ker_q)
                out.stream() << "psi," << fmt(q) << ',' << fmt(kernel.psi(q))
                             << "\n";
            if (grey.status == coalsim::GreyResult::Status::finite) {
                for (double t : ker_t)
                    out.stream()
                        << "v," << fmt(t) << ',' << fmt(kernel.speed_v(t)) << "\n";
                for (double n : ker_n)
                    out.stream()
                        << "t_n," << fmt(n) << ',' << fmt(kernel.t_n(n)) << "\n";
            } else if (!ker_t.empty() || !ker_n.empty()) {
                out.stream() << "# v and t_n undefined: the speed integral "
                                "does not converge\n";
            }
            for (double n : ker_n)
                out.stream() << "length_integral," << fmt(n) << ','
                             << fmt(kernel.length_integral(n)) << "\n";
            return 0;
        }

        // verify
        const coalsim::ConvergenceReport report = coalsim::run_experiment(cfg);
        OutputTarget out(cfg.out_path);
        coalsim::emit(report, out.stream());
        if (!cfg.out_path.empty()) {
            for (const auto& c : report.checks)
                std::cout << (c.pass ? "pass" : "FAIL") << "  " << c.name
                          << "  n=" << c.n << "  observed=" << fmt(c.observed)
                          << "  expected=" << fmt(c.expected) << "\n";
        }
        return report.all_pass ? 0 : 1;
    } catch (const CLI::RuntimeError& e) {
        std::cerr << "error: exit " << e.get_exit_code() << "\n";
        return e.get_exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
