#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "coalsim/genealogy.hpp"
#include "coalsim/levy_kernel.hpp"
#include "coalsim/measure.hpp"
#include "coalsim/random.hpp"
#include "coalsim/special.hpp"
#include "oracles.hpp"

using coalsim::GenealogyTree;
using coalsim::LambdaMeasure;
using coalsim::RngStream;
using coalsim::simulate_tree;
using coalsim::StreamPurpose;

namespace {

void check_tree_shape(const GenealogyTree& t) {
    const int n = t.n_leaves;
    const int nodes = t.num_nodes();
    REQUIRE(nodes >= n + 1);
    REQUIRE(t.leaf_count[t.root()] == n);
    REQUIRE(t.parent[t.root()] == -1);
    int with_parent = 0;
    for (int v = 0; v < nodes; ++v) {
        if (v < n) {
            REQUIRE(t.children[v].empty());
            REQUIRE(t.leaf_count[v] == 1);
            REQUIRE(t.time[v] == 0.0);
        } else {
            REQUIRE(t.children[v].size() >= 2);
            int sum = 0;
            for (int c : t.children[v]) {
                REQUIRE(c < v);
                REQUIRE(t.parent[c] == v);
                REQUIRE(t.time[c] < t.time[v]);
                sum += t.leaf_count[c];
            }
            REQUIRE(sum == t.leaf_count[v]);
        }
        if (t.parent[v] >= 0) ++with_parent;
    }
    REQUIRE(with_parent == nodes - 1);
}

struct MeanAccumulator {
    double sum = 0.0, sq = 0.0;
    long count = 0;
    void add(double x) {
        sum += x;
        sq += x * x;
        ++count;
    }
    double mean() const { return sum / count; }
    double se() const {
        const double var = (sq - sum * sum / count) / (count - 1.0);
        return std::sqrt(var / count);
    }
};

} // namespace

TEST_CASE("simulated trees are well formed", "[genealogy]") {
    for (double alpha : {1.2, 1.5, 1.8}) {
        const auto m = LambdaMeasure::beta_coalescent(alpha);
        for (int rep = 0; rep < 20; ++rep) {
            RngStream rng(5, 200, rep, StreamPurpose::tree);
            const auto sim = simulate_tree(m, 200, rng);
            check_tree_shape(sim.tree);

            const auto& tr = sim.trajectory;
            REQUIRE(tr.counts.front() == 200);
            REQUIRE(tr.counts.back() == 1);
            REQUIRE(tr.counts.size() == tr.jump_times.size() + 1);
            for (std::size_t i = 0; i + 1 < tr.counts.size(); ++i)
                REQUIRE(tr.counts[i + 1] < tr.counts[i]);
            for (std::size_t i = 0; i + 1 < tr.jump_times.size(); ++i)
                REQUIRE(tr.jump_times[i] < tr.jump_times[i + 1]);

            // The trajectory integral is the tree length, two views of
            // the same realization.
            REQUIRE(std::fabs(tr.integral_count() - sim.tree.total_length()) <=
                    1e-10 * sim.tree.total_length());
            REQUIRE(tr.count_at(sim.tree.tmrca()) == 1);
            REQUIRE(tr.count_at(0.0) <= 200);
        }
    }
}

TEST_CASE("single lineage needs no events", "[genealogy]") {
    const auto m = LambdaMeasure::kingman();
    RngStream rng(5, 1, 0, StreamPurpose::tree);
    const auto sim = simulate_tree(m, 1, rng);
    REQUIRE(sim.tree.num_nodes() == 1);
    REQUIRE(sim.tree.total_length() == 0.0);
    REQUIRE(sim.trajectory.counts == std::vector<int>{1});
}

TEST_CASE("pairwise-merger means match closed forms", "[genealogy]") {
    // E[tmrca] = 2(1 - 1/n), E[length] = 2 H_{n-1}.
    const int n = 20, reps = 10000;
    const auto m = LambdaMeasure::kingman();
    MeanAccumulator tmrca, length;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(17, n, rep, StreamPurpose::tree);
        const auto sim = simulate_tree(m, n, rng);
        tmrca.add(sim.tree.tmrca());
        length.add(sim.tree.total_length());
    }
    REQUIRE(std::fabs(tmrca.mean() - 2.0 * (1.0 - 1.0 / n)) <
            4.0 * tmrca.se());
    REQUIRE(std::fabs(length.mean() - 2.0 * coalsim::harmonic(n - 1)) <
            4.0 * length.se());
}

TEST_CASE("multiple-merger means match the first-step recursion",
          "[genealogy]") {
    const int n = 100, reps = 10000;
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    const auto curves = oracle::mean_curves(m, n);
    MeanAccumulator tmrca, length;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(23, n, rep, StreamPurpose::tree);
        const auto sim = simulate_tree(m, n, rng);
        tmrca.add(sim.tree.tmrca());
        length.add(sim.tree.total_length());
    }
    REQUIRE(std::fabs(tmrca.mean() - curves.tmrca[n]) < 4.0 * tmrca.se());
    REQUIRE(std::fabs(length.mean() - curves.length[n]) < 4.0 * length.se());
}

TEST_CASE("thinned proposals keep the truncated mean exact", "[genealogy]") {
    // The truncated measure runs through the acceptance-rejection path;
    // its means must still match its own recursion.
    const int n = 60, reps = 10000;
    const auto m = LambdaMeasure::beta_coalescent(1.5).truncated(0.4);
    const auto curves = oracle::mean_curves(m, n);
    MeanAccumulator tmrca, length;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(29, n, rep, StreamPurpose::tree);
        const auto sim = simulate_tree(m, n, rng);
        tmrca.add(sim.tree.tmrca());
        length.add(sim.tree.total_length());
    }
    REQUIRE(std::fabs(tmrca.mean() - curves.tmrca[n]) < 4.0 * tmrca.se());
    REQUIRE(std::fabs(length.mean() - curves.length[n]) < 4.0 * length.se());
}

TEST_CASE("first merger follows the collision-rate law", "[genealogy]") {
    const int b = 10;
    const long draws = 100000;
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    const auto table = coalsim::build_rate_table(m, b);

    // Lump the sparse big-merger tail so every cell expects >= ~20 hits.
    std::vector<double> prob;
    for (int k = 2; k <= b; ++k)
        prob.push_back(std::exp(table.log_rates[k - 2]) / table.total);
    const int lump_from = 6;  // cells 2..5 kept, 6..10 pooled
    std::vector<double> pooled(prob.begin(), prob.begin() + (lump_from - 2));
    pooled.push_back(
        std::accumulate(prob.begin() + (lump_from - 2), prob.end(), 0.0));

    std::vector<long> obs(pooled.size(), 0);
    for (long i = 0; i < draws; ++i) {
        RngStream rng(41, b, i, StreamPurpose::tree);
        const auto sim = simulate_tree(m, b, rng);
        const int k = b - sim.trajectory.counts[1] + 1;
        ++obs[std::min<std::size_t>(k - 2, pooled.size() - 1)];
    }
    REQUIRE(oracle::chi2_stat(obs, pooled, draws) <
            oracle::chi2_crit_999(int(pooled.size()) - 1));
}

TEST_CASE("restriction to fewer leaves", "[genealogy]") {
    const auto m = LambdaMeasure::beta_coalescent(1.5);

    SECTION("restricted tree is a valid nested genealogy") {
        for (int rep = 0; rep < 50; ++rep) {
            RngStream rng(53, 30, rep, StreamPurpose::tree);
            const auto sim = simulate_tree(m, 30, rng);
            const auto r = coalsim::restrict_tree(sim.tree, 7);
            check_tree_shape(r.tree);
            REQUIRE(r.tree.n_leaves == 7);
            // Materialized nodes keep their original time; contracted
            // pass-through nodes map to an earlier descendant.
            for (int v = 30; v < sim.tree.num_nodes(); ++v)
                if (r.rep[v] >= 0)
                    REQUIRE(r.tree.time[r.rep[v]] <= sim.tree.time[v]);
            // Restricted tmrca never exceeds the full one.
            REQUIRE(r.tree.tmrca() <= sim.tree.tmrca());
            REQUIRE(r.tree.total_length() <= sim.tree.total_length());
        }
    }

    SECTION("restricting to all leaves is an isomorphic copy") {
        RngStream rng(53, 30, 99, StreamPurpose::tree);
        const auto sim = simulate_tree(m, 30, rng);
        const auto r = coalsim::restrict_tree(sim.tree, 30);
        REQUIRE(r.tree.num_nodes() == sim.tree.num_nodes());
        REQUIRE(r.tree.tmrca() == sim.tree.tmrca());
        REQUIRE(r.tree.total_length() == sim.tree.total_length());
    }

    SECTION("restriction commutes with the sampling law under exchangeability") {
        // A 10-leaf subsample of a 40-leaf pairwise genealogy has the
        // law of a direct 10-leaf genealogy.
        const auto king = LambdaMeasure::kingman();
        const int reps = 2000;
        std::vector<double> restricted, direct;
        for (int rep = 0; rep < reps; ++rep) {
            RngStream rng_big(61, 40, rep, StreamPurpose::tree);
            const auto big = simulate_tree(king, 40, rng_big);
            restricted.push_back(
                coalsim::restrict_tree(big.tree, 10).tree.total_length());
            RngStream rng_small(67, 10, rep, StreamPurpose::tree);
            direct.push_back(
                simulate_tree(king, 10, rng_small).tree.total_length());
        }
        REQUIRE(oracle::ks_two_sample(restricted, direct) <
                oracle::ks_two_sample_crit(reps, reps));
    }
}

TEST_CASE("serialized form of a hand-built genealogy", "[genealogy]") {
    GenealogyTree t;
    t.n_leaves = 3;
    t.time = {0.0, 0.0, 0.0, 0.5, 2.0};
    t.parent = {3, 3, 4, 4, -1};
    t.children = {{}, {}, {}, {0, 1}, {3, 2}};  // children print in stored order
    t.leaf_count = {1, 1, 1, 2, 3};
    REQUIRE(coalsim::to_newick(t) == "((1:0.5,2:0.5):1.5,3:2);");

    GenealogyTree flat;
    flat.n_leaves = 3;
    flat.time = {0.0, 0.0, 0.0, 2.0};
    flat.parent = {3, 3, 3, -1};
    flat.children = {{}, {}, {}, {0, 1, 2}};
    flat.leaf_count = {1, 1, 1, 3};
    REQUIRE(coalsim::to_newick(flat) == "(1:2,2:2,3:2);");
}

TEST_CASE("block counts track the speed function", "[genealogy]") {
    const auto m = LambdaMeasure::kingman();
    const coalsim::LevyKernel kernel(m);
    const int n = 10000, reps = 200;
    double mean_ratio = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(71, n, rep, StreamPurpose::tree);
        const auto sim = simulate_tree(m, n, rng);
        const auto rows = coalsim::trajectory_stats(sim.trajectory, kernel,
                                                    {0.01});
        REQUIRE(rows.size() == 1);
        mean_ratio += rows[0].ratio / reps;
    }
    REQUIRE(mean_ratio > 0.9);
    REQUIRE(mean_ratio < 1.1);

    const coalsim::LevyKernel bs(LambdaMeasure::uniform());
    RngStream rng(71, 50, 0, StreamPurpose::tree);
    const auto sim = simulate_tree(LambdaMeasure::uniform(), 50, rng);
    REQUIRE_THROWS_AS(coalsim::trajectory_stats(sim.trajectory, bs, {0.01}),
                      std::domain_error);
}
