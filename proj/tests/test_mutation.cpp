#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "coalsim/genealogy.hpp"
#include "coalsim/measure.hpp"
#include "coalsim/mutation.hpp"
#include "coalsim/random.hpp"
#include "oracles.hpp"

using coalsim::GenealogyTree;
using coalsim::LambdaMeasure;
using coalsim::Mark;
using coalsim::MutationOverlay;
using coalsim::RngStream;
using coalsim::StreamPurpose;

namespace {

// Six leaves, four internal nodes, five hand-placed marks. One mark
// (index 2) shares a branch with a younger one (index 3) and therefore
// never surfaces as an allelic type.
struct HandExample {
    GenealogyTree tree;
    MutationOverlay overlay;

    HandExample() {
        tree.n_leaves = 6;
        tree.time = {0, 0, 0, 0, 0, 0, 1.0, 1.5, 2.5, 4.0};
        tree.parent = {6, 6, 7, 7, 9, 9, 8, 8, 9, -1};
        tree.children = {{}, {}, {}, {}, {}, {},
                         {0, 1}, {2, 3}, {6, 7}, {8, 4, 5}};
        tree.leaf_count = {1, 1, 1, 1, 1, 1, 2, 2, 4, 6};

        overlay.theta = 1.0;
        overlay.edge_marks.assign(10, 0);
        overlay.edge_youngest.assign(10, -1);
        auto place = [&](int edge_child, double age, int subtended) {
            const int idx = int(overlay.marks.size());
            overlay.marks.push_back({edge_child, age, subtended});
            ++overlay.edge_marks[edge_child];
            const int y = overlay.edge_youngest[edge_child];
            if (y < 0 || age < overlay.marks[y].age)
                overlay.edge_youngest[edge_child] = idx;
        };
        place(4, 0.5, 1);   // 0: private to leaf 4
        place(6, 2.0, 2);   // 1: subtends {0,1}
        place(8, 3.0, 4);   // 2: shadowed by 3 below
        place(8, 2.7, 4);   // 3: younger mark on the same branch
        place(2, 0.25, 1);  // 4: private to leaf 2
    }
};

} // namespace

TEST_CASE("hand example: spectrum, partition, shadowing", "[mutation]") {
    const HandExample ex;
    const auto spectrum = coalsim::site_spectrum(ex.tree, ex.overlay);
    REQUIRE(spectrum.total == 5);
    REQUIRE(spectrum.by_size[1] == 2);
    REQUIRE(spectrum.by_size[2] == 1);
    REQUIRE(spectrum.by_size[3] == 0);
    REQUIRE(spectrum.by_size[4] == 2);

    const auto part = coalsim::allelic_partition(ex.tree, ex.overlay);
    REQUIRE(part.allele_count == 5);
    REQUIRE(part.leaf_type ==
            std::vector<int>{1, 1, 4, 3, 0, -1});
    REQUIRE(part.blocks ==
            std::vector<std::vector<int>>{{4}, {0, 1}, {3}, {2}, {5}});
    REQUIRE(part.block_origin == std::vector<int>{0, 1, 3, 4, -1});

    // Mark 2 exists in the spectrum but never as a type: five marks,
    // four non-ancestral blocks.
    long non_ancestral = 0;
    for (int origin : part.block_origin)
        if (origin >= 0) ++non_ancestral;
    REQUIRE(non_ancestral == 4);

    const auto freqs = coalsim::allele_frequencies(part, 6);
    const std::vector<double> want = {2.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6,
                                      1.0 / 6};
    REQUIRE(freqs.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
        REQUIRE(std::fabs(freqs[i] - want[i]) < 1e-15);

    const auto pmf = coalsim::leaves_under_random_mutation(ex.tree, ex.overlay);
    REQUIRE(std::fabs(pmf[1] - 0.4) < 1e-15);
    REQUIRE(std::fabs(pmf[2] - 0.2) < 1e-15);
    REQUIRE(pmf[3] == 0.0);
    REQUIRE(std::fabs(pmf[4] - 0.4) < 1e-15);
}

TEST_CASE("hand example: unblocked marks", "[mutation]") {
    const HandExample ex;
    // Unblocked: 0 and 4 (private, nothing below), 1 (clean path to
    // leaf 0). Blocked: 2 (older on its branch), 3 (mark 1 in the way).
    REQUIRE(coalsim::unblocked_fraction(ex.tree, ex.overlay, 1) == 0.6);
    REQUIRE(coalsim::unblocked_fraction(ex.tree, ex.overlay, 2) == 0.6);
    REQUIRE_THROWS_AS(coalsim::unblocked_fraction(ex.tree, ex.overlay, 0),
                      std::domain_error);
}

TEST_CASE("hand example: restriction to three leaves", "[mutation]") {
    const HandExample ex;
    const auto r = coalsim::restrict_tree(ex.tree, 3);
    REQUIRE(r.tree.n_leaves == 3);
    // {0,1} join at time 1; leaf 2's lineage passes through the pair
    // node at 1.5 and joins at 2.5.
    REQUIRE(r.tree.num_nodes() == 5);
    REQUIRE(r.tree.tmrca() == 2.5);

    const auto ro = coalsim::restrict_overlay(ex.overlay, r);
    REQUIRE(ro.marks.size() == 2);  // marks 1 and 4 survive
    REQUIRE(ro.marks[0].age == 2.0);
    REQUIRE(ro.marks[0].subtended == 2);
    REQUIRE(ro.marks[1].age == 0.25);
    REQUIRE(ro.marks[1].subtended == 1);

    const auto part = coalsim::allelic_partition(r.tree, ro);
    REQUIRE(part.allele_count == 2);
    REQUIRE(part.blocks == std::vector<std::vector<int>>{{0, 1}, {2}});

    const auto spectrum = coalsim::site_spectrum(r.tree, ro);
    REQUIRE(spectrum.by_size[1] == 1);
    REQUIRE(spectrum.by_size[2] == 1);
}

TEST_CASE("overlay counts are conditionally poissonian", "[mutation]") {
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    RngStream tree_rng(83, 50, 0, StreamPurpose::tree);
    const auto sim = coalsim::simulate_tree(m, 50, tree_rng);
    const double theta = 0.8;
    const double expect = theta * sim.tree.total_length();

    const long reps = 100000;
    double sum = 0.0, sq = 0.0;
    for (long rep = 0; rep < reps; ++rep) {
        RngStream mr(83, 50, rep, StreamPurpose::mutation);
        const auto o = coalsim::overlay_mutations(sim.tree, theta, mr);
        sum += o.total();
        sq += double(o.total()) * o.total();
    }
    const double mean = sum / reps;
    const double var = (sq - sum * sum / reps) / (reps - 1.0);
    REQUIRE(std::fabs(mean / expect - 1.0) < 0.01);
    REQUIRE(var / mean > 0.97);
    REQUIRE(var / mean < 1.03);
}

TEST_CASE("marks sit strictly inside their branches", "[mutation]") {
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    for (int rep = 0; rep < 20; ++rep) {
        RngStream tr(89, 40, rep, StreamPurpose::tree);
        const auto sim = coalsim::simulate_tree(m, 40, tr);
        RngStream mr(89, 40, rep, StreamPurpose::mutation);
        const auto o = coalsim::overlay_mutations(sim.tree, 2.0, mr);
        for (const Mark& mk : o.marks) {
            const int child = mk.edge_child;
            REQUIRE(mk.age > sim.tree.time[child]);
            REQUIRE(mk.age < sim.tree.time[sim.tree.parent[child]]);
            REQUIRE(mk.subtended == sim.tree.leaf_count[child]);
            REQUIRE(mk.subtended < 40);
        }
        long by_edges = std::accumulate(o.edge_marks.begin(),
                                        o.edge_marks.end(), 0L);
        REQUIRE(by_edges == o.total());
    }
}

TEST_CASE("allele count never exceeds mark count plus one", "[mutation]") {
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    for (int rep = 0; rep < 500; ++rep) {
        RngStream tr(97, 50, rep, StreamPurpose::tree);
        const auto sim = coalsim::simulate_tree(m, 50, tr);
        RngStream mr(97, 50, rep, StreamPurpose::mutation);
        const auto o = coalsim::overlay_mutations(sim.tree, 1.0, mr);
        const auto part = coalsim::allelic_partition(sim.tree, o);
        REQUIRE(part.allele_count <= o.total() + 1);
        if (o.total() == 0) {
            REQUIRE(part.allele_count == 0);
        } else {
            REQUIRE(part.allele_count >= 1);
        }
    }
}

TEST_CASE("allelic blocks are dominated by the site spectrum",
          "[mutation]") {
    // Every non-ancestral block traces to a distinct mark subtending at
    // least the block size, so tail counts of block sizes never exceed
    // tail counts of mark sizes.
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    for (int rep = 0; rep < 300; ++rep) {
        RngStream tr(101, 60, rep, StreamPurpose::tree);
        const auto sim = coalsim::simulate_tree(m, 60, tr);
        RngStream mr(101, 60, rep, StreamPurpose::mutation);
        const auto o = coalsim::overlay_mutations(sim.tree, 1.5, mr);
        const auto part = coalsim::allelic_partition(sim.tree, o);
        const auto spectrum = coalsim::site_spectrum(sim.tree, o);

        std::vector<long> block_by_size(61, 0);
        for (std::size_t bidx = 0; bidx < part.blocks.size(); ++bidx)
            if (part.block_origin[bidx] >= 0)
                ++block_by_size[part.blocks[bidx].size()];
        long f_tail = 0, m_tail = 0;
        for (int k = 60; k >= 1; --k) {
            f_tail += block_by_size[k];
            m_tail += k < int(spectrum.by_size.size()) ? spectrum.by_size[k] : 0;
            REQUIRE(f_tail <= m_tail);
        }
    }
}

TEST_CASE("restriction shrinks mutation statistics monotonically",
          "[mutation]") {
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    for (int rep = 0; rep < 300; ++rep) {
        RngStream tr(103, 50, rep, StreamPurpose::tree);
        const auto sim = coalsim::simulate_tree(m, 50, tr);
        RngStream mr(103, 50, rep, StreamPurpose::mutation);
        const auto o = coalsim::overlay_mutations(sim.tree, 1.0, mr);
        const auto part_n = coalsim::allelic_partition(sim.tree, o);

        const auto r = coalsim::restrict_tree(sim.tree, 15);
        const auto ro = coalsim::restrict_overlay(o, r);
        const auto part_m = coalsim::allelic_partition(r.tree, ro);

        REQUIRE(ro.total() <= o.total());
        REQUIRE(part_m.allele_count <= part_n.allele_count);
        REQUIRE(part_m.allele_count <= ro.total() + 1);
        // Re-derived subtended counts agree with the stored ones.
        for (const Mark& mk : ro.marks)
            REQUIRE(mk.subtended == r.tree.leaf_count[mk.edge_child]);
    }
}

TEST_CASE("subsampled mutation counts keep the sampling law", "[mutation]") {
    // Infinite-sites counts on a 10-leaf subsample of a 40-leaf
    // genealogy match direct 10-leaf samples in distribution.
    const auto king = LambdaMeasure::kingman();
    const int reps = 2000;
    std::vector<double> via_restrict, direct;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream tr(107, 40, rep, StreamPurpose::tree);
        const auto big = coalsim::simulate_tree(king, 40, tr);
        RngStream mr(107, 40, rep, StreamPurpose::mutation);
        const auto o = coalsim::overlay_mutations(big.tree, 1.0, mr);
        const auto r = coalsim::restrict_tree(big.tree, 10);
        via_restrict.push_back(double(coalsim::restrict_overlay(o, r).total()));

        RngStream tr2(109, 10, rep, StreamPurpose::tree);
        const auto small = coalsim::simulate_tree(king, 10, tr2);
        RngStream mr2(109, 10, rep, StreamPurpose::mutation);
        direct.push_back(
            double(coalsim::overlay_mutations(small.tree, 1.0, mr2).total()));
    }
    REQUIRE(oracle::ks_two_sample(via_restrict, direct) <
            oracle::ks_two_sample_crit(reps, reps));
}

TEST_CASE("random mark age edge cases", "[mutation]") {
    const HandExample ex;
    RngStream rng(113, 0, 0, StreamPurpose::aux);
    for (int i = 0; i < 50; ++i) {
        const double age = coalsim::random_mutation_age(ex.overlay, rng);
        REQUIRE(age > 0.0);
        REQUIRE(age < ex.tree.tmrca());
    }
    MutationOverlay empty;
    empty.edge_marks.assign(10, 0);
    empty.edge_youngest.assign(10, -1);
    REQUIRE(coalsim::random_mutation_age(empty, rng) == 0.0);
    REQUIRE(coalsim::leaves_under_random_mutation(ex.tree, empty).empty());
    REQUIRE(coalsim::unblocked_fraction(ex.tree, empty, 1) == 0.0);
}

TEST_CASE("a lone mark is always unblocked", "[mutation]") {
    const auto m = LambdaMeasure::beta_coalescent(1.5);
    RngStream tr(127, 30, 0, StreamPurpose::tree);
    const auto sim = coalsim::simulate_tree(m, 30, tr);
    MutationOverlay o;
    o.theta = 1.0;
    o.edge_marks.assign(sim.tree.num_nodes(), 0);
    o.edge_youngest.assign(sim.tree.num_nodes(), -1);
    const int edge = sim.tree.root() - 1;  // some internal branch
    o.marks.push_back(
        {edge, sim.tree.time[edge] + 1e-9, sim.tree.leaf_count[edge]});
    o.edge_marks[edge] = 1;
    o.edge_youngest[edge] = 0;
    REQUIRE(coalsim::unblocked_fraction(sim.tree, o, 1) == 1.0);
    REQUIRE(coalsim::unblocked_fraction(sim.tree, o, 3) == 1.0);
}
