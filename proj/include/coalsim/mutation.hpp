#pragma once

// Neutral mutation overlays on a fixed genealogy and the observable
// statistics built from them.
//
// Marks fall on each branch as a Poisson process with intensity theta
// per unit length, positions uniform along the branch. Two readings of
// the same marks:
//   infinite sites:   every mark is a segregating site; the site
//                     frequency spectrum counts marks by subtended
//                     leaves.
//   infinite alleles: a leaf's type is the most recent mark (smallest
//                     age) on its path to the root; marks overwritten on
//                     every descending path are invisible.
// With no marks anywhere both the site count and the allele count are
// reported as zero.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coalsim/genealogy.hpp"
#include "coalsim/random.hpp"

namespace coalsim {

struct Mark {
    int edge_child;   // the branch above this node carries the mark
    double age;       // strictly inside (time[child], time[parent])
    int subtended;    // leaves below the branch
};

struct MutationOverlay {
    double theta = 0.0;
    std::vector<Mark> marks;
    std::vector<int> edge_marks;     // per node: marks on the branch above it
    std::vector<int> edge_youngest;  // per node: mark index with least age, -1

    long total() const { return static_cast<long>(marks.size()); }
};

// Branches are visited in node-id order and each branch draws its count
// before its positions, so the stream layout is reproducible.
inline MutationOverlay overlay_mutations(const GenealogyTree& tree, double theta,
                                         RngStream& rng) {
    if (!(theta >= 0.0) || !std::isfinite(theta))
        throw std::domain_error("overlay_mutations: theta must be finite and >= 0");
    MutationOverlay o;
    o.theta = theta;
    const int nodes = tree.num_nodes();
    o.edge_marks.assign(nodes, 0);
    o.edge_youngest.assign(nodes, -1);
    if (theta == 0.0) return o;
    for (int v = 0; v < nodes; ++v) {
        if (tree.parent[v] < 0) continue;
        const double lo = tree.time[v];
        const double len = tree.time[tree.parent[v]] - lo;
        const long c = rng.poisson(theta * len);
        for (long i = 0; i < c; ++i) {
            const double age = lo + len * rng.uniform_open();
            const int idx = static_cast<int>(o.marks.size());
            o.marks.push_back({v, age, tree.leaf_count[v]});
            ++o.edge_marks[v];
            if (o.edge_youngest[v] < 0 || age < o.marks[o.edge_youngest[v]].age)
                o.edge_youngest[v] = idx;
        }
    }
    return o;
}

// Site frequency spectrum: by_size[k] counts marks subtending exactly k
// leaves, k = 1..n-1. No branch subtends all n leaves.
struct SiteSpectrum {
    long total = 0;
    std::vector<long> by_size;  // index k, entry 0 unused
};

inline SiteSpectrum site_spectrum(const GenealogyTree& tree,
                                  const MutationOverlay& o) {
    SiteSpectrum s;
    s.by_size.assign(static_cast<std::size_t>(tree.n_leaves) + 1, 0);
    for (const Mark& m : o.marks) {
        ++s.by_size[m.subtended];
        ++s.total;
    }
    return s;
}

// Infinite-alleles partition. leaf_type[i] is the index of the youngest
// mark on leaf i's root path, or -1 for the ancestral type.
struct AllelicPartition {
    std::vector<int> leaf_type;
    std::vector<std::vector<int>> blocks;  // leaves per type, ancestral last if present
    std::vector<int> block_origin;         // mark index per block, -1 ancestral
    long allele_count = 0;                 // zero when the overlay is empty
};

inline AllelicPartition allelic_partition(const GenealogyTree& tree,
                                          const MutationOverlay& o) {
    AllelicPartition p;
    const int n = tree.n_leaves;
    p.leaf_type.assign(n, -1);
    if (n == 0) return p;
    // Descend from the root carrying the youngest mark seen so far; any
    // mark on the current branch is younger than everything above it.
    struct Frame {
        int node;
        int carry;
    };
    std::vector<Frame> stack;
    stack.push_back({tree.root(), -1});
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        int carry = f.carry;
        if (tree.parent[f.node] >= 0 && o.edge_youngest[f.node] >= 0)
            carry = o.edge_youngest[f.node];
        if (f.node < n) {
            p.leaf_type[f.node] = carry;
            continue;
        }
        for (int c : tree.children[f.node]) stack.push_back({c, carry});
    }
    // Group leaves by type; ancestral block appended last when present.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const int ta = p.leaf_type[a], tb = p.leaf_type[b];
        if ((ta < 0) != (tb < 0)) return tb < 0;
        if (ta != tb) return ta < tb;
        return a < b;
    });
    for (int i : order) {
        if (p.blocks.empty() || p.block_origin.back() != p.leaf_type[i]) {
            p.blocks.emplace_back();
            p.block_origin.push_back(p.leaf_type[i]);
        }
        p.blocks.back().push_back(i);
    }
    if (!o.marks.empty()) {
        p.allele_count = static_cast<long>(p.blocks.size());
    } else {
        p.allele_count = 0;
    }
    return p;
}

// Age of a uniformly chosen mark; 0 with an empty overlay.
inline double random_mutation_age(const MutationOverlay& o, RngStream& rng) {
    if (o.marks.empty()) return 0.0;
    return o.marks[rng.below(o.marks.size())].age;
}

// Allelic block sizes divided by n, sorted decreasing. The ancestral
// block participates like any other when nonempty.
inline std::vector<double> allele_frequencies(const AllelicPartition& p, int n) {
    std::vector<double> f;
    f.reserve(p.blocks.size());
    for (const auto& b : p.blocks) f.push_back(double(b.size()) / double(n));
    std::sort(f.begin(), f.end(), std::greater<double>());
    return f;
}

// Probability vector over subtended leaf counts of a uniformly chosen
// mark: entry k is M_k / S. Empty when the overlay has no marks.
inline std::vector<double> leaves_under_random_mutation(
    const GenealogyTree& tree, const MutationOverlay& o) {
    std::vector<double> pmf;
    if (o.marks.empty()) return pmf;
    const SiteSpectrum s = site_spectrum(tree, o);
    pmf.assign(s.by_size.size(), 0.0);
    for (std::size_t k = 1; k < s.by_size.size(); ++k)
        pmf[k] = double(s.by_size[k]) / double(s.total);
    return pmf;
}

// A mark is k-unblocked when the paths from it down to the k
// smallest-labeled leaves of its subtending block carry no other mark.
// Returns the unblocked fraction; 0 for an empty overlay.
inline double unblocked_fraction(const GenealogyTree& tree,
                                 const MutationOverlay& o, int k) {
    if (k < 1) throw std::domain_error("unblocked_fraction: need k >= 1");
    if (o.marks.empty()) return 0.0;
    const int nodes = tree.num_nodes();
    // smallest[v]: up to k smallest leaf ids below v, ascending.
    std::vector<std::vector<int>> smallest(nodes);
    for (int v = 0; v < nodes; ++v) {
        if (v < tree.n_leaves) {
            smallest[v] = {v};
            continue;
        }
        std::vector<int>& dst = smallest[v];
        for (int c : tree.children[v])
            dst.insert(dst.end(), smallest[c].begin(), smallest[c].end());
        std::sort(dst.begin(), dst.end());
        if (static_cast<int>(dst.size()) > k) dst.resize(k);
    }
    long unblocked = 0;
    for (std::size_t i = 0; i < o.marks.size(); ++i) {
        const Mark& m = o.marks[i];
        // Only the youngest mark of a branch has a clear run to its own
        // lower endpoint; anything else is blocked on its own branch.
        if (o.edge_youngest[m.edge_child] != static_cast<int>(i)) continue;
        bool blocked = false;
        for (int leaf : smallest[m.edge_child]) {
            for (int u = leaf; u != m.edge_child && !blocked;
                 u = tree.parent[u])
                if (o.edge_marks[u] > 0) blocked = true;
            if (blocked) break;
        }
        if (!blocked) ++unblocked;
    }
    return double(unblocked) / double(o.marks.size());
}

// Marks of a full-tree overlay that lie on the subtree spanned by the
// first m leaves, re-addressed to the restricted tree. A mark survives
// exactly when its branch carries between 1 and m-1 retained leaves:
// zero means the lineage is dropped, m means the branch sits above the
// restricted root. Ages are unchanged because restriction preserves
// path lengths; subtended counts become retained-leaf counts.
inline MutationOverlay restrict_overlay(const MutationOverlay& o,
                                        const RestrictedTree& restricted) {
    const int m = restricted.tree.n_leaves;
    MutationOverlay out;
    out.theta = o.theta;
    const int rnodes = restricted.tree.num_nodes();
    out.edge_marks.assign(rnodes, 0);
    out.edge_youngest.assign(rnodes, -1);
    for (const Mark& mk : o.marks) {
        const int r = restricted.retained[mk.edge_child];
        if (r < 1 || r > m - 1) continue;
        const int child = restricted.rep[mk.edge_child];
        const int idx = static_cast<int>(out.marks.size());
        out.marks.push_back({child, mk.age, r});
        ++out.edge_marks[child];
        if (out.edge_youngest[child] < 0 ||
            mk.age < out.marks[out.edge_youngest[child]].age)
            out.edge_youngest[child] = idx;
    }
    return out;
}

} // namespace coalsim
