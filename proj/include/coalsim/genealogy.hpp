#pragma once

// Exact simulation of the n-leaf coalescent driven by a LambdaMeasure,
// plus the tree/trajectory containers and the restriction map.
//
// The event loop is the standard one: with b blocks alive, wait an
// Exponential with the total merger rate, pick a merger size from the
// size distribution C(b,k) lambda(b,k) / lambda_b, merge a uniform
// k-subset. What makes it run at n = 1e5 is how the size distribution
// is evaluated: for atom/Beta/uniform/power measures both the total
// rates and the consecutive weight ratios satisfy exact two-term
// recurrences, so sampling needs no per-b table and no lgamma calls.
// Truncated closed-form measures reuse the untruncated proposal stream
// and thin each proposed event by the probability that its latent
// impact lands inside the support; rejected proposals advance time but
// change no state, which reproduces the truncated process exactly.
// Everything else falls back to cached full rate tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coalsim/levy_kernel.hpp"
#include "coalsim/measure.hpp"
#include "coalsim/random.hpp"

namespace coalsim {

// Leaves occupy ids 0..n-1 at time 0; internal nodes follow in merge
// order, so ids and merge times increase together. Leaf labels reported
// externally (Newick, restriction) are 1-based.
struct GenealogyTree {
    int n_leaves = 0;
    std::vector<double> time;
    std::vector<int> parent;                 // -1 at the root
    std::vector<std::vector<int>> children;  // empty at leaves
    std::vector<int> leaf_count;

    int num_nodes() const { return static_cast<int>(time.size()); }
    int root() const { return num_nodes() - 1; }
    double tmrca() const { return time[root()]; }

    // Sum of all branch lengths; n = 1 has no branches.
    double total_length() const {
        double len = 0.0;
        const int r = root();
        for (int v = 0; v < num_nodes(); ++v)
            if (v != r) len += time[parent[v]] - time[v];
        return len;
    }
};

struct BlockTrajectory {
    int n = 0;
    std::vector<double> jump_times;  // strictly increasing
    std::vector<int> counts;         // size jumps+1, counts[0] = n, back() = 1

    // N(t): block count at time t >= 0, right-continuous.
    int count_at(double t) const {
        const auto it =
            std::upper_bound(jump_times.begin(), jump_times.end(), t);
        return counts[static_cast<std::size_t>(it - jump_times.begin())];
    }

    // integral of N over [0, tmrca]; equal to the tree length.
    double integral_count() const {
        double acc = 0.0, prev = 0.0;
        for (std::size_t i = 0; i < jump_times.size(); ++i) {
            acc += counts[i] * (jump_times[i] - prev);
            prev = jump_times[i];
        }
        return acc;
    }
};

struct SimulatedGenealogy {
    GenealogyTree tree;
    BlockTrajectory trajectory;
};

namespace detail {

// Merger-size proposal machinery shared by one simulation run.
class MergerSampler {
  public:
    MergerSampler(const LambdaMeasure& m, int n) : measure_(m) {
        if (m.kind() == MeasureKind::kingman) {
            mode_ = Mode::kingman;
            return;
        }
        if (m.closed_form()) {
            mode_ = m.is_truncated() ? Mode::closed_thinned : Mode::closed;
            build_totals(n);
            return;
        }
        mode_ = Mode::table;
    }

    // Total rate of the proposal process at block count b. For the
    // thinned mode this is the untruncated rate; acceptance happens in
    // propose().
    double proposal_rate(int b) const {
        switch (mode_) {
            case Mode::kingman:
                return 0.5 * double(b) * double(b - 1) * measure_.total_mass();
            case Mode::closed:
            case Mode::closed_thinned:
                return lam_total_[b];
            case Mode::table:
                return rate_table(measure_, b)->total;
        }
        return 0.0;
    }

    // One proposed event at block count b: the merger size, or nothing
    // when a thinned proposal was rejected.
    std::optional<int> propose(int b, RngStream& rng) {
        switch (mode_) {
            case Mode::kingman:
                return 2;
            case Mode::closed: {
                return walk_size(b, rng.uniform());
            }
            case Mode::closed_thinned: {
                const int k = walk_size(b, rng.uniform());
                const double accept =
                    inc_beta_reg(k - 2 + measure_.shape_a(),
                                 b - k + measure_.shape_b(), measure_.cutoff());
                if (rng.uniform() >= accept) return std::nullopt;
                return k;
            }
            case Mode::table:
                return sample_merger_size(*rate_table(measure_, b),
                                          rng.uniform());
        }
        return std::nullopt;
    }

  private:
    enum class Mode { kingman, closed, closed_thinned, table };

    // Exact recurrences, valid for any measure with collision rates of
    // the (possibly scaled) Beta form:
    //   lambda(b+1,2) = lambda(b,2) * (b-2+sb) / (b-2+sa+sb)
    //   lambda_total(b+1) = lambda_total(b) + b * lambda(b+1,2)
    // The second holds for every Lambda-measure; the first is the Beta
    // identity that removes all special functions from the hot path.
    void build_totals(int n) {
        const double sa = measure_.shape_a(), sb = measure_.shape_b();
        const int cap = std::max(n, 2);
        lam_pair_.assign(cap + 1, 0.0);
        lam_total_.assign(cap + 1, 0.0);
        lam_pair_[2] = std::exp(measure_.log_coeff() + log_beta(sa, sb));
        lam_total_[2] = lam_pair_[2];
        for (int b = 3; b <= cap; ++b) {
            lam_pair_[b] =
                lam_pair_[b - 1] * (b - 3 + sb) / (b - 3 + sa + sb);
            lam_total_[b] = lam_total_[b - 1] + (b - 1) * lam_pair_[b];
        }
    }

    // Inverse CDF over merger sizes by walking consecutive weight
    // ratios; expected number of steps is the mean merger size, an O(1)
    // constant for every measure in the closed family. Boundary ties go
    // to the smaller k, matching the table sampler.
    int walk_size(int b, double u) const {
        const double sa = measure_.shape_a(), sb = measure_.shape_b();
        const double target = u * lam_total_[b];
        double weight = 0.5 * double(b) * double(b - 1) * lam_pair_[b];
        double cum = weight;
        int k = 2;
        while (cum < target && k < b) {
            weight *= (double(b - k) * (k - 2 + sa)) /
                      (double(k + 1) * (b - k - 1 + sb));
            ++k;
            cum += weight;
        }
        return k;
    }

    const LambdaMeasure& measure_;
    Mode mode_;
    std::vector<double> lam_pair_;   // lambda(b,2)
    std::vector<double> lam_total_;  // lambda_b
};

} // namespace detail

// Draw one n-leaf genealogy. Consumes only the given stream, in a fixed
// order, so equal (measure, n, stream address) replays bit-identically.
inline SimulatedGenealogy simulate_tree(const LambdaMeasure& measure, int n,
                                        RngStream& rng) {
    if (n < 1) throw std::domain_error("simulate_tree: need n >= 1");
    SimulatedGenealogy out;
    GenealogyTree& tree = out.tree;
    tree.n_leaves = n;
    const int max_nodes = 2 * n;  // at most n-1 internal nodes
    tree.time.reserve(max_nodes);
    tree.parent.reserve(max_nodes);
    tree.children.reserve(max_nodes);
    tree.leaf_count.reserve(max_nodes);
    for (int i = 0; i < n; ++i) {
        tree.time.push_back(0.0);
        tree.parent.push_back(-1);
        tree.children.emplace_back();
        tree.leaf_count.push_back(1);
    }
    out.trajectory.n = n;
    out.trajectory.counts.push_back(n);
    if (n == 1) return out;

    detail::MergerSampler sampler(measure, n);
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    double t = 0.0;
    while (pool.size() >= 2) {
        const int b = static_cast<int>(pool.size());
        t += rng.exponential(sampler.proposal_rate(b));
        const std::optional<int> proposed = sampler.propose(b, rng);
        if (!proposed) continue;
        const int k = *proposed;
        // Uniform k-subset: partial Fisher-Yates over the block pool.
        for (int i = 0; i < k; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.below(b - i));
            std::swap(pool[i], pool[j]);
        }
        const int node = tree.num_nodes();
        std::vector<int> merged(pool.begin(), pool.begin() + k);
        std::sort(merged.begin(), merged.end());
        int leaves = 0;
        for (int c : merged) {
            tree.parent[c] = node;
            leaves += tree.leaf_count[c];
        }
        tree.time.push_back(t);
        tree.parent.push_back(-1);
        tree.children.push_back(std::move(merged));
        tree.leaf_count.push_back(leaves);
        pool[0] = node;
        for (int i = k; i < b; ++i) pool[i - k + 1] = pool[i];
        pool.resize(b - k + 1);
        out.trajectory.jump_times.push_back(t);
        out.trajectory.counts.push_back(static_cast<int>(pool.size()));
    }
    return out;
}

struct RestrictedTree {
    GenealogyTree tree;
    // Per original node: its image in the restricted tree (-1 when the
    // lineage carries no retained leaf), and the retained-leaf count.
    std::vector<int> rep;
    std::vector<int> retained;
};

// Subtree spanned by leaves 1..m with pass-through nodes contracted and
// every retained path keeping its length. m = n yields an isomorphic
// copy with the same leaf ids.
inline RestrictedTree restrict_tree(const GenealogyTree& t, int m) {
    if (m < 1 || m > t.n_leaves)
        throw std::domain_error("restrict_tree: need 1 <= m <= n");
    RestrictedTree out;
    const int nodes = t.num_nodes();
    out.rep.assign(nodes, -1);
    out.retained.assign(nodes, 0);
    GenealogyTree& rt = out.tree;
    rt.n_leaves = m;
    for (int i = 0; i < m; ++i) {
        out.rep[i] = i;
        out.retained[i] = 1;
        rt.time.push_back(0.0);
        rt.parent.push_back(-1);
        rt.children.emplace_back();
        rt.leaf_count.push_back(1);
    }
    // Children precede parents in id order, one ascending pass suffices.
    for (int v = t.n_leaves; v < nodes; ++v) {
        std::vector<int> live;
        int count = 0;
        for (int c : t.children[v]) {
            if (out.retained[c] > 0) {
                live.push_back(out.rep[c]);
                count += out.retained[c];
            }
        }
        out.retained[v] = count;
        if (count == 0) continue;
        if (live.size() == 1) {
            out.rep[v] = live[0];  // pass-through, contracted away
            continue;
        }
        const int node = rt.num_nodes();
        for (int c : live) rt.parent[c] = node;
        rt.time.push_back(t.time[v]);
        rt.parent.push_back(-1);
        rt.children.push_back(std::move(live));
        rt.leaf_count.push_back(count);
        out.rep[v] = node;
        if (count == m) break;  // restricted root reached
    }
    return out;
}

// One row per grid offset: the simulated block count against the speed
// function evaluated at the same distance past t_n.
struct SpeedRow {
    double t;
    int simulated;
    double predicted;
    double ratio;
};

inline std::vector<SpeedRow> trajectory_stats(const BlockTrajectory& traj,
                                              const LevyKernel& kernel,
                                              const std::vector<double>& grid) {
    const GreyResult grey = kernel.grey_condition();
    if (grey.status != GreyResult::Status::finite)
        throw std::domain_error(
            "trajectory_stats: measure does not come down from infinity");
    const double tn = kernel.t_n(static_cast<double>(traj.n));
    std::vector<SpeedRow> rows;
    rows.reserve(grid.size());
    for (double t : grid) {
        if (!(t > 0.0))
            throw std::domain_error("trajectory_stats: grid times must be > 0");
        const double v = kernel.speed_v(tn + t);
        const int sim = traj.count_at(t);
        rows.push_back({t, sim, v, double(sim) / v});
    }
    return rows;
}

// Newick serialization with branch lengths, leaf labels 1-based.
// Iterative so deep caterpillar trees cannot overflow the stack.
inline std::string to_newick(const GenealogyTree& t) {
    std::string s;
    s.reserve(static_cast<std::size_t>(t.num_nodes()) * 12);
    char buf[64];
    auto close_node = [&](int v) {
        if (t.parent[v] >= 0) {
            std::snprintf(buf, sizeof buf, ":%.12g",
                          t.time[t.parent[v]] - t.time[v]);
            s += buf;
        }
    };
    struct Frame {
        int node;
        std::size_t next_child;
    };
    std::vector<Frame> stack;
    stack.push_back({t.root(), 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        const int v = f.node;
        if (t.children[v].empty()) {
            std::snprintf(buf, sizeof buf, "%d", v + 1);
            s += buf;
            close_node(v);
            stack.pop_back();
        } else if (f.next_child < t.children[v].size()) {
            s += f.next_child == 0 ? '(' : ',';
            const int child = t.children[v][f.next_child];
            ++f.next_child;  // before push_back: it may invalidate f
            stack.push_back({child, 0});
        } else {
            s += ')';
            close_node(v);
            stack.pop_back();
        }
    }
    s += ';';
    return s;
}

} // namespace coalsim
