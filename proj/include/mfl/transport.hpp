#pragma once
// Exact optimal transport between weighted point clouds.
//
//   w1   — Monge-Kantorovich W_1. Equal-size equal-weight clouds go through a
//          dense Jonker-Volgenant shortest-augmenting-path solver (up to a
//          size threshold); everything else through a bipartite network
//          simplex over a candidate-arc pool with periodic implicit pricing
//          of all pairs. Optimality is certified by a full dual-feasibility
//          scan (complementary slackness), so sparsity never costs exactness.
//   winf — bottleneck distance: bisection over the sorted pairwise distances,
//          feasibility at a threshold by max-flow.
//
// Weights are scaled to int64 (denominator 2^48) so flows are exact; the
// per-entry rounding is ~4e-15, far inside the 1e-10 marginal contract.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "mfl/cloud.hpp"
#include "mfl/common.hpp"
#include "mfl/kernels.hpp"
#include "mfl/state.hpp"

namespace mfl {

struct PlanEntry {
    int64_t i = 0, j = 0;
    double mass = 0.0;
};

struct CouplingResult {
    double cost = 0.0;
    std::vector<PlanEntry> plan;  // sorted by (i, j)
    enum class Kind { w1, winf } kind = Kind::w1;
    // w1 only: duals with u_i + v_j <= c_ij everywhere, equality on support
    std::vector<double> dual_u, dual_v;
};

// Max violation of dual feasibility u_i + v_j <= c_ij over all pairs, and of
// complementary slackness |c_ij - u_i - v_j| on the plan support.
inline double coupling_dual_violation(const WeightedCloud& a, const WeightedCloud& b,
                                      const CouplingResult& res) {
    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static)
    for (int64_t i = 0; i < a.size(); ++i)
        for (int64_t j = 0; j < b.size(); ++j) {
            double slack = res.dual_u[i] + res.dual_v[j] - point_distance(a, i, b, j);
            if (slack > worst) worst = slack;
        }
    for (const auto& e : res.plan) {
        double gap = std::abs(point_distance(a, e.i, b, e.j) - res.dual_u[e.i] - res.dual_v[e.j]);
        if (gap > worst) worst = gap;
    }
    return worst;
}

namespace detail {

constexpr double kWeightScale = 281474976710656.0;  // 2^48

inline bool uniform_weights(const std::vector<double>& w) {
    double expect = 1.0 / (double)w.size();
    for (double x : w)
        if (std::abs(x - expect) > 1e-15) return false;
    return true;
}

inline std::vector<int64_t> scale_weights_to(const std::vector<double>& w, double scale) {
    std::vector<int64_t> out(w.size());
    int64_t total = 0;
    for (size_t i = 0; i < w.size(); ++i) {
        out[i] = (int64_t)std::llround(w[i] * scale);
        total += out[i];
    }
    // fix the rounding residual on the heaviest entries so sums match exactly
    int64_t residual = (int64_t)std::llround(scale) - total;
    if (residual != 0) {
        std::vector<size_t> order(w.size());
        std::iota(order.begin(), order.end(), (size_t)0);
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return w[a] > w[b]; });
        int64_t step = residual > 0 ? 1 : -1;
        size_t q = 0;
        while (residual != 0 && q < order.size() * 4) {
            size_t idx = order[q % order.size()];
            if (out[idx] + step >= 0) {
                out[idx] += step;
                residual -= step;
            }
            ++q;
        }
        require(residual == 0, "weight scaling failed to balance");
    }
    return out;
}

// Common integer units for a pair of weight vectors. Uniform clouds (every
// measure this library produces) integerize exactly via the lcm of the two
// sizes; anything else falls back to 2^48 rounding with a balanced residual
// (per-entry error ~4e-15).
struct UnitWeights {
    std::vector<int64_t> a, b;
    double denom = 1.0;  // mass = units / denom
};

inline UnitWeights weights_to_units(const std::vector<double>& wa, const std::vector<double>& wb) {
    UnitWeights u;
    if (uniform_weights(wa) && uniform_weights(wb)) {
        int64_t ka = (int64_t)wa.size(), kb = (int64_t)wb.size();
        int64_t g = std::gcd(ka, kb);
        int64_t units_a = kb / g, units_b = ka / g;
        u.a.assign(ka, units_a);
        u.b.assign(kb, units_b);
        u.denom = (double)(ka / g) * (double)kb;  // lcm
        return u;
    }
    u.a = scale_weights_to(wa, kWeightScale);
    u.b = scale_weights_to(wb, kWeightScale);
    u.denom = kWeightScale;
    return u;
}

// --------------------------------------------------------------------------
// Dense Jonker-Volgenant shortest augmenting path assignment (equal sizes).
// Returns row -> column matching minimizing total distance, plus the duals.
inline std::vector<int> jv_assignment(const WeightedCloud& a, const WeightedCloud& b,
                                      std::vector<double>& du, std::vector<double>& dv) {
    const int n = (int)a.size();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match_col(n + 1, 0);  // column -> row (1-based), 0 = free
    std::vector<int> way(n + 1, 0);
    const double INF = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        match_col[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match_col[j0], j1 = 0;
            double delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = point_distance(a, i0 - 1, b, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            int j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match_col[j]) row_to_col[match_col[j] - 1] = j - 1;
    du.assign(u.begin() + 1, u.end());
    dv.assign(v.begin() + 1, v.end());
    return row_to_col;
}

// --------------------------------------------------------------------------
// Bipartite transportation network simplex with implicit arc pricing.

class NetworkSimplex {
  public:
    NetworkSimplex(const WeightedCloud& a, const WeightedCloud& b)
        : a_(a), b_(b), ns_((int64_t)a.size()), nt_((int64_t)b.size()), root_(ns_ + nt_) {
        auto units = weights_to_units(a.weights, b.weights);
        supply_ = std::move(units.a);
        demand_ = std::move(units.b);
        denom_ = units.denom;
        // rigorous distance upper bound for tolerances and the artificial cost
        double ra = 0.0, rb = 0.0;
        for (int64_t i = 0; i < ns_; ++i) ra = std::max(ra, norm2(a.p(i), a.dim));
        for (int64_t j = 0; j < nt_; ++j) rb = std::max(rb, norm2(b.p(j), b.dim));
        scale_ = ra + rb + 1.0;
        big_ = 64.0 * scale_;
        enter_tol_ = 1e-12 * scale_;
    }

    void solve(int knn) {
        build_initial_tree();
        seed_candidates(knn);
        int64_t pivots = 0, stall = 0;
        const int64_t cap = 400 * (ns_ + nt_) + 1000000;
        size_t block_start = 0;
        bool bland = false;
        while (true) {
            int enter = find_entering(block_start, bland);
            if (enter < 0) {
                if (!price_all()) break;  // optimal: full scan found no violated pair
                continue;
            }
            int64_t moved = pivot(enter);
            stall = moved == 0 ? stall + 1 : 0;
            bland = stall > 256;
            if (++pivots > cap) throw RuntimeFailure("w1: network simplex exceeded pivot budget");
        }
        for (int64_t v = 0; v < ns_ + nt_; ++v)
            require(art_flow_[v] == 0, "w1: infeasible instance (artificial flow stuck)");
    }

    double total_cost() const {
        KahanSum s;
        for (size_t e = 0; e < arc_tail_.size(); ++e)
            if (arc_flow_[e] > 0) s.add(arc_cost_[e] * ((double)arc_flow_[e] / denom_));
        return s.value();
    }

    std::vector<PlanEntry> plan() const {
        std::vector<PlanEntry> out;
        for (size_t e = 0; e < arc_tail_.size(); ++e)
            if (arc_flow_[e] > 0)
                out.push_back({arc_tail_[e], arc_head_[e] - ns_, (double)arc_flow_[e] / denom_});
        std::sort(out.begin(), out.end(), [](const PlanEntry& x, const PlanEntry& y) {
            return x.i != y.i ? x.i < y.i : x.j < y.j;
        });
        return out;
    }

    // duals with u_i + v_j <= c_ij everywhere and equality on the support
    void duals(std::vector<double>& u, std::vector<double>& v) const {
        u.resize(ns_);
        v.resize(nt_);
        for (int64_t i = 0; i < ns_; ++i) u[i] = pi_[i];
        for (int64_t j = 0; j < nt_; ++j) v[j] = -pi_[ns_ + j];
    }

    double dist(int64_t i, int64_t j) const { return point_distance(a_, i, b_, j); }

  private:
    // ---- tree -------------------------------------------------------------
    void build_initial_tree() {
        const int64_t V = ns_ + nt_ + 1;
        parent_.assign(V, -1);
        parc_.assign(V, -1);   // -2 - v marks the artificial arc of node v
        pdir_.assign(V, 0);
        depth_.assign(V, 0);
        pi_.assign(V, 0.0);
        children_.assign(V, {});
        art_flow_.assign(ns_ + nt_, 0);
        for (int64_t i = 0; i < ns_; ++i) {
            parent_[i] = root_;
            parc_[i] = -2 - (int)i;
            pdir_[i] = +1;  // source -> root
            depth_[i] = 1;
            pi_[i] = big_;
            art_flow_[i] = supply_[i];
            children_[root_].push_back(i);
        }
        for (int64_t j = 0; j < nt_; ++j) {
            int64_t v = ns_ + j;
            parent_[v] = root_;
            parc_[v] = -2 - (int)v;
            pdir_[v] = -1;  // root -> sink
            depth_[v] = 1;
            pi_[v] = -big_;
            art_flow_[v] = demand_[j];
            children_[root_].push_back(v);
        }
    }

    void seed_candidates(int knn) {
        knn = std::max(1, std::min<int>(knn, (int)nt_));
        std::vector<std::pair<double, int64_t>> row((size_t)nt_);
        for (int64_t i = 0; i < ns_; ++i) {
            for (int64_t j = 0; j < nt_; ++j) row[j] = {dist(i, j), j};
            std::nth_element(row.begin(), row.begin() + (knn - 1), row.end());
            for (int q = 0; q < knn; ++q) add_arc(i, row[q].second, row[q].first);
        }
    }

    void add_arc(int64_t i, int64_t j, double c) {
        arc_tail_.push_back(i);
        arc_head_.push_back(ns_ + j);
        arc_cost_.push_back(c);
        arc_flow_.push_back(0);
        arc_in_tree_.push_back(0);
    }

    double reduced_cost(size_t e) const {
        return arc_cost_[e] - pi_[arc_tail_[e]] + pi_[arc_head_[e]];
    }

    int find_entering(size_t& block_start, bool bland) {
        const size_t m = arc_tail_.size();
        if (m == 0) return -1;
        if (bland) {
            for (size_t e = 0; e < m; ++e)
                if (!arc_in_tree_[e] && reduced_cost(e) < -enter_tol_) return (int)e;
            return -1;
        }
        const size_t block = 8192;
        size_t scanned = 0;
        int best = -1;
        double best_rc = -enter_tol_;
        size_t e = block_start % m;
        while (scanned < m) {
            size_t stop = std::min(m, e + block);
            for (; e < stop; ++e, ++scanned)
                if (!arc_in_tree_[e]) {
                    double rc = reduced_cost(e);
                    if (rc < best_rc) {
                        best_rc = rc;
                        best = (int)e;
                    }
                }
            if (best >= 0) {
                block_start = e % m;
                return best;
            }
            if (e >= m) e = 0;
        }
        return -1;
    }

    // full implicit pricing over all pairs; appends violated arcs, returns
    // whether any violation was found
    bool price_all() {
        bool found = false;
        std::vector<std::pair<double, int64_t>> best_per_row((size_t)ns_, {-enter_tol_, -1});
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < ns_; ++i) {
            double pi_i = pi_[i];
            double best_rc = -enter_tol_;
            int64_t best_j = -1;
            for (int64_t j = 0; j < nt_; ++j) {
                double rc = dist(i, j) - pi_i + pi_[ns_ + j];
                if (rc < best_rc) {
                    best_rc = rc;
                    best_j = j;
                }
            }
            best_per_row[i] = {best_rc, best_j};
        }
        for (int64_t i = 0; i < ns_; ++i)
            if (best_per_row[i].second >= 0) {
                add_arc(i, best_per_row[i].second, dist(i, best_per_row[i].second));
                found = true;
            }
        return found;
    }

    // artificial arc flow access: node v <-> root
    int64_t& art(int64_t v) { return art_flow_[v]; }

    struct CycleArc {
        int64_t node;  // child endpoint of the tree arc
        bool aligned;  // does the arc orientation match the cycle direction
    };

    int64_t pivot(int e) {
        const int64_t u = arc_tail_[e], w = arc_head_[e];
        // collect both paths to the apex
        int64_t x = u, y = w;
        std::vector<int64_t> up_u, up_w;
        while (x != y) {
            if (depth_[x] >= depth_[y]) {
                up_u.push_back(x);
                x = parent_[x];
            } else {
                up_w.push_back(y);
                y = parent_[y];
            }
        }
        // cycle direction: u ->(e) w -> apex -> u
        // w-side: travel child -> parent, aligned iff pdir = +1
        // u-side: travel parent -> child, aligned iff pdir = -1
        int64_t theta = std::numeric_limits<int64_t>::max();
        int64_t leave_node = -1;
        auto consider = [&](int64_t nodeq, bool aligned) {
            if (aligned) return;
            int64_t f = flow_of(nodeq);
            if (f < theta) {
                theta = f;
                leave_node = nodeq;
            }
        };
        for (int64_t nq : up_w) consider(nq, pdir_[nq] == +1);
        for (int64_t nq : up_u) consider(nq, pdir_[nq] == -1);
        require(leave_node >= 0, "w1: no leaving arc (unbounded pivot)");

        // apply flow change
        arc_flow_[e] += theta;
        for (int64_t nq : up_w) add_flow(nq, pdir_[nq] == +1 ? theta : -theta);
        for (int64_t nq : up_u) add_flow(nq, pdir_[nq] == -1 ? theta : -theta);

        // re-hang: removing leave_node's parent arc splits off the subtree
        // containing exactly one endpoint of e
        bool on_w_side = false;
        for (int64_t nq : up_w)
            if (nq == leave_node) on_w_side = true;
        int64_t q = on_w_side ? w : u;

        int leave_arc = parc_[leave_node];
        if (leave_arc >= 0) arc_in_tree_[leave_arc] = 0;

        // reverse the parent chain from q up to leave_node; every node on the
        // chain leaves its old parent's child list exactly once
        int64_t cur = q, prev_parent = -1;
        int prev_arc = 0, prev_dir = 0;
        bool have_prev = false;
        while (true) {
            int64_t nxt = parent_[cur];
            int carc = parc_[cur];
            int cdir = pdir_[cur];
            detach(cur);
            if (have_prev) {
                parent_[cur] = prev_parent;
                parc_[cur] = prev_arc;
                pdir_[cur] = -prev_dir;
                children_[prev_parent].push_back(cur);
            }
            if (cur == leave_node) break;
            prev_parent = cur;
            prev_arc = carc;
            prev_dir = cdir;
            have_prev = true;
            cur = nxt;
        }

        // attach q below the other endpoint of e
        arc_in_tree_[e] = 1;
        if (q == u) {
            parent_[u] = w;
            parc_[u] = e;
            pdir_[u] = +1;
            children_[w].push_back(u);
        } else {
            parent_[w] = u;
            parc_[w] = e;
            pdir_[w] = -1;
            children_[u].push_back(w);
        }
        refresh_subtree(q);
        return theta;
    }

    int64_t flow_of(int64_t nodeq) {
        int arc = parc_[nodeq];
        return arc >= 0 ? arc_flow_[arc] : art(-(arc + 2));
    }
    void add_flow(int64_t nodeq, int64_t delta) {
        int arc = parc_[nodeq];
        if (arc >= 0)
            arc_flow_[arc] += delta;
        else
            art(-(arc + 2)) += delta;
    }
    double cost_of_parc(int64_t nodeq) const {
        int arc = parc_[nodeq];
        return arc >= 0 ? arc_cost_[arc] : big_;
    }

    void detach(int64_t nodeq) {
        auto& sib = children_[parent_[nodeq]];
        for (size_t k = 0; k < sib.size(); ++k)
            if (sib[k] == nodeq) {
                sib[k] = sib.back();
                sib.pop_back();
                break;
            }
    }

    // recompute potentials and depths below (and including) nodeq
    void refresh_subtree(int64_t top) {
        std::vector<int64_t> stack{top};
        while (!stack.empty()) {
            int64_t v = stack.back();
            stack.pop_back();
            int64_t p = parent_[v];
            depth_[v] = depth_[p] + 1;
            double c = cost_of_parc(v);
            pi_[v] = pdir_[v] == +1 ? c + pi_[p] : pi_[p] - c;
            for (int64_t ch : children_[v]) stack.push_back(ch);
        }
    }

    const WeightedCloud& a_;
    const WeightedCloud& b_;
    int64_t ns_, nt_, root_;
    std::vector<int64_t> supply_, demand_;
    double denom_ = 1.0;
    double scale_ = 1.0, big_ = 1.0, enter_tol_ = 1e-12;

    std::vector<int64_t> arc_tail_, arc_head_;
    std::vector<double> arc_cost_;
    std::vector<int64_t> arc_flow_;
    std::vector<char> arc_in_tree_;

    std::vector<int64_t> parent_;
    std::vector<int> parc_, pdir_;
    std::vector<int64_t> depth_;
    std::vector<double> pi_;
    std::vector<std::vector<int64_t>> children_;
    std::vector<int64_t> art_flow_;
};

// --------------------------------------------------------------------------
// Dinic max-flow for bottleneck feasibility

class Dinic {
  public:
    explicit Dinic(int n) : head_(n, -1), level_(n), it_(n) {}

    void add_edge(int u, int v, int64_t cap) {
        edges_.push_back({v, head_[u], cap});
        head_[u] = (int)edges_.size() - 1;
        edges_.push_back({u, head_[v], 0});
        head_[v] = (int)edges_.size() - 1;
    }

    int64_t max_flow(int s, int t) {
        int64_t total = 0;
        while (bfs(s, t)) {
            it_ = head_;
            while (int64_t f = dfs(s, t, std::numeric_limits<int64_t>::max())) total += f;
        }
        return total;
    }

    int64_t edge_flow(int idx) const { return edges_[2 * idx + 1].cap; }  // reverse cap = flow

  private:
    struct E {
        int to, next;
        int64_t cap;
    };
    bool bfs(int s, int t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<int> q;
        q.push(s);
        level_[s] = 0;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int e = head_[u]; e >= 0; e = edges_[e].next)
                if (edges_[e].cap > 0 && level_[edges_[e].to] < 0) {
                    level_[edges_[e].to] = level_[u] + 1;
                    q.push(edges_[e].to);
                }
        }
        return level_[t] >= 0;
    }
    int64_t dfs(int u, int t, int64_t lim) {
        if (u == t) return lim;
        for (int& e = it_[u]; e >= 0; e = edges_[e].next) {
            auto& ed = edges_[e];
            if (ed.cap > 0 && level_[ed.to] == level_[u] + 1) {
                int64_t got = dfs(ed.to, t, std::min(lim, ed.cap));
                if (got > 0) {
                    ed.cap -= got;
                    edges_[e ^ 1].cap += got;
                    return got;
                }
            }
        }
        return 0;
    }
    std::vector<E> edges_;
    std::vector<int> head_, level_, it_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// W_1

inline CouplingResult w1(const WeightedCloud& a, const WeightedCloud& b) {
    a.validate();
    b.validate();
    require(a.dim == b.dim, "w1: dimension mismatch");
    double mass_a = std::accumulate(a.weights.begin(), a.weights.end(), 0.0);
    double mass_b = std::accumulate(b.weights.begin(), b.weights.end(), 0.0);
    require(std::abs(mass_a - mass_b) <= 1e-10, "w1: mass mismatch > 1e-10");

    CouplingResult res;
    res.kind = CouplingResult::Kind::w1;

    bool equal_weights = a.size() == b.size();
    if (equal_weights) {
        for (int64_t i = 0; i < a.size() && equal_weights; ++i)
            equal_weights = std::abs(a.weights[i] - b.weights[i]) <= 1e-15 &&
                            std::abs(a.weights[i] - 1.0 / a.size()) <= 1e-15;
    }

    if (equal_weights && a.size() <= 1500) {
        auto match = detail::jv_assignment(a, b, res.dual_u, res.dual_v);
        KahanSum cost;
        double wgt = 1.0 / a.size();
        for (int64_t i = 0; i < a.size(); ++i) {
            double d = point_distance(a, i, b, match[i]);
            cost.add(wgt * d);
            res.plan.push_back({i, match[i], wgt});
        }
        std::sort(res.plan.begin(), res.plan.end(),
                  [](const PlanEntry& x, const PlanEntry& y) { return x.i < y.i; });
        res.cost = cost.value();
    } else {
        int knn = (int)std::min<int64_t>(b.size(), 16 + 4 * (int64_t)std::log2((double)b.size() + 1));
        detail::NetworkSimplex ns(a, b);
        ns.solve(knn);
        res.cost = ns.total_cost();
        res.plan = ns.plan();
        ns.duals(res.dual_u, res.dual_v);
    }
    // complementary-slackness certificate; the solver is exact, so a failure
    // here means a genuine bug, not a tolerance issue
    double viol = coupling_dual_violation(a, b, res);
    if (viol > 1e-9)
        throw RuntimeFailure("w1: optimality certificate failed, dual violation " +
                             std::to_string(viol));
    return res;
}

// ---------------------------------------------------------------------------
// W_inf (bottleneck)

inline CouplingResult winf(const WeightedCloud& a, const WeightedCloud& b) {
    a.validate();
    b.validate();
    require(a.dim == b.dim, "winf: dimension mismatch");
    double mass_a = std::accumulate(a.weights.begin(), a.weights.end(), 0.0);
    double mass_b = std::accumulate(b.weights.begin(), b.weights.end(), 0.0);
    require(std::abs(mass_a - mass_b) <= 1e-10, "winf: mass mismatch > 1e-10");
    const int64_t ka = a.size(), kb = b.size();
    require(ka * kb <= 40000000, "winf: instance too large for the bottleneck solver");

    std::vector<double> dist((size_t)(ka * kb));
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < ka; ++i)
        for (int64_t j = 0; j < kb; ++j) dist[(size_t)(i * kb + j)] = point_distance(a, i, b, j);

    std::vector<double> levels = dist;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    auto units = detail::weights_to_units(a.weights, b.weights);
    const auto& wa = units.a;
    const auto& wb = units.b;
    int64_t total = 0;
    for (int64_t x : wa) total += x;

    // feasibility: a perfect fractional matching supported on pairs with
    // distance <= t exists iff max-flow saturates the supplies
    auto feasible = [&](double t, detail::Dinic* keep) -> bool {
        const int S = (int)(ka + kb), T = S + 1;
        detail::Dinic dn((int)(ka + kb + 2));
        for (int64_t i = 0; i < ka; ++i) dn.add_edge(S, (int)i, wa[i]);
        for (int64_t j = 0; j < kb; ++j) dn.add_edge((int)(ka + j), T, wb[j]);
        for (int64_t i = 0; i < ka; ++i)
            for (int64_t j = 0; j < kb; ++j)
                if (dist[(size_t)(i * kb + j)] <= t)
                    dn.add_edge((int)i, (int)(ka + j), std::numeric_limits<int64_t>::max() / 4);
        bool ok = dn.max_flow(S, T) == total;
        if (ok && keep) *keep = std::move(dn);
        return ok;
    };

    int64_t lo = 0, hi = (int64_t)levels.size() - 1;
    require(feasible(levels[hi], nullptr), "winf: infeasible at max distance (weights broken)");
    while (lo < hi) {
        int64_t mid = lo + (hi - lo) / 2;
        if (feasible(levels[mid], nullptr))
            hi = mid;
        else
            lo = mid + 1;
    }
    double value = levels[lo];

    // final flow for the plan
    detail::Dinic dn(1);
    feasible(value, &dn);
    CouplingResult res;
    res.kind = CouplingResult::Kind::winf;
    res.cost = value;
    // plan entries: edge order matches insertion order above
    int edge_idx = (int)(ka + kb);
    for (int64_t i = 0; i < ka; ++i)
        for (int64_t j = 0; j < kb; ++j)
            if (dist[(size_t)(i * kb + j)] <= value) {
                int64_t f = dn.edge_flow(edge_idx);
                if (f > 0) res.plan.push_back({i, j, (double)f / units.denom});
                ++edge_idx;
            }
    std::sort(res.plan.begin(), res.plan.end(), [](const PlanEntry& x, const PlanEntry& y) {
        return x.i != y.i ? x.i < y.i : x.j < y.j;
    });
    return res;
}

// ---------------------------------------------------------------------------
// Trajectory-coupled diagnostics

// Holding the initial matching fixed, the running sup over s <= t of
// max_i |Z_a,i(s) - Z_b,sigma(i)(s)| in R^{2d}; one value per sample time.
inline std::vector<double> coupled_sup_distance(const TrajectoryWindow& ta,
                                                const TrajectoryWindow& tb,
                                                const std::vector<int64_t>& matching) {
    ta.validate();
    tb.validate();
    require(ta.states.size() == tb.states.size(), "coupled_sup_distance: grids differ");
    require(std::abs(ta.dt_sample - tb.dt_sample) < 1e-12, "coupled_sup_distance: grids differ");
    const auto& s0 = ta.states[0];
    require(s0.n == tb.states[0].n, "coupled_sup_distance: particle counts differ");
    require((int64_t)matching.size() == s0.n, "coupled_sup_distance: matching size");
    const int d = s0.dim;

    std::vector<double> out;
    out.reserve(ta.states.size());
    double run = 0.0;
    for (size_t s = 0; s < ta.states.size(); ++s) {
        const auto& za = ta.states[s];
        const auto& zb = tb.states[s];
        require(std::abs(za.time - zb.time) < 1e-9, "coupled_sup_distance: time mismatch");
        double mx = 0.0;
        for (int64_t i = 0; i < za.n; ++i) {
            int64_t j = matching[i];
            double r2 = 0;
            for (int c = 0; c < d; ++c) {
                r2 += sqr(za.x(i)[c] - zb.x(j)[c]);
                r2 += sqr(za.v(i)[c] - zb.v(j)[c]);
            }
            mx = std::max(mx, r2);
        }
        run = std::max(run, std::sqrt(mx));
        out.push_back(run);
    }
    return out;
}

// I_alpha: per matched pair i, the empirical mean over j (weight 1/N) of
// (1/tau) int |F(X_a,i - X_a,j) - F(X_b,si - X_b,sj)| ds over the trailing
// tau window, trapezoid rule; F(0) = 0 inside.
inline std::vector<double> i_alpha_diag(const TrajectoryWindow& ta, const TrajectoryWindow& tb,
                                        const std::vector<int64_t>& matching,
                                        const KernelSpec& kernel, double tau) {
    ta.validate();
    tb.validate();
    require(tau > 0, "i_alpha_diag: tau > 0");
    TrajectoryWindow wa = ta;
    wa.tau = tau;
    auto span = detail::window_span(wa);
    const auto& s0 = ta.states[0];
    const int64_t n = s0.n;
    const int d = s0.dim;

    std::vector<double> wt(span.last - span.first + 1, wa.dt_sample);
    if (wt.size() == 1) return std::vector<double>(n, 0.0);
    wt.front() *= 0.5;
    wt.back() *= 0.5;

    std::vector<double> out(n, 0.0);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double acc_i = 0.0;
        std::vector<double> da(d), db(d);
        for (int s = span.first; s <= span.last; ++s) {
            const auto& za = ta.states[s];
            const auto& zb = tb.states[s];
            double w = wt[s - span.first];
            for (int64_t j = 0; j < n; ++j) {
                if (j == i) continue;
                for (int c = 0; c < d; ++c) {
                    da[c] = za.x(i)[c] - za.x(j)[c];
                    db[c] = zb.x(matching[i])[c] - zb.x(matching[j])[c];
                }
                auto fa = force(kernel, da);
                auto fb = force(kernel, db);
                double diff2 = 0;
                for (int c = 0; c < d; ++c) diff2 += sqr(fa[c] - fb[c]);
                acc_i += w * std::sqrt(diff2) / (double)n;
            }
        }
        out[i] = acc_i / tau;
    }
    return out;
}

// J_{alpha+1}: per ordered pair (i, j), the time average of
// K_eps(|X_i - X_j|) over the trailing tau window. Dense output; use the
// row-mean helper for large N.
inline std::vector<double> j_alpha_diag(const TrajectoryWindow& tw, double alpha, double eps,
                                        double r_prime, double tau) {
    tw.validate();
    const auto& s0 = tw.states[0];
    const int64_t n = s0.n;
    require(n <= 1024, "j_alpha_diag: dense output limited to N <= 1024");
    TrajectoryWindow w = tw;
    w.tau = tau;
    auto span = detail::window_span(w);
    std::vector<double> wt(span.last - span.first + 1, w.dt_sample);
    std::vector<double> out((size_t)n * n, 0.0);
    if (wt.size() == 1) return out;
    wt.front() *= 0.5;
    wt.back() *= 0.5;
    const int d = s0.dim;
    for (int s = span.first; s <= span.last; ++s) {
        const auto& st = tw.states[s];
        double wq = wt[s - span.first];
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double r2 = 0;
                for (int c = 0; c < d; ++c) r2 += sqr(st.x(i)[c] - st.x(j)[c]);
                out[(size_t)i * n + j] += wq * kepsilon(std::sqrt(r2), eps, r_prime, alpha);
            }
    }
    for (auto& v : out) v /= tau;
    return out;
}

// (1/N) sum_j of the J_{alpha+1} time averages, per i; feeds the
// |grad^N E|_inf cross-check at scale.
inline std::vector<double> j_alpha_row_mean(const TrajectoryWindow& tw, double alpha, double eps,
                                            double r_prime, double tau) {
    tw.validate();
    const auto& s0 = tw.states[0];
    const int64_t n = s0.n;
    TrajectoryWindow w = tw;
    w.tau = tau;
    auto span = detail::window_span(w);
    std::vector<double> wt(span.last - span.first + 1, w.dt_sample);
    std::vector<double> out(n, 0.0);
    if (wt.size() == 1) return out;
    wt.front() *= 0.5;
    wt.back() *= 0.5;
    const int d = s0.dim;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double acc = 0;
        for (int s = span.first; s <= span.last; ++s) {
            const auto& st = tw.states[s];
            double wq = wt[s - span.first];
            for (int64_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double r2 = 0;
                for (int c = 0; c < d; ++c) r2 += sqr(st.x(i)[c] - st.x(j)[c]);
                acc += wq * kepsilon(std::sqrt(r2), eps, r_prime, alpha);
            }
        }
        out[i] = acc / (tau * (double)n);
    }
    return out;
}

}  // namespace mfl
