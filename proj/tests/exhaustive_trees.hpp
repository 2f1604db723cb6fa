#ifndef CQDYN_TESTS_EXHAUSTIVE_TREES_HPP
#define CQDYN_TESTS_EXHAUSTIVE_TREES_HPP

// Exhaustive search over free-connex join tree shapes, used to confirm that
// no tree of smaller height exists for a query. A shape is an input forest
// (the part below all generalized nodes — generalized nodes never sit below
// inputs) plus a crown of generalized nodes the forest roots attach to.
// Labels are canonicalized: a crown node must carry exactly the attributes
// whose input occurrences it separates (Steiner interiors), closed downward
// for the containment rule, and may carry anything common to every input
// below it. The feasibility test is permissive (it may overclaim), so a
// "feasible below target" answer is re-verified by building a concrete tree
// and running the real validator; refutations are sound.

#include <algorithm>
#include <vector>

#include "cqdyn/analyzer.hpp"
#include "cqdyn/core.hpp"

namespace testutil {

using namespace cqdyn;

namespace exhaustive_detail {

struct Shape {
    // crown nodes 0..m-1 (node 0 is the tree root when m > 0), then inputs
    int m = 0;
    std::vector<int> cpar;    // crown parent (crown index), -1 for node 0
    std::vector<int> attach;  // per input: crown index of the parent of its
                              // forest root chain owner (-1 when not a root)
    std::vector<int> ipar;    // per input: parent input or -1 for forest roots
};

struct ShapeCheck {
    const ConjunctiveQuery& q;
    int n;
    Mask ybar;

    explicit ShapeCheck(const ConjunctiveQuery& query)
        : q(query), n(query.num_rels()), ybar(query.output_mask()) {}

    // Unified node ids: 0..m-1 crown, m..m+n-1 inputs.
    bool feasible(const Shape& s, JoinTree* out_tree) const {
        const int m = s.m;
        const int total = m + n;
        std::vector<int> parent(total, -1);
        for (int g = 1; g < m; ++g) parent[g] = s.cpar[g];
        for (int i = 0; i < n; ++i)
            parent[m + i] = s.ipar[i] >= 0 ? m + s.ipar[i] : s.attach[i];
        std::vector<std::vector<int>> children(total);
        int root = m > 0 ? 0 : -1;
        for (int v = 0; v < total; ++v) {
            if (parent[v] < 0) {
                if (v < m) continue;  // crown root
                if (m == 0) {
                    if (root != -1) return false;  // two crownless roots
                    root = v;
                }
                continue;
            }
            children[parent[v]].push_back(v);
        }
        if (root < 0) return false;
        // crown leaves must own at least one input
        std::vector<char> has_input_below(total, 0);
        // subtree input masks for allowed-labels
        std::vector<Mask> allowed(total, ~Mask{0});
        std::vector<int> order;  // topological, root first
        order.push_back(root);
        for (std::size_t i = 0; i < order.size(); ++i)
            for (int c : children[order[i]]) order.push_back(c);
        if (static_cast<int>(order.size()) != total) return false;  // disconnected
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int v = *it;
            if (v >= m) {
                allowed[v] &= q.rel(v - m).attr_mask();
                has_input_below[v] = 1;
            }
            if (parent[v] >= 0) {
                allowed[parent[v]] &= allowed[v];
                has_input_below[parent[v]] |= has_input_below[v];
            }
        }
        for (int g = 0; g < m; ++g)
            if (!has_input_below[g]) return false;

        // Steiner needs per attribute: a node lies between two occurrences.
        std::vector<Mask> need(total, 0);
        for (int a = 0; a < q.num_attrs(); ++a) {
            int total_occ = 0;
            std::vector<int> cnt(total, 0);
            for (int i = 0; i < n; ++i)
                if (has_bit(q.rel(i).attr_mask(), a)) {
                    ++total_occ;
                    ++cnt[m + i];
                }
            if (total_occ <= 1) continue;
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                int v = *it;
                if (parent[v] >= 0) cnt[parent[v]] += cnt[v];
            }
            for (int v = 0; v < total; ++v) {
                int parts = 0;
                int self_occ = v >= m && has_bit(q.rel(v - m).attr_mask(), a);
                for (int c : children[v])
                    if (cnt[c] > 0) ++parts;
                if (total_occ - cnt[v] > 0) ++parts;  // occurrences outside
                if (self_occ) ++parts;
                if (parts >= 2) need[v] |= bit(a);
            }
        }
        for (int i = 0; i < n; ++i)
            if (need[m + i] & ~q.rel(i).attr_mask()) return false;
        for (int g = 0; g < m; ++g)
            if (need[g] & ~allowed[g]) return false;

        // Canonical crown labels: needs closed downward (containment rule).
        std::vector<Mask> label(total, 0);
        for (int v : order) {
            if (v < m) {
                label[v] = need[v];
                if (parent[v] >= 0) label[v] |= label[parent[v]];
                if (label[v] & ~allowed[v]) return false;
            } else {
                label[v] = q.rel(v - m).attr_mask();
            }
        }
        // crown-to-input guard
        for (int i = 0; i < n; ++i)
            if (s.ipar[i] < 0 && label[s.attach[i]] & ~q.rel(i).attr_mask())
                return false;

        // Permissive connex: nodes reachable from the root over output-only
        // shares; every output must be coverable by a reachable input or by a
        // reachable crown node allowed to carry it.
        std::vector<char> reach(total, 0);
        reach[root] = 1;
        for (int v : order) {
            if (v == root) continue;
            int p = parent[v];
            if (reach[p] && ((label[v] & label[p]) & ~ybar) == 0) reach[v] = 1;
        }
        Mask coverable = 0;
        for (int v = 0; v < total; ++v) {
            if (!reach[v]) continue;
            coverable |= v < m ? (label[v] | (allowed[v] & ybar)) : label[v];
        }
        if (ybar & ~coverable) return false;

        if (out_tree) {
            out_tree->nodes.clear();
            out_tree->connex.clear();
            for (int v = 0; v < total; ++v) {
                JoinTreeNode node;
                node.is_input = v >= m;
                node.rel = v >= m ? v - m : -1;
                node.attrs = label[v];
                node.parent = parent[v];
                node.children = children[v];
                out_tree->nodes.push_back(node);
            }
            out_tree->root = root;
        }
        return true;
    }
};

// Enumerates crown trees with every node carrying >= 2 children (crown or
// attached forest roots) except that a single node may carry everything.
template <typename F>
void enumerate_crowns(int t, F&& f) {
    // m = number of crown nodes; cpar canonical (parent index < child index)
    for (int m = 1; m <= std::max(1, t); ++m) {
        std::vector<int> cpar(m, -1);
        auto rec_parents = [&](auto&& self, int i) -> void {
            if (i == m) {
                // attachments: each root -> crown node
                std::vector<int> attach(t, 0);
                auto rec_attach = [&](auto&& self2, int r) -> void {
                    if (r == t) {
                        // contraction rule: every crown node needs >= 2
                        // children unless it is the only node
                        std::vector<int> deg(m, 0);
                        for (int g = 1; g < m; ++g) ++deg[cpar[g]];
                        for (int a : attach) ++deg[a];
                        for (int g = 0; g < m; ++g)
                            if (m > 1 && deg[g] < 2) return;
                        f(m, cpar, attach);
                        return;
                    }
                    for (int g = 0; g < m; ++g) {
                        attach[r] = g;
                        self2(self2, r + 1);
                    }
                };
                rec_attach(rec_attach, 0);
                return;
            }
            for (int p = 0; p < i; ++p) {
                cpar[i] = p;
                self(self, i + 1);
            }
        };
        rec_parents(rec_parents, 1);
    }
}

}  // namespace exhaustive_detail

/// True when some free-connex join tree of height <= h might exist
/// (permissive); when `confirmed` is set, a concrete tree passed the real
/// validator. Refutations (return false) are sound.
inline bool tree_feasible_at_height(const ConjunctiveQuery& q, int h,
                                    bool* confirmed = nullptr,
                                    JoinTree* witness = nullptr) {
    using namespace exhaustive_detail;
    const int n = q.num_rels();
    if (confirmed) *confirmed = false;
    if (h < 1) return false;
    ShapeCheck checker(q);

    std::vector<int> ipar(n, -1);
    bool any = false;
    auto try_forest = [&](auto&& self, int i) -> void {
        if (any && !confirmed) return;
        if (i == n) {
            // depth check
            std::vector<int> depth(n, -1);
            auto depth_of = [&](auto&& d, int v) -> int {
                if (depth[v] >= 0) return depth[v];
                depth[v] = ipar[v] < 0 ? 1 : d(d, ipar[v]) + 1;
                return depth[v];
            };
            for (int v = 0; v < n; ++v)
                if (depth_of(depth_of, v) > h) return;
            std::vector<int> roots;
            for (int v = 0; v < n; ++v)
                if (ipar[v] < 0) roots.push_back(v);
            int t = static_cast<int>(roots.size());

            Shape s;
            s.ipar = ipar;
            s.attach.assign(n, -1);
            if (t == 1) {
                s.m = 0;
                if (checker.feasible(s, nullptr)) {
                    any = true;
                    if (confirmed && !*confirmed) {
                        JoinTree cand;
                        checker.feasible(s, &cand);
                        // connex set from the validator's maximal rule
                        std::deque<int> dq{cand.root};
                        std::vector<char> in(cand.nodes.size(), 0);
                        in[cand.root] = 1;
                        cand.connex.push_back(cand.root);
                        while (!dq.empty()) {
                            int x = dq.front();
                            dq.pop_front();
                            for (int c : cand.nodes[x].children) {
                                if ((cand.nodes[c].attrs & cand.nodes[x].attrs) &
                                    ~q.output_mask())
                                    continue;
                                in[c] = 1;
                                cand.connex.push_back(c);
                                dq.push_back(c);
                            }
                        }
                        if (validate_join_tree(q, cand).all()) {
                            *confirmed = true;
                            if (witness) *witness = cand;
                        }
                    }
                }
            }
            enumerate_crowns(t, [&](int m, const std::vector<int>& cpar,
                                    const std::vector<int>& attach) {
                if (any && !confirmed) return;
                if (any && confirmed && *confirmed) return;
                Shape sc;
                sc.m = m;
                sc.cpar = cpar;
                sc.ipar = ipar;
                sc.attach.assign(n, -1);
                for (int r = 0; r < t; ++r) sc.attach[roots[r]] = attach[r];
                if (checker.feasible(sc, nullptr)) {
                    any = true;
                    if (confirmed && !*confirmed) {
                        JoinTree cand;
                        checker.feasible(sc, &cand);
                        std::deque<int> dq{cand.root};
                        std::vector<char> in(cand.nodes.size(), 0);
                        in[cand.root] = 1;
                        cand.connex.push_back(cand.root);
                        while (!dq.empty()) {
                            int x = dq.front();
                            dq.pop_front();
                            for (int c : cand.nodes[x].children) {
                                if ((cand.nodes[c].attrs & cand.nodes[x].attrs) &
                                    ~q.output_mask())
                                    continue;
                                in[c] = 1;
                                cand.connex.push_back(c);
                                dq.push_back(c);
                            }
                        }
                        if (validate_join_tree(q, cand).all()) {
                            *confirmed = true;
                            if (witness) *witness = cand;
                        }
                    }
                }
            });
            return;
        }
        for (int p = -1; p < n; ++p) {
            if (p == i) continue;
            // avoid cycles: only allow parents that do not create one
            if (p >= 0) {
                int v = p;
                bool cyc = false;
                while (v >= 0) {
                    if (v == i) {
                        cyc = true;
                        break;
                    }
                    v = ipar[v];
                }
                if (cyc) continue;
            }
            ipar[i] = p;
            self(self, i + 1);
        }
        ipar[i] = -1;
    };
    try_forest(try_forest, 0);
    return any;
}

}  // namespace testutil

#endif
