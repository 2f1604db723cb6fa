#ifndef CQDYN_ORACLE_HPP
#define CQDYN_ORACLE_HPP

// Brute-force evaluators and parameter computations used as ground truth by
// the analyzer, the star engine and the workload generators. Everything here
// depends only on the core query model, is deterministic, and fails loudly
// when an instance exceeds its size cap.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cqdyn/core.hpp"
#include "cqdyn/star.hpp"

namespace cqdyn {

class OracleCapExceeded : public std::runtime_error {
public:
    explicit OracleCapExceeded(const std::string& what)
        : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Star query evaluation
// ---------------------------------------------------------------------------

/// Distinct projection, onto the last j center attributes, of center tuples
/// whose first k coordinates appear in the respective satellites.
inline TupleSet eval_star_naive(const Database& db, const StarQuerySpec& spec) {
    TupleSet out;
    for (const Tuple& t : db.rel(0)) {
        bool ok = true;
        for (int i = 0; i < spec.k && ok; ++i)
            ok = db.rel(StarQuerySpec::satellite_rel(i)).count(Tuple{t[i]}) > 0;
        if (!ok) continue;
        Tuple proj(t.end() - spec.j, t.end());
        out.insert(std::move(proj));
    }
    return out;
}

/// Second implementation with the membership loop order swapped (linear scans
/// of satellite snapshots instead of hash probes); used for self-consistency.
inline TupleSet eval_star_naive_alt(const Database& db, const StarQuerySpec& spec) {
    std::vector<std::vector<Value>> sats(spec.k);
    for (int i = 0; i < spec.k; ++i)
        for (const Tuple& s : db.rel(StarQuerySpec::satellite_rel(i)))
            sats[i].push_back(s[0]);
    TupleSet out;
    for (const Tuple& t : db.rel(0)) {
        bool ok = true;
        for (int i = 0; i < spec.k && ok; ++i)
            ok = std::find(sats[i].begin(), sats[i].end(), t[i]) != sats[i].end();
        if (ok) out.insert(Tuple(t.end() - spec.j, t.end()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Acyclic query evaluation (nested loops + hash indexes)
// ---------------------------------------------------------------------------

/// Full join of all relations, as complete attribute assignments in attribute
/// id order. Left-deep in relation declaration order with hash indexes on the
/// already-bound overlap. Throws OracleCapExceeded when the intermediate
/// result exceeds `cap` tuples.
inline std::vector<Tuple> eval_join_full(const Database& db,
                                         const ConjunctiveQuery& q,
                                         std::size_t cap = 10'000'000) {
    const int na = q.num_attrs();
    std::vector<Tuple> partials;
    partials.push_back(Tuple(na, kNull));
    Mask bound = 0;
    bool first = true;

    for (const auto& r : q.relations()) {
        Mask overlap = r.attr_mask() & bound;
        std::vector<int> key_pos;  // positions within r's schema that are bound
        for (std::size_t p = 0; p < r.attrs.size(); ++p)
            if (has_bit(overlap, r.attrs[p])) key_pos.push_back(static_cast<int>(p));

        std::unordered_map<Tuple, std::vector<const Tuple*>, TupleHash> index;
        for (const Tuple& t : db.rel(r.id)) {
            Tuple key;
            key.reserve(key_pos.size());
            for (int p : key_pos) key.push_back(t[p]);
            index[key].push_back(&t);
        }

        std::vector<Tuple> next;
        for (const Tuple& part : partials) {
            Tuple key;
            key.reserve(key_pos.size());
            for (int p : key_pos) key.push_back(part[r.attrs[p]]);
            auto it = index.find(key);
            if (it == index.end()) continue;
            for (const Tuple* t : it->second) {
                Tuple ext = part;
                for (std::size_t p = 0; p < r.attrs.size(); ++p)
                    ext[r.attrs[p]] = (*t)[p];
                next.push_back(std::move(ext));
                if (next.size() > cap)
                    throw OracleCapExceeded("join intermediate exceeds cap");
            }
        }
        partials = std::move(next);
        bound |= r.attr_mask();
        first = false;
        if (partials.empty()) break;
    }
    (void)first;
    return partials;
}

/// Distinct projection of the full join onto the output attributes
/// (ascending attribute id order).
inline TupleSet eval_acyclic_naive(const Database& db, const ConjunctiveQuery& q,
                                   std::size_t cap = 10'000'000) {
    TupleSet out;
    for (const Tuple& full : eval_join_full(db, q, cap)) {
        Tuple proj;
        for_each_bit(q.output_mask(), [&](int a) { proj.push_back(full[a]); });
        out.insert(std::move(proj));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Boolean tensors and OuMv
// ---------------------------------------------------------------------------

/// Sparse order-d Boolean tensor over [0,n)^d. Support entries carry dense
/// identifiers 0..nnz-1 in insertion order.
struct BoolTensor {
    int order = 0;
    Value side = 0;
    std::vector<Tuple> entries;  // each of length `order`, coords in [0, side)

    void add(Tuple coords) {
        if (static_cast<int>(coords.size()) != order)
            throw QueryError("tensor entry arity mismatch");
        for (Value c : coords)
            if (c < 0 || c >= side) throw QueryError("tensor coord out of range");
        entries.push_back(std::move(coords));
    }
    std::size_t nnz() const { return entries.size(); }
};

using BitVec = std::vector<std::uint8_t>;  // one flag per domain value

/// True iff some support entry c has u_i[c_i] = 1 for every dimension i.
inline bool oumv_brute(const BoolTensor& m, const std::vector<BitVec>& vectors) {
    if (static_cast<int>(vectors.size()) != m.order)
        throw QueryError("oumv vector count mismatch");
    for (const auto& v : vectors)
        if (static_cast<Value>(v.size()) != m.side)
            throw QueryError("oumv vector length mismatch");
    for (const Tuple& e : m.entries) {
        bool hit = true;
        for (int i = 0; i < m.order && hit; ++i) hit = vectors[i][e[i]] != 0;
        if (hit) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Exhaustive structural parameters
// ---------------------------------------------------------------------------

namespace brute_detail {

// Checks the chordless-path conditions for a vertex sequence of length >= 2
// (i.e. path length >= 3): adjacency, no shortcuts, endpoint edges.
inline bool sequence_is_chordless(const Hypergraph& h, const std::vector<int>& p) {
    const int m = static_cast<int>(p.size());
    for (int i = 0; i + 1 < m; ++i) {
        if (!(h.edges_with[p[i]] & h.edges_with[p[i + 1]])) return false;
    }
    for (int i = 0; i < m; ++i)
        for (int j = i + 2; j < m; ++j)
            if (h.edges_with[p[i]] & h.edges_with[p[j]]) return false;
    Mask head = h.edges_with[p[0]] & ~h.edges_with[p[1]];
    Mask tail = h.edges_with[p[m - 1]] & ~h.edges_with[p[m - 2]];
    return head != 0 && tail != 0;
}

template <typename Visit>
void enumerate_sequences(const Hypergraph& h, std::vector<int>& p, Mask used,
                         Visit&& visit) {
    if (p.size() >= 2) {
        // Prefix pruning: broken adjacency or a shortcut to the new vertex
        // can never be repaired by extending the sequence.
        int last = p.back();
        if (!(h.edges_with[p[p.size() - 2]] & h.edges_with[last])) return;
        for (std::size_t i = 0; i + 2 < p.size(); ++i)
            if (h.edges_with[p[i]] & h.edges_with[last]) return;
    }
    visit(p);
    for (int v = 0; v < h.num_vertices; ++v) {
        if (has_bit(used, v)) continue;
        p.push_back(v);
        enumerate_sequences(h, p, used | bit(v), visit);
        p.pop_back();
    }
}

}  // namespace brute_detail

/// Longest chordless path length by exhaustive sequence enumeration.
/// Length 1 exists for any non-empty hypergraph; length 2 needs two distinct
/// hyperedges sharing a vertex; length k >= 3 uses vertex sequences of k-1.
inline int brute_longest_chordless(const Hypergraph& h, int max_attrs = 10) {
    if (h.num_vertices > max_attrs)
        throw OracleCapExceeded("brute chordless-path search cap exceeded");
    int best = h.edges.empty() ? 0 : 1;
    for (int v = 0; v < h.num_vertices && best < 2; ++v)
        if (popcount(h.edges_with[v]) >= 2) best = 2;
    std::vector<int> p;
    brute_detail::enumerate_sequences(h, p, 0, [&](const std::vector<int>& seq) {
        if (seq.size() < 2) return;
        if (brute_detail::sequence_is_chordless(h, seq))
            best = std::max(best, static_cast<int>(seq.size()) + 1);
    });
    return best;
}

/// Longest q-chordless path length, or 0 when none exists. All sequence
/// vertices must be non-output; one endpoint edge must intersect the path in
/// exactly its endpoint and carry an output attribute avoidable by the rest
/// of some edge sequence.
inline int brute_longest_q_chordless(const ConjunctiveQuery& q,
                                     const Hypergraph& h, int max_attrs = 10) {
    if (h.num_vertices > max_attrs)
        throw OracleCapExceeded("brute q-chordless-path search cap exceeded");
    const Mask ybar = q.output_mask();
    if (ybar == 0 || q.is_full()) return 0;

    int best = 0;
    for (Mask e : h.edges)
        if ((e & ybar) && (e & ~ybar & q.all_attrs_mask())) { best = 1; break; }

    // Checks whether `head` can serve as the output endpoint of the oriented
    // sequence: for some output attribute y of the head edge, every other
    // slot of the edge sequence offers an edge avoiding y.
    auto head_works = [&](const std::vector<int>& seq) {
        const int m = static_cast<int>(seq.size());
        Mask pmask = 0;
        for (int v : seq) pmask |= bit(v);
        std::vector<Mask> slots;
        for (int i = 0; i + 1 < m; ++i)
            slots.push_back(h.edges_with[seq[i]] & h.edges_with[seq[i + 1]]);
        if (m >= 2)
            slots.push_back(h.edges_with[seq[m - 1]] & ~h.edges_with[seq[m - 2]]);
        bool ok = false;
        for_each_bit(h.edges_with[seq[0]], [&](int e) {
            if (ok) return;
            if (m >= 2 && (h.edges[e] & pmask) != bit(seq[0])) return;
            for_each_bit(h.edges[e] & ybar, [&](int y) {
                if (ok) return;
                for (Mask slot : slots) {
                    bool avoid = false;
                    for_each_bit(slot, [&](int e2) {
                        if (e2 != e && !has_bit(h.edges[e2], y)) avoid = true;
                    });
                    if (!avoid) return;
                }
                ok = true;
            });
        });
        return ok;
    };

    // Length 2: single non-output vertex on two edges, one of which carries a
    // private output attribute.
    for (int v = 0; v < h.num_vertices && best < 2; ++v) {
        if (has_bit(ybar, v)) continue;
        if (popcount(h.edges_with[v]) < 2) continue;
        std::vector<int> seq{v};
        bool ok = false;
        for_each_bit(h.edges_with[v], [&](int e1) {
            if (ok || (h.edges[e1] & ybar) == 0) return;
            for_each_bit(h.edges[e1] & ybar, [&](int y) {
                if (ok) return;
                for_each_bit(h.edges_with[v] & ~bit(e1), [&](int e2) {
                    if (!has_bit(h.edges[e2], y)) ok = true;
                });
            });
        });
        if (ok) best = 2;
    }

    std::vector<int> p;
    brute_detail::enumerate_sequences(h, p, 0, [&](const std::vector<int>& seq) {
        if (seq.size() < 2) return;
        for (int v : seq)
            if (has_bit(ybar, v)) return;
        if (!brute_detail::sequence_is_chordless(h, seq)) return;
        std::vector<int> rev(seq.rbegin(), seq.rend());
        if (head_works(seq) || head_works(rev))
            best = std::max(best, static_cast<int>(seq.size()) + 1);
    });
    return best;
}

/// Exhaustive height: max(ceil(Lc / 2), Lq).
inline int brute_height(const ConjunctiveQuery& q, int max_attrs = 10) {
    Hypergraph h = build_hypergraph(q);
    int lc = brute_longest_chordless(h, max_attrs);
    int lq = brute_longest_q_chordless(q, h, max_attrs);
    return std::max((lc + 1) / 2, lq);
}

/// Exhaustive dimension: enumerates every connected subset of join attributes
/// (plus the empty subset with each relation active in turn), and for each
/// one all achievable key-set images via a subset-DP over injective
/// assignments. Applies the output case split and floors the result at 1.
inline int brute_dimension(const ConjunctiveQuery& q, int max_attrs = 10) {
    if (q.num_attrs() > max_attrs)
        throw OracleCapExceeded("brute dimension search cap exceeded");
    Hypergraph h = build_hypergraph(q);
    const Mask ybar = q.output_mask();
    const Mask join_attrs = h.all_vertices() & ~h.unique_vertices;

    // Enumerates every injective key assignment (N, pi) over the remaining
    // relations; a configuration counts only when each matched relation meets
    // the counted attribute set in exactly its key.
    auto eval_case = [&](Mask vc, Mask ec_rels) -> int {
        Mask vstar = 0;
        for_each_bit(ec_rels, [&](int r) { vstar |= h.edges[r]; });
        vstar &= ~vc;
        std::vector<int> rels;
        for (int r = 0; r < q.num_rels(); ++r)
            if (!has_bit(ec_rels, r) && (h.edges[r] & vstar)) rels.push_back(r);
        int best = 0;
        std::vector<std::pair<int, int>> picked;  // (relation, key)
        auto rec = [&](auto&& self, std::size_t i, Mask used) -> void {
            if (i == rels.size()) {
                Mask img = used;
                Mask forbidden = 0;  // attrs no picked relation may see twice
                for (auto [r, k] : picked) forbidden |= h.edges[r] & ~bit(k);
                if (img & forbidden) return;  // some key lies in another's relation
                if ((vc & ybar) != 0 || (img & ~ybar) == 0) {
                    best = std::max(best, popcount(img));
                } else {
                    // extras: any output attrs of the active area that avoid
                    // every picked relation may join the counted set
                    Mask extras = (ybar & vstar) & ~img & ~forbidden;
                    best = std::max(best, popcount(img | extras));
                }
                return;
            }
            self(self, i + 1, used);  // skip this relation
            for_each_bit(h.edges[rels[i]] & vstar & ~used, [&](int k) {
                picked.emplace_back(rels[i], k);
                self(self, i + 1, used | bit(k));
                picked.pop_back();
            });
        };
        rec(rec, 0, 0);
        return best;
    };

    int best = 1;
    for (int r = 0; r < q.num_rels(); ++r)
        best = std::max(best, eval_case(0, bit(r)));
    const Mask all = h.all_vertices();
    for (Mask vc = 1; vc <= all; ++vc) {
        if ((vc & ~join_attrs) != 0) continue;
        if (!primal_connected(h, vc)) continue;
        Mask ec = 0;
        for (int r = 0; r < q.num_rels(); ++r)
            if (h.edges[r] & vc) ec |= bit(r);
        best = std::max(best, eval_case(vc, ec));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Cycle detection
// ---------------------------------------------------------------------------

/// Simple directed graph for the cycle workloads.
struct Digraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<int>> out;

    explicit Digraph(int n = 0) : n(n), out(n) {}
    void add_edge(int u, int v) {
        edges.emplace_back(u, v);
        out[u].push_back(v);
    }
};

/// DFS over simple paths of length k that close back to their start vertex.
inline bool detect_k_cycle_brute(const Digraph& g, int k) {
    if (g.n > 60 || k > 7 || k < 2)
        throw OracleCapExceeded("brute cycle detection cap exceeded");
    std::vector<char> on_path(g.n, 0);
    // Canonical start = smallest vertex of the cycle, so only descend into
    // larger vertex ids.
    std::vector<int> stack;
    for (int s = 0; s < g.n; ++s) {
        stack.assign(1, s);
        on_path[s] = 1;
        bool found = [&] {
            auto dfs = [&](auto&& self, int v, int depth) -> bool {
                if (depth == k) {
                    return std::find(g.out[v].begin(), g.out[v].end(), s) !=
                           g.out[v].end();
                }
                for (int w : g.out[v]) {
                    if (w <= s || on_path[w]) continue;
                    on_path[w] = 1;
                    bool ok = self(self, w, depth + 1);
                    on_path[w] = 0;
                    if (ok) return true;
                }
                return false;
            };
            return dfs(dfs, s, 1);
        }();
        on_path[s] = 0;
        if (found) return true;
    }
    return false;
}

}  // namespace cqdyn

#endif  // CQDYN_ORACLE_HPP
