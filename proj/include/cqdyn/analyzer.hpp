#ifndef CQDYN_ANALYZER_HPP
#define CQDYN_ANALYZER_HPP

// Structural analysis of conjunctive queries: acyclicity and free-connexness,
// q-hierarchical tests, ears / skeleton / residual queries, chordless and
// q-chordless paths, the height and dimension parameters, and construction
// plus validation of free-connex join trees.

#include <algorithm>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cqdyn/core.hpp"

namespace cqdyn {

// ---------------------------------------------------------------------------
// Acyclicity (GYO) and free-connexness
// ---------------------------------------------------------------------------

namespace detail {

/// GYO elimination over a set of hyperedges: repeatedly strip vertices that
/// occur in exactly one edge, then drop an edge contained in another. Acyclic
/// iff at most one edge survives.
inline bool gyo_acyclic(std::vector<Mask> edges) {
    bool changed = true;
    while (changed) {
        changed = false;
        // strip unique vertices
        std::unordered_map<int, int> occ;
        for (Mask e : edges)
            for_each_bit(e, [&](int v) { ++occ[v]; });
        for (Mask& e : edges) {
            Mask keep = 0;
            for_each_bit(e, [&](int v) {
                if (occ[v] > 1) keep |= bit(v);
            });
            if (keep != e) {
                e = keep;
                changed = true;
            }
        }
        // drop one contained edge
        for (std::size_t i = 0; i < edges.size() && edges.size() > 1; ++i) {
            bool drop = false;
            for (std::size_t j = 0; j < edges.size(); ++j) {
                if (i == j) continue;
                if ((edges[i] & ~edges[j]) == 0) {
                    drop = true;
                    break;
                }
            }
            if (drop) {
                edges.erase(edges.begin() + static_cast<long>(i));
                changed = true;
                break;
            }
        }
    }
    return edges.size() <= 1;
}

}  // namespace detail

inline bool is_acyclic(const ConjunctiveQuery& q) {
    std::vector<Mask> edges;
    edges.reserve(q.relations().size());
    for (const auto& r : q.relations()) edges.push_back(r.attr_mask());
    return detail::gyo_acyclic(std::move(edges));
}

/// Free-connex: acyclic, and still acyclic after adding the output set as an
/// extra hyperedge. Boolean and full queries reduce to plain acyclicity.
inline bool is_free_connex(const ConjunctiveQuery& q) {
    if (!is_acyclic(q)) return false;
    std::vector<Mask> edges;
    for (const auto& r : q.relations()) edges.push_back(r.attr_mask());
    edges.push_back(q.output_mask());
    return detail::gyo_acyclic(std::move(edges));
}

// ---------------------------------------------------------------------------
// q-hierarchical test
// ---------------------------------------------------------------------------

namespace detail {

/// Attribute set and per-attribute relation sets of a relation subset.
struct SubQuery {
    const ConjunctiveQuery* q;
    Mask rels;    // active relations
    Mask attrs;   // attributes occurring in them
    Mask unique;  // attributes occurring in exactly one active relation

    SubQuery(const ConjunctiveQuery& query, Mask rel_mask) : q(&query), rels(rel_mask) {
        attrs = 0;
        for_each_bit(rels, [&](int r) { attrs |= query.rel(r).attr_mask(); });
        unique = 0;
        for_each_bit(attrs, [&](int a) {
            if (popcount(query.rels_with_attr(a) & rels) == 1) unique |= bit(a);
        });
    }

    Mask rels_with(AttrId a) const { return q->rels_with_attr(a) & rels; }
    Mask schema(RelId r) const { return q->rel(r).attr_mask(); }
    Mask output() const { return q->output_mask() & attrs; }
};

inline bool is_q_hierarchical_sub(const SubQuery& s) {
    std::vector<int> attrs;
    for_each_bit(s.attrs, [&](int a) { attrs.push_back(a); });
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        Mask ei = s.rels_with(attrs[i]);
        for (std::size_t j = i + 1; j < attrs.size(); ++j) {
            Mask ej = s.rels_with(attrs[j]);
            if ((ei & ej) == 0) continue;
            if ((ei & ~ej) != 0 && (ej & ~ei) != 0) return false;
        }
    }
    Mask ybar = s.output();
    bool ok = true;
    for_each_bit(ybar, [&](int y) {
        Mask ey = s.rels_with(y);
        for_each_bit(s.attrs & ~ybar, [&](int x) {
            Mask ex = s.rels_with(x);
            if ((ey & ~ex) == 0 && ex != ey) ok = false;  // E[y] strictly inside E[x]
        });
    });
    return ok;
}

}  // namespace detail

inline bool is_q_hierarchical(const ConjunctiveQuery& q) {
    Mask all = q.num_rels() == 64 ? ~Mask{0} : bit(q.num_rels()) - 1;
    return detail::is_q_hierarchical_sub(detail::SubQuery(q, all));
}

// ---------------------------------------------------------------------------
// Ears, skeleton, residual query
// ---------------------------------------------------------------------------

struct EarAssignment {
    Mask ears = 0;                        // relations that are ears
    std::vector<RelId> anchor;            // per relation: one witnessing anchor or -1
    std::vector<Mask> anchor_candidates;  // per relation: all valid anchors
};

namespace detail {

/// Ears of a (sub)query: R is an ear when some other relation R' covers all
/// of R's non-unique attributes, provided either (i) R's unique attributes
/// are all non-output, or (ii) the covered attributes land inside R' as
/// output attributes.
inline EarAssignment find_ears_sub(const SubQuery& s) {
    EarAssignment ea;
    ea.anchor.assign(s.q->num_rels(), -1);
    ea.anchor_candidates.assign(s.q->num_rels(), 0);
    Mask ybar = s.q->output_mask();
    for_each_bit(s.rels, [&](int r) {
        Mask schema = s.schema(r);
        Mask nonunique = schema & ~s.unique;
        Mask uniq = schema & s.unique;
        Mask candidates = 0;
        for_each_bit(s.rels & ~bit(r), [&](int r2) {
            Mask schema2 = s.schema(r2);
            bool cond_i = (nonunique & ~schema2) == 0 && (uniq & ybar) == 0;
            bool cond_ii = (nonunique & ~(schema2 & ybar)) == 0;
            if (cond_i || cond_ii) candidates |= bit(r2);
        });
        if (candidates) {
            ea.ears |= bit(r);
            ea.anchor[r] = __builtin_ctzll(candidates);
            ea.anchor_candidates[r] = candidates;
        }
    });
    return ea;
}

/// One round of ear removal: the ear set is fixed up front; an ear may be
/// dropped only while one of its anchors is still present. Returns the
/// surviving relation mask plus the removal order.
inline Mask skeleton_sub(const SubQuery& s, const EarAssignment& ea,
                         bool ascending, std::vector<RelId>* removal_order) {
    Mask cur = s.rels;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int> order;
        for_each_bit(cur & ea.ears, [&](int r) { order.push_back(r); });
        if (!ascending) std::reverse(order.begin(), order.end());
        for (int r : order) {
            if (ea.anchor_candidates[r] & cur & ~bit(r)) {
                cur &= ~bit(r);
                if (removal_order) removal_order->push_back(r);
                changed = true;
            }
        }
    }
    return cur;
}

}  // namespace detail

inline EarAssignment find_ears(const ConjunctiveQuery& q) {
    if (!is_acyclic(q)) throw QueryError("not acyclic (ears need an acyclic query)");
    Mask all = q.num_rels() == 64 ? ~Mask{0} : bit(q.num_rels()) - 1;
    return detail::find_ears_sub(detail::SubQuery(q, all));
}

/// Skeleton: fixpoint of ear removal, with a configurable removal order used
/// by the order-robustness checks.
inline Mask skeleton(const ConjunctiveQuery& q, bool ascending = true) {
    if (!is_acyclic(q)) throw QueryError("not acyclic (skeleton needs an acyclic query)");
    Mask all = q.num_rels() == 64 ? ~Mask{0} : bit(q.num_rels()) - 1;
    detail::SubQuery s(q, all);
    auto ea = detail::find_ears_sub(s);
    return detail::skeleton_sub(s, ea, ascending, nullptr);
}

struct ResidualQuery {
    ConjunctiveQuery query;
    std::vector<AttrId> attr_map;  // new attr id -> original attr id
    std::vector<RelId> rel_map;    // new rel id -> original rel id
};

/// Builds the skeleton-induced query with densely renumbered ids; names are
/// preserved so reports stay readable.
inline ResidualQuery induced_query(const ConjunctiveQuery& q, Mask rel_mask) {
    ResidualQuery out;
    Mask attr_mask = 0;
    for_each_bit(rel_mask, [&](int r) { attr_mask |= q.rel(r).attr_mask(); });
    std::vector<int> attr_new(q.num_attrs(), -1);
    std::vector<Attribute> attrs;
    for_each_bit(attr_mask, [&](int a) {
        attr_new[a] = static_cast<int>(attrs.size());
        out.attr_map.push_back(a);
        attrs.push_back({attr_new[a], q.attr_name(a)});
    });
    std::vector<RelationSchema> rels;
    for_each_bit(rel_mask, [&](int r) {
        RelationSchema rs;
        rs.id = static_cast<int>(rels.size());
        rs.name = q.rel(r).name;
        for (AttrId a : q.rel(r).attrs) rs.attrs.push_back(attr_new[a]);
        out.rel_map.push_back(r);
        rels.push_back(std::move(rs));
    });
    Mask output = 0;
    for_each_bit(q.output_mask() & attr_mask, [&](int a) { output |= bit(attr_new[a]); });
    out.query = ConjunctiveQuery(std::move(attrs), std::move(rels), output);
    return out;
}

inline ResidualQuery residual_query(const ConjunctiveQuery& q) {
    return induced_query(q, skeleton(q));
}

// ---------------------------------------------------------------------------
// Chordless paths
// ---------------------------------------------------------------------------

struct ChordlessPathWitness {
    int length = 0;
    std::vector<AttrId> vertices;  // empty for length 1, one vertex for length 2
    std::vector<RelId> edge_seq;   // length hyperedges (one for length 1)
    bool is_q = false;
    std::optional<RelId> output_endpoint;
};

/// Re-checks a witness directly against the hypergraph.
inline bool verify_chordless_witness(const Hypergraph& h,
                                     const ChordlessPathWitness& w) {
    const auto& p = w.vertices;
    if (w.length <= 0) return false;
    if (w.length == 1)
        return p.empty() && w.edge_seq.size() == 1 &&
               w.edge_seq[0] >= 0 &&
               w.edge_seq[0] < static_cast<int>(h.edges.size());
    if (w.length == 2) {
        if (p.size() != 1 || w.edge_seq.size() != 2) return false;
        int v = p[0];
        int e1 = w.edge_seq[0], e2 = w.edge_seq[1];
        return e1 != e2 && has_bit(h.edges[e1], v) && has_bit(h.edges[e2], v);
    }
    if (static_cast<int>(p.size()) != w.length - 1) return false;
    if (static_cast<int>(w.edge_seq.size()) != w.length) return false;
    Mask used = 0;
    for (int v : p) {
        if (v < 0 || v >= h.num_vertices || has_bit(used, v)) return false;
        used |= bit(v);
    }
    const int m = static_cast<int>(p.size());
    // adjacency carried by the designated interior edges
    for (int i = 0; i + 1 < m; ++i) {
        Mask e = h.edges[w.edge_seq[i + 1]];
        if (!has_bit(e, p[i]) || !has_bit(e, p[i + 1])) return false;
    }
    // no shortcuts anywhere in the hypergraph
    for (int i = 0; i < m; ++i)
        for (int j = i + 2; j < m; ++j)
            if (h.edges_with[p[i]] & h.edges_with[p[j]]) return false;
    Mask head = h.edges[w.edge_seq[0]];
    Mask tail = h.edges[w.edge_seq[m]];
    if (!has_bit(head, p[0]) || has_bit(head, p[1])) return false;
    if (!has_bit(tail, p[m - 1]) || has_bit(tail, p[m - 2])) return false;
    return true;
}

inline bool verify_q_chordless_witness(const ConjunctiveQuery& q,
                                       const Hypergraph& h,
                                       const ChordlessPathWitness& w) {
    if (!w.is_q || !w.output_endpoint) return false;
    Mask ybar = q.output_mask();
    int oe = *w.output_endpoint;
    if (oe < 0 || oe >= static_cast<int>(h.edges.size())) return false;
    if ((h.edges[oe] & ybar) == 0) return false;
    if (w.length == 1) {
        // one edge with both output and non-output attributes
        return w.vertices.empty() && w.edge_seq.size() == 1 &&
               w.edge_seq[0] == oe && (h.edges[oe] & ~ybar & h.all_vertices()) != 0;
    }
    for (int v : w.vertices)
        if (has_bit(ybar, v)) return false;
    if (w.length == 2) {
        if (w.vertices.size() != 1 || w.edge_seq.size() != 2) return false;
        int v = w.vertices[0];
        if (w.edge_seq[0] != oe || w.edge_seq[1] == oe) return false;
        if (!has_bit(h.edges[oe], v) || !has_bit(h.edges[w.edge_seq[1]], v))
            return false;
    } else {
        if (!verify_chordless_witness(h, w)) return false;
        Mask pmask = 0;
        for (int v : w.vertices) pmask |= bit(v);
        if ((h.edges[oe] & pmask) != bit(w.vertices.front())) return false;
        if (w.edge_seq.front() != oe) return false;
    }
    // The endpoint must contribute an output attribute private to it within
    // the recorded edge sequence.
    Mask others = 0;
    for (std::size_t i = 1; i < w.edge_seq.size(); ++i)
        others |= h.edges[w.edge_seq[i]];
    return (h.edges[oe] & ybar & ~others) != 0;
}

namespace detail {

inline std::vector<int> canonical_orientation(const std::vector<int>& p) {
    std::vector<int> rev(p.rbegin(), p.rend());
    return p <= rev ? p : rev;
}

/// Shared DFS over candidate vertex sequences. `allowed` restricts usable
/// vertices; every emitted sequence satisfies adjacency, the no-shortcut rule
/// and plain endpoint edges on both sides.
template <typename Visit>
void chordless_dfs(const Hypergraph& h, Mask allowed, Visit&& visit) {
    std::vector<int> p;
    auto extend = [&](auto&& self) -> void {
        const int m = static_cast<int>(p.size());
        if (m >= 2) {
            Mask head = h.edges_with[p[0]] & ~h.edges_with[p[1]];
            Mask tail = h.edges_with[p[m - 1]] & ~h.edges_with[p[m - 2]];
            if (head && tail) visit(p);
            // Extensions keep the head pair, so a missing head endpoint edge
            // can never be repaired.
            if (!head) return;
        }
        for (int v = 0; v < h.num_vertices; ++v) {
            if (!has_bit(allowed, v)) continue;
            if (std::find(p.begin(), p.end(), v) != p.end()) continue;
            if (!p.empty() && !(h.edges_with[p.back()] & h.edges_with[v])) continue;
            bool shortcut = false;
            for (int i = 0; i + 1 < static_cast<int>(p.size()) && !shortcut; ++i)
                if (h.edges_with[p[i]] & h.edges_with[v]) shortcut = true;
            if (shortcut) continue;
            p.push_back(v);
            self(self);
            p.pop_back();
        }
    };
    extend(extend);
}

inline int lowest_edge(Mask edges) { return edges ? __builtin_ctzll(edges) : -1; }

/// Builds the canonical edge sequence for an oriented vertex sequence:
/// lowest-id head/tail endpoint edges and lowest-id interior edges.
inline std::vector<RelId> edge_sequence_for(const Hypergraph& h,
                                            const std::vector<int>& p) {
    const int m = static_cast<int>(p.size());
    std::vector<RelId> es;
    es.push_back(lowest_edge(h.edges_with[p[0]] & ~h.edges_with[p[1]]));
    for (int i = 0; i + 1 < m; ++i)
        es.push_back(lowest_edge(h.edges_with[p[i]] & h.edges_with[p[i + 1]]));
    es.push_back(lowest_edge(h.edges_with[p[m - 1]] & ~h.edges_with[p[m - 2]]));
    return es;
}

}  // namespace detail

/// Maximum-length chordless path with one canonical witness (lowest
/// lexicographic vertex sequence over both orientations, ties broken toward
/// lowest edge ids). Any non-empty hypergraph admits at least length 1.
inline ChordlessPathWitness longest_chordless_path(const Hypergraph& h) {
    if (h.edges.empty()) throw QueryError("empty hypergraph");
    ChordlessPathWitness best;
    best.length = 1;
    best.edge_seq = {0};

    for (int v = 0; v < h.num_vertices; ++v) {
        if (popcount(h.edges_with[v]) >= 2) {
            Mask es = h.edges_with[v];
            int e1 = __builtin_ctzll(es);
            int e2 = __builtin_ctzll(es & (es - 1));
            best.length = 2;
            best.vertices = {v};
            best.edge_seq = {e1, e2};
            break;
        }
    }

    std::vector<int> best_seq;
    detail::chordless_dfs(h, h.all_vertices(), [&](const std::vector<int>& p) {
        int len = static_cast<int>(p.size()) + 1;
        if (len < best.length) return;
        auto canon = detail::canonical_orientation(p);
        if (len > best.length || best_seq.empty() || canon < best_seq) {
            best.length = len;
            best_seq = canon;
        }
    });
    if (!best_seq.empty()) {
        best.vertices = best_seq;
        best.edge_seq = detail::edge_sequence_for(h, best_seq);
    }
    return best;
}

namespace detail {

/// For an oriented non-output vertex sequence, finds the lowest head edge
/// that can serve as the output endpoint: it meets the path in exactly the
/// first vertex and carries a *private* output attribute y, i.e. every other
/// slot of the edge sequence (interior adjacency edges and the tail endpoint)
/// offers a candidate edge avoiding y. Returns (edge, y) or (-1, -1).
inline std::pair<int, int> q_head_edge(const Hypergraph& h, Mask ybar,
                                       const std::vector<int>& p) {
    const int m = static_cast<int>(p.size());
    Mask pmask = 0;
    for (int v : p) pmask |= bit(v);
    std::vector<Mask> slots;
    for (int i = 0; i + 1 < m; ++i)
        slots.push_back(h.edges_with[p[i]] & h.edges_with[p[i + 1]]);
    slots.push_back(h.edges_with[p[m - 1]] & ~h.edges_with[p[m - 2]]);

    std::pair<int, int> found{-1, -1};
    for_each_bit(h.edges_with[p[0]], [&](int e) {
        if (found.first >= 0) return;
        if ((h.edges[e] & pmask) != bit(p[0])) return;
        for_each_bit(h.edges[e] & ybar, [&](int y) {
            if (found.first >= 0) return;
            for (Mask slot : slots) {
                bool avoidable = false;
                for_each_bit(slot, [&](int e2) {
                    if (e2 != e && !has_bit(h.edges[e2], y)) avoidable = true;
                });
                if (!avoidable) return;
            }
            found = {e, y};
        });
    });
    return found;
}

/// Edge sequence for a q-path: the head output endpoint plus per-slot edges
/// avoiding the private output attribute y.
inline std::vector<RelId> q_edge_sequence_for(const Hypergraph& h,
                                              const std::vector<int>& p,
                                              int head_edge, int y) {
    const int m = static_cast<int>(p.size());
    auto pick = [&](Mask slot) {
        int chosen = -1;
        for_each_bit(slot, [&](int e) {
            if (chosen == -1 && e != head_edge && !has_bit(h.edges[e], y))
                chosen = e;
        });
        return chosen;
    };
    std::vector<RelId> es{head_edge};
    for (int i = 0; i + 1 < m; ++i)
        es.push_back(pick(h.edges_with[p[i]] & h.edges_with[p[i + 1]]));
    es.push_back(pick(h.edges_with[p[m - 1]] & ~h.edges_with[p[m - 2]]));
    return es;
}

}  // namespace detail

/// Maximum-length q-chordless path, or nullopt when none exists (always the
/// case for Boolean and full queries). The reported orientation places the
/// output endpoint first; the endpoint edge must carry an output attribute
/// private to it within the witness edge sequence.
inline std::optional<ChordlessPathWitness> longest_q_chordless_path(
    const ConjunctiveQuery& q, const Hypergraph& h) {
    Mask ybar = q.output_mask();
    if (ybar == 0 || q.is_full()) return std::nullopt;

    std::optional<ChordlessPathWitness> best;

    for (std::size_t e = 0; e < h.edges.size(); ++e) {
        if ((h.edges[e] & ybar) && (h.edges[e] & ~ybar & h.all_vertices())) {
            ChordlessPathWitness w;
            w.length = 1;
            w.edge_seq = {static_cast<RelId>(e)};
            w.is_q = true;
            w.output_endpoint = static_cast<RelId>(e);
            best = w;
            break;
        }
    }

    [&] {
        for (int v = 0; v < h.num_vertices; ++v) {
            if (has_bit(ybar, v) || popcount(h.edges_with[v]) < 2) continue;
            bool taken = false;
            for_each_bit(h.edges_with[v], [&](int e1) {
                if (taken || (h.edges[e1] & ybar) == 0) return;
                for_each_bit(h.edges[e1] & ybar, [&](int y) {
                    if (taken) return;
                    int e2 = -1;
                    for_each_bit(h.edges_with[v] & ~bit(e1), [&](int e) {
                        if (e2 == -1 && !has_bit(h.edges[e], y)) e2 = e;
                    });
                    if (e2 == -1) return;
                    ChordlessPathWitness w;
                    w.length = 2;
                    w.vertices = {v};
                    w.edge_seq = {e1, e2};
                    w.is_q = true;
                    w.output_endpoint = e1;
                    best = w;
                    taken = true;
                });
            });
            if (taken) return;
        }
    }();

    std::vector<int> best_seq;
    int best_len = best ? best->length : 0;
    detail::chordless_dfs(h, h.all_vertices() & ~ybar, [&](const std::vector<int>& p) {
        int len = static_cast<int>(p.size()) + 1;
        if (len < best_len || len < 3) return;
        std::vector<int> rev(p.rbegin(), p.rend());
        std::vector<const std::vector<int>*> valid;
        if (detail::q_head_edge(h, ybar, p).first >= 0) valid.push_back(&p);
        if (detail::q_head_edge(h, ybar, rev).first >= 0) valid.push_back(&rev);
        for (const auto* cand : valid) {
            if (len > best_len || best_seq.empty() || *cand < best_seq) {
                best_len = len;
                best_seq = *cand;
            }
        }
    });
    if (!best_seq.empty()) {
        ChordlessPathWitness w;
        w.length = best_len;
        w.vertices = best_seq;
        auto [oe, y] = detail::q_head_edge(h, ybar, best_seq);
        w.edge_seq = detail::q_edge_sequence_for(h, best_seq, oe, y);
        w.is_q = true;
        w.output_endpoint = oe;
        best = w;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Height
// ---------------------------------------------------------------------------

struct HeightReport {
    int height = 0;
    ChordlessPathWitness max_chordless;
    std::optional<ChordlessPathWitness> max_q_chordless;
};

inline HeightReport height(const ConjunctiveQuery& q) {
    Hypergraph h = build_hypergraph(q);
    HeightReport rep;
    rep.max_chordless = longest_chordless_path(h);
    rep.max_q_chordless = longest_q_chordless_path(q, h);
    int lc = rep.max_chordless.length;
    int lq = rep.max_q_chordless ? rep.max_q_chordless->length : 0;
    rep.height = std::max((lc + 1) / 2, lq);
    return rep;
}

// ---------------------------------------------------------------------------
// Dimension
// ---------------------------------------------------------------------------

struct DimensionReport {
    int dimension = 1;
    Mask connected_subset = 0;                   // V_c
    Mask active_relations = 0;                   // E_c
    Mask neighbor_set = 0;                       // N
    std::vector<std::pair<RelId, AttrId>> keys;  // injective mapping, by rel id
    Mask key_set = 0;                            // image of the mapping
    Mask extra_outputs = 0;                      // counted output attrs outside the key set
    Mask vstar = 0;                              // active attributes
    bool trivial = false;                        // floored to 1, no witness mapping
};

namespace detail {

/// A distinct-neighbor configuration is an injective key assignment
/// pi: N -> V_star where every matched relation meets the *counted*
/// attribute set in exactly its key; the counted set is the key set itself
/// when the subset touches the output (or all keys are outputs), and
/// otherwise additionally includes every active output attribute.
inline DimensionReport local_dimension_impl(const ConjunctiveQuery& q,
                                            const Hypergraph& h, Mask vc,
                                            Mask ec) {
    DimensionReport rep;
    rep.connected_subset = vc;
    rep.active_relations = ec;
    Mask vstar = 0;
    for_each_bit(ec, [&](int r) { vstar |= h.edges[r]; });
    vstar &= ~vc;
    rep.vstar = vstar;
    const Mask ybar = q.output_mask();
    const Mask er = (q.num_rels() == 64 ? ~Mask{0} : bit(q.num_rels()) - 1) & ~ec;
    const bool vc_touches_output = (vc & ybar) != 0;

    // Candidate counted attributes: keys must be reachable through some
    // remaining relation; output attributes of the active area may join the
    // counted set as free extras when the subset avoids the output.
    std::vector<int> rel_ids;
    for_each_bit(er, [&](int r) {
        if (h.edges[r] & vstar) rel_ids.push_back(r);
    });
    Mask usable = 0;
    for (int r : rel_ids) usable |= h.edges[r] & vstar;
    Mask pool = usable | (vc_touches_output ? 0 : (ybar & vstar));
    std::vector<int> targets;
    for_each_bit(pool, [&](int a) { targets.push_back(a); });
    if (targets.size() > 20)
        throw QueryError("dimension: too many candidate counted attributes");

    int best_value = 0;
    Mask best_counted = 0;
    Mask best_key_set = 0;
    std::vector<std::pair<RelId, AttrId>> best_keys;

    const Mask nsel = targets.empty() ? 0 : (Mask{1} << targets.size()) - 1;
    for (Mask sel = 1; sel <= nsel; ++sel) {
        Mask counted = 0;
        for_each_bit(sel, [&](int i) { counted |= bit(targets[i]); });
        int value = popcount(counted);
        if (value <= best_value) continue;
        // Non-output counted attributes must be matched; when the whole set
        // is output (or the subset touches the output) everything must be.
        Mask required =
            (vc_touches_output || (counted & ~ybar) == 0) ? counted
                                                          : counted & ~ybar;
        std::vector<int> rel_of_key(q.num_attrs(), -1);
        auto augment = [&](auto&& self, int key, std::vector<char>& vis) -> bool {
            for (int r : rel_ids) {
                if (vis[r]) continue;
                if ((h.edges[r] & counted) != bit(key)) continue;
                vis[r] = 1;
                int prev = -1;
                for_each_bit(counted, [&](int k2) {
                    if (rel_of_key[k2] == r) prev = k2;
                });
                if (prev == -1 || self(self, prev, vis)) {
                    rel_of_key[key] = r;
                    return true;
                }
            }
            return false;
        };
        bool feasible = true;
        for_each_bit(required, [&](int key) {
            if (!feasible) return;
            std::vector<char> vis(q.num_rels(), 0);
            if (!augment(augment, key, vis)) feasible = false;
        });
        if (!feasible) continue;
        // Extend the matching over the optional output keys so the witness
        // reports the largest key set achieving this value.
        for_each_bit(counted & ~required, [&](int key) {
            std::vector<char> vis(q.num_rels(), 0);
            augment(augment, key, vis);
        });
        best_value = value;
        best_counted = counted;
        best_keys.clear();
        best_key_set = 0;
        std::vector<std::pair<RelId, AttrId>> pairs;
        for_each_bit(counted, [&](int key) {
            if (rel_of_key[key] != -1) {
                pairs.emplace_back(rel_of_key[key], key);
                best_key_set |= bit(key);
            }
        });
        std::sort(pairs.begin(), pairs.end());
        best_keys = pairs;
    }

    rep.dimension = best_value;
    rep.key_set = best_key_set;
    rep.extra_outputs = best_counted & ~best_key_set;
    rep.keys = best_keys;
    for (const auto& [r, a] : best_keys) rep.neighbor_set |= bit(r);
    if (rep.dimension < 1) {
        rep.dimension = 1;
        rep.trivial = true;
    }
    return rep;
}

}  // namespace detail

/// Local dimension of a connected subset of join attributes. The empty subset
/// tries every relation as the sole active relation.
inline DimensionReport local_dimension(const ConjunctiveQuery& q, Mask vc) {
    Hypergraph h = build_hypergraph(q);
    if (vc == 0) {
        std::optional<DimensionReport> best;
        for (int r = 0; r < q.num_rels(); ++r) {
            auto rep = detail::local_dimension_impl(q, h, 0, bit(r));
            if (!best || rep.dimension > best->dimension) best = rep;
        }
        return *best;
    }
    if (vc & h.unique_vertices)
        throw QueryError("connected subset must contain join attributes only");
    if ((vc & ~h.all_vertices()) != 0)
        throw QueryError("connected subset references unknown attribute");
    if (!primal_connected(h, vc)) throw QueryError("subset is not connected");
    Mask ec = 0;
    for (int r = 0; r < q.num_rels(); ++r)
        if (h.edges[r] & vc) ec |= bit(r);
    return detail::local_dimension_impl(q, h, vc, ec);
}

/// Dimension of the query: maximum local dimension over the empty subset
/// (each relation active in turn) and every connected subset of join
/// attributes, enumerated by BFS extension and deduplicated by bitmask.
inline DimensionReport dimension(const ConjunctiveQuery& q,
                                 std::size_t subset_cap = (1u << 22)) {
    Hypergraph h = build_hypergraph(q);
    std::optional<DimensionReport> best;
    auto consider = [&](const DimensionReport& rep) {
        if (!best || rep.dimension > best->dimension) best = rep;
    };
    for (int r = 0; r < q.num_rels(); ++r)
        consider(detail::local_dimension_impl(q, h, 0, bit(r)));

    Mask join_attrs = h.all_vertices() & ~h.unique_vertices;
    auto adj = primal_graph(h, join_attrs);
    std::unordered_set<Mask> seen;
    std::deque<Mask> queue;
    for_each_bit(join_attrs, [&](int v) {
        queue.push_back(bit(v));
        seen.insert(bit(v));
    });
    while (!queue.empty()) {
        Mask vc = queue.front();
        queue.pop_front();
        Mask ec = 0;
        for (int r = 0; r < q.num_rels(); ++r)
            if (h.edges[r] & vc) ec |= bit(r);
        consider(detail::local_dimension_impl(q, h, vc, ec));
        Mask frontier = 0;
        for_each_bit(vc, [&](int v) { frontier |= adj[v]; });
        frontier &= join_attrs & ~vc;
        for_each_bit(frontier, [&](int u) {
            Mask nxt = vc | bit(u);
            if (seen.size() >= subset_cap)
                throw QueryError("connected-subset enumeration cap exceeded");
            if (seen.insert(nxt).second) queue.push_back(nxt);
        });
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Join trees
// ---------------------------------------------------------------------------

struct JoinTreeNode {
    bool is_input = false;
    RelId rel = -1;    // for input nodes
    Mask attrs = 0;    // label (schema for input nodes)
    int parent = -1;
    std::vector<int> children;
};

struct JoinTree {
    std::vector<JoinTreeNode> nodes;
    int root = -1;
    std::vector<int> connex;  // node ids of the connex set
};

struct JoinTreeVerdict {
    bool cover = false;
    bool connect = false;
    bool above = false;
    bool guard = false;
    bool connex = false;
    int height = 0;
    bool all() const { return cover && connect && above && guard && connex; }
};

inline JoinTreeVerdict validate_join_tree(const ConjunctiveQuery& q,
                                          const JoinTree& t) {
    JoinTreeVerdict v;
    if (t.nodes.empty() || t.root < 0) return v;

    // Cover: every relation appears as an input node with its full schema and
    // all leaves are input relations.
    std::vector<int> rel_count(q.num_rels(), 0);
    bool cover = true;
    for (const auto& n : t.nodes) {
        if (n.is_input) {
            if (n.rel < 0 || n.rel >= q.num_rels() ||
                n.attrs != q.rel(n.rel).attr_mask()) {
                cover = false;
                continue;
            }
            ++rel_count[n.rel];
        } else if (n.children.empty()) {
            cover = false;  // generalized leaf
        }
    }
    for (int r = 0; r < q.num_rels(); ++r)
        if (rel_count[r] == 0) cover = false;
    v.cover = cover;

    // Connect: nodes containing an attribute induce a connected subtree.
    bool connect = true;
    for (int a = 0; a < q.num_attrs() && connect; ++a) {
        Mask abit = bit(a);
        int total = 0, start = -1;
        for (std::size_t i = 0; i < t.nodes.size(); ++i)
            if (t.nodes[i].attrs & abit) {
                ++total;
                start = static_cast<int>(i);
            }
        if (total <= 1) continue;
        std::vector<char> vis(t.nodes.size(), 0);
        std::deque<int> dq{start};
        vis[start] = 1;
        int reached = 0;
        while (!dq.empty()) {
            int n = dq.front();
            dq.pop_front();
            ++reached;
            auto step = [&](int m) {
                if (m >= 0 && !vis[m] && (t.nodes[m].attrs & abit)) {
                    vis[m] = 1;
                    dq.push_back(m);
                }
            };
            step(t.nodes[n].parent);
            for (int c : t.nodes[n].children) step(c);
        }
        if (reached != total) connect = false;
    }
    v.connect = connect;

    // Above: no input node is an ancestor of a generalized node.
    bool above = true;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        if (t.nodes[i].is_input) continue;
        for (int p = t.nodes[i].parent; p != -1; p = t.nodes[p].parent)
            if (t.nodes[p].is_input) above = false;
    }
    v.above = above;

    // Guard: generalized labels are contained in every child and guarded by
    // some input schema.
    bool guard = true;
    for (const auto& n : t.nodes) {
        if (n.is_input) continue;
        bool guarded = false;
        for (const auto& r : q.relations())
            if ((n.attrs & ~r.attr_mask()) == 0) guarded = true;
        if (!guarded) guard = false;
        for (int c : n.children)
            if (n.attrs & ~t.nodes[c].attrs) guard = false;
    }
    v.guard = guard;

    // Connex: connected, contains the root, parent-shared attributes are
    // outputs, and the union covers the outputs.
    bool connex = true;
    std::vector<char> in_set(t.nodes.size(), 0);
    for (int n : t.connex) {
        if (n < 0 || n >= static_cast<int>(t.nodes.size())) {
            connex = false;
            break;
        }
        in_set[n] = 1;
    }
    if (t.connex.empty() || !in_set[t.root]) connex = false;
    Mask covered = 0;
    if (connex) {
        for (int n : t.connex) {
            covered |= t.nodes[n].attrs;
            if (n == t.root) continue;
            int p = t.nodes[n].parent;
            if (p < 0 || !in_set[p]) {
                connex = false;
                break;
            }
            if ((t.nodes[n].attrs & t.nodes[p].attrs) & ~q.output_mask()) {
                connex = false;
                break;
            }
        }
    }
    if (connex && (q.output_mask() & ~covered)) connex = false;
    v.connex = connex;

    // Height: maximum count of input relations on a root-to-leaf path.
    auto depth = [&](auto&& self, int n, int inputs) -> int {
        inputs += t.nodes[n].is_input ? 1 : 0;
        int best = inputs;
        for (int c : t.nodes[n].children)
            best = std::max(best, self(self, c, inputs));
        return best;
    };
    v.height = depth(depth, t.root, 0);
    return v;
}

namespace detail {

/// Height-1 tree fragment for a q-hierarchical connected relation group:
/// a generalized node labelled with the attributes common to the whole group,
/// with per-subgroup children. When the common label mixes output and
/// non-output attributes, an output-only node is chained above it so the
/// connex set can reach the outputs without crossing a non-output share.
inline int build_hierarchical_group(const ConjunctiveQuery& q, JoinTree& t,
                                    const SubQuery& s, Mask group,
                                    Mask parent_label = 0) {
    if (popcount(group) == 1) {
        int r = __builtin_ctzll(group);
        t.nodes.push_back({true, r, q.rel(r).attr_mask(), -1, {}});
        return static_cast<int>(t.nodes.size()) - 1;
    }
    Mask common = ~Mask{0};
    for_each_bit(group, [&](int r) { common &= q.rel(r).attr_mask(); });
    common &= s.attrs;

    // An output-only node above a mixed label keeps the connex set able to
    // reach the outputs; legal only when the parent's label is itself all
    // output (it must stay contained in the inserted node).
    int top_id = -1;
    Mask out_part = common & q.output_mask();
    if (out_part != 0 && out_part != common &&
        (parent_label & ~q.output_mask()) == 0) {
        top_id = static_cast<int>(t.nodes.size());
        t.nodes.push_back({false, -1, out_part, -1, {}});
    }

    int self_id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({false, -1, common, -1, {}});
    if (top_id != -1) {
        t.nodes[self_id].parent = top_id;
        t.nodes[top_id].children.push_back(self_id);
    }

    // Partition by connectivity over attributes outside the common label.
    Mask remaining = group;
    while (remaining) {
        Mask comp = bit(__builtin_ctzll(remaining));
        bool grew = true;
        while (grew) {
            grew = false;
            for_each_bit(remaining & ~comp, [&](int r) {
                Mask shared = 0;
                for_each_bit(comp, [&](int r2) {
                    shared |= q.rel(r).attr_mask() & q.rel(r2).attr_mask();
                });
                if (shared & ~common) {
                    comp |= bit(r);
                    grew = true;
                }
            });
        }
        if (comp == group)
            throw QueryError("hierarchical construction stalled (query not q-hierarchical?)");
        int child = build_hierarchical_group(q, t, s, comp, common);
        t.nodes[child].parent = self_id;
        t.nodes[self_id].children.push_back(child);
        remaining &= ~comp;
    }
    return top_id != -1 ? top_id : self_id;
}

}  // namespace detail

/// Builds a free-connex join tree of minimal height: peel ear layers until
/// the core is q-hierarchical, build its height-1 tree, then re-attach each
/// layer's ears as leaf children of anchors that survived into the layer's
/// skeleton. The connex set is the maximal admissible one.
inline JoinTree build_free_connex_join_tree(const ConjunctiveQuery& q) {
    if (!is_free_connex(q)) throw QueryError("not free-connex");
    Mask cur = q.num_rels() == 64 ? ~Mask{0} : bit(q.num_rels()) - 1;

    struct EarAttach {
        RelId ear;
        RelId anchor;
        Mask shared;  // the ear's non-unique attributes at its layer
    };
    struct Layer {
        std::vector<EarAttach> ears;
    };
    std::vector<Layer> layers;
    std::vector<RelId> isolated;  // ears sharing no attribute with their layer
    while (true) {
        detail::SubQuery s(q, cur);
        if (detail::is_q_hierarchical_sub(s)) break;
        auto ea = detail::find_ears_sub(s);
        std::vector<RelId> removed;
        Mask skel = detail::skeleton_sub(s, ea, true, &removed);
        if (skel == cur)
            throw QueryError("ear removal stalled on a non-q-hierarchical core");
        Layer layer;
        for (RelId r : removed) {
            // An ear whose attributes are all unique in its layer is anchored
            // only vacuously; it hangs off the shared root instead.
            if ((q.rel(r).attr_mask() & ~s.unique) == 0) {
                isolated.push_back(r);
                continue;
            }
            Mask in_skel = ea.anchor_candidates[r] & skel;
            if (!in_skel)
                throw QueryError("removed ear has no anchor in the skeleton");
            layer.ears.push_back(
                {r, __builtin_ctzll(in_skel), q.rel(r).attr_mask() & ~s.unique});
        }
        layers.push_back(std::move(layer));
        cur = skel;
    }

    JoinTree t;
    detail::SubQuery core(q, cur);

    // Forest of connected components of the core, under a shared generalized
    // root when there is more than one component.
    std::vector<int> comp_roots;
    Mask remaining = cur;
    while (remaining) {
        Mask comp = bit(__builtin_ctzll(remaining));
        bool grew = true;
        while (grew) {
            grew = false;
            for_each_bit(remaining & ~comp, [&](int r) {
                Mask shared = 0;
                for_each_bit(comp, [&](int r2) {
                    shared |= q.rel(r).attr_mask() & q.rel(r2).attr_mask();
                });
                if (shared) {
                    comp |= bit(r);
                    grew = true;
                }
            });
        }
        comp_roots.push_back(detail::build_hierarchical_group(q, t, core, comp));
        remaining &= ~comp;
    }
    if (comp_roots.size() == 1 && isolated.empty()) {
        t.root = comp_roots[0];
    } else {
        t.root = static_cast<int>(t.nodes.size());
        t.nodes.push_back({false, -1, 0, -1, {}});
        for (int c : comp_roots) {
            t.nodes[c].parent = t.root;
            t.nodes[t.root].children.push_back(c);
        }
        for (RelId r : isolated) {
            int id = static_cast<int>(t.nodes.size());
            t.nodes.push_back({true, r, q.rel(r).attr_mask(), t.root, {}});
            t.nodes[t.root].children.push_back(id);
        }
    }

    // Re-attach ear layers innermost-first so anchors are already present.
    std::vector<int> node_of_rel(q.num_rels(), -1);
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].is_input) node_of_rel[t.nodes[i].rel] = static_cast<int>(i);
    std::vector<EarAttach> all_ears;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        for (const auto& e : it->ears) {
            int parent = node_of_rel[e.anchor];
            int id = static_cast<int>(t.nodes.size());
            t.nodes.push_back({true, e.ear, q.rel(e.ear).attr_mask(), parent, {}});
            t.nodes[parent].children.push_back(id);
            node_of_rel[e.ear] = id;
            all_ears.push_back(e);
        }
    }

    // Maximal admissible connex set: grow from the root over edges whose
    // shared attributes are all outputs.
    auto recompute_connex = [&]() {
        t.connex.clear();
        std::deque<int> dq{t.root};
        std::vector<char> in_set(t.nodes.size(), 0);
        in_set[t.root] = 1;
        t.connex.push_back(t.root);
        Mask covered = t.nodes[t.root].attrs;
        while (!dq.empty()) {
            int n = dq.front();
            dq.pop_front();
            for (int c : t.nodes[n].children) {
                if ((t.nodes[c].attrs & t.nodes[n].attrs) & ~q.output_mask())
                    continue;
                in_set[c] = 1;
                t.connex.push_back(c);
                covered |= t.nodes[c].attrs;
                dq.push_back(c);
            }
        }
        return covered;
    };
    Mask covered = recompute_connex();

    // Output-carrying ears whose anchor sits behind a non-output share keep
    // their outputs out of reach; re-hang them below an output-labelled
    // generalized node carrying their join attributes.
    if (q.output_mask() & ~covered) {
        for (const auto& e : all_ears) {
            if (e.shared & ~q.output_mask()) continue;
            if ((q.rel(e.ear).attr_mask() & q.output_mask() & ~covered) == 0) continue;
            int target = -1;
            for (std::size_t g = 0; g < t.nodes.size(); ++g) {
                const auto& n = t.nodes[g];
                if (n.is_input || n.attrs == 0) continue;
                if ((e.shared & ~n.attrs) == 0 &&
                    (n.attrs & ~q.rel(e.ear).attr_mask()) == 0 &&
                    (n.attrs & ~q.output_mask()) == 0) {
                    target = static_cast<int>(g);
                    break;
                }
            }
            if (target < 0) continue;
            int node = node_of_rel[e.ear];
            auto& old_children = t.nodes[t.nodes[node].parent].children;
            old_children.erase(
                std::find(old_children.begin(), old_children.end(), node));
            t.nodes[node].parent = target;
            t.nodes[target].children.push_back(node);
            covered = recompute_connex();
            if ((q.output_mask() & ~covered) == 0) break;
        }
    }
    if (q.output_mask() & ~covered)
        throw QueryError("no free-connex join tree construction found");
    return t;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

enum class QueryClass {
    Cyclic,
    NotFreeConnex,
    QHierarchical,
    WeakQHierarchical,
    HeightK,  // height k >= 3
};

struct Classification {
    QueryClass cls;
    int height = 0;  // 0 when not free-connex
};

inline Classification classify(const ConjunctiveQuery& q) {
    if (!is_acyclic(q)) return {QueryClass::Cyclic, 0};
    if (!is_free_connex(q)) return {QueryClass::NotFreeConnex, 0};
    int k = height(q).height;
    if (k == 1) return {QueryClass::QHierarchical, 1};
    if (k == 2) return {QueryClass::WeakQHierarchical, 2};
    return {QueryClass::HeightK, k};
}

inline std::string class_name(const Classification& c) {
    switch (c.cls) {
        case QueryClass::Cyclic: return "cyclic";
        case QueryClass::NotFreeConnex: return "not-free-connex";
        case QueryClass::QHierarchical: return "q-hierarchical";
        case QueryClass::WeakQHierarchical: return "weak-q-hierarchical";
        case QueryClass::HeightK: return "height-" + std::to_string(c.height);
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Canonical report rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string attr_set_text(const ConjunctiveQuery& q, Mask m) {
    std::string s = "{";
    bool first = true;
    for_each_bit(m, [&](int a) {
        if (!first) s += ",";
        s += q.attr_name(a);
        first = false;
    });
    return s + "}";
}

inline std::string rel_set_text(const ConjunctiveQuery& q, Mask m) {
    std::string s = "{";
    bool first = true;
    for_each_bit(m, [&](int r) {
        if (!first) s += ",";
        s += q.rel(r).name;
        first = false;
    });
    return s + "}";
}

inline std::string path_text(const ConjunctiveQuery& q,
                             const ChordlessPathWitness& w) {
    std::ostringstream os;
    os << "len=" << w.length << " P={";
    for (std::size_t i = 0; i < w.vertices.size(); ++i) {
        if (i) os << ",";
        os << q.attr_name(w.vertices[i]);
    }
    os << "} edges={";
    for (std::size_t i = 0; i < w.edge_seq.size(); ++i) {
        if (i) os << ",";
        os << q.rel(w.edge_seq[i]).name;
    }
    os << "}";
    if (w.output_endpoint) os << " output_endpoint=" << q.rel(*w.output_endpoint).name;
    return os.str();
}

}  // namespace detail

/// Stable-order text rendering of the full analysis; golden-tested.
inline std::string analysis_report_text(const ConjunctiveQuery& q) {
    std::ostringstream os;
    os << "query: " << q.to_string() << "\n";
    bool ac = is_acyclic(q);
    bool fc = ac && is_free_connex(q);
    auto cls = classify(q);
    os << "class: " << class_name(cls) << "\n";
    os << "acyclic: " << (ac ? "true" : "false") << "\n";
    os << "free_connex: " << (fc ? "true" : "false") << "\n";
    os << "q_hierarchical: " << (is_q_hierarchical(q) ? "true" : "false") << "\n";
    auto hr = height(q);
    os << "height: " << hr.height << "\n";
    os << "chordless_path: " << detail::path_text(q, hr.max_chordless) << "\n";
    if (hr.max_q_chordless)
        os << "q_chordless_path: " << detail::path_text(q, *hr.max_q_chordless) << "\n";
    else
        os << "q_chordless_path: none\n";
    auto dim = dimension(q);
    os << "dimension: " << dim.dimension << "\n";
    os << "dim_vc: " << detail::attr_set_text(q, dim.connected_subset) << "\n";
    os << "dim_active: " << detail::rel_set_text(q, dim.active_relations) << "\n";
    os << "dim_keys: {";
    for (std::size_t i = 0; i < dim.keys.size(); ++i) {
        if (i) os << ",";
        os << q.rel(dim.keys[i].first).name << "->" << q.attr_name(dim.keys[i].second);
    }
    os << "}\n";
    os << "dim_extra_outputs: " << detail::attr_set_text(q, dim.extra_outputs) << "\n";
    if (ac) {
        auto res = residual_query(q);
        os << "residual: " << res.query.to_string() << "\n";
    } else {
        os << "residual: n/a\n";
    }
    if (fc) {
        auto tree = build_free_connex_join_tree(q);
        auto verdict = validate_join_tree(q, tree);
        os << "join_tree: height=" << verdict.height << " cover="
           << (verdict.cover ? "pass" : "fail") << " connect="
           << (verdict.connect ? "pass" : "fail") << " above="
           << (verdict.above ? "pass" : "fail") << " guard="
           << (verdict.guard ? "pass" : "fail") << " connex="
           << (verdict.connex ? "pass" : "fail") << "\n";
    } else {
        os << "join_tree: n/a\n";
    }
    return os.str();
}

}  // namespace cqdyn

#endif  // CQDYN_ANALYZER_HPP
