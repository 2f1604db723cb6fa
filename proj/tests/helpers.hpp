#ifndef CQDYN_TESTS_HELPERS_HPP
#define CQDYN_TESTS_HELPERS_HPP

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cqdyn/core.hpp"
#include "cqdyn/oracle.hpp"

namespace testutil {

using namespace cqdyn;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline ConjunctiveQuery load_query(const std::string& name) {
    return parse_query(read_file(std::string(CQDYN_QUERIES_DIR) + "/" + name));
}

inline Mask amask(const ConjunctiveQuery& q, std::initializer_list<const char*> names) {
    Mask m = 0;
    for (const char* n : names) m |= bit(*q.find_attr(n));
    return m;
}

inline Mask rmask(const ConjunctiveQuery& q, std::initializer_list<const char*> names) {
    Mask m = 0;
    for (const char* n : names) m |= bit(*q.find_rel(n));
    return m;
}

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

/// Random query with dense attributes, distinct relation names, arities <= 4.
inline ConjunctiveQuery gen_random_query(Rng& rng, int max_attrs, int max_rels) {
    while (true) {
        int na = uniform_int(rng, 1, max_attrs);
        int nr = uniform_int(rng, 1, max_rels);
        std::vector<std::vector<AttrId>> schemas;
        std::vector<char> used(na, 0);
        for (int r = 0; r < nr; ++r) {
            int arity = uniform_int(rng, 1, std::min(4, na));
            std::vector<AttrId> attrs;
            for (int t = 0; t < arity; ++t) {
                AttrId a = uniform_int(rng, 0, na - 1);
                if (std::find(attrs.begin(), attrs.end(), a) == attrs.end()) {
                    attrs.push_back(a);
                    used[a] = 1;
                }
            }
            schemas.push_back(std::move(attrs));
        }
        // keep only covered attributes, renumber densely
        std::vector<int> remap(na, -1);
        int kept = 0;
        for (int a = 0; a < na; ++a)
            if (used[a]) remap[a] = kept++;
        if (kept == 0) continue;
        std::vector<Attribute> attrs;
        for (int a = 0; a < na; ++a)
            if (used[a])
                attrs.push_back({remap[a], "x" + std::to_string(remap[a] + 1)});
        std::vector<RelationSchema> rels;
        for (int r = 0; r < nr; ++r) {
            RelationSchema rs;
            rs.id = r;
            rs.name = "R" + std::to_string(r + 1);
            for (AttrId a : schemas[r]) rs.attrs.push_back(remap[a]);
            rels.push_back(std::move(rs));
        }
        Mask output = 0;
        int mode = uniform_int(rng, 0, 9);
        if (mode >= 8) {
            output = kept == 64 ? ~Mask{0} : bit(kept) - 1;  // full
        } else if (mode != 0) {  // mode 0 = Boolean
            for (int a = 0; a < kept; ++a)
                if (uniform_int(rng, 0, 9) < 4) output |= bit(a);
        }
        return ConjunctiveQuery(std::move(attrs), std::move(rels), output);
    }
}

/// True when some relation's attribute set is contained in another's
/// (including equal schemas). Such relations are degenerate semijoin filters.
inline bool has_schema_containment(const ConjunctiveQuery& q) {
    for (int i = 0; i < q.num_rels(); ++i)
        for (int j = 0; j < q.num_rels(); ++j) {
            if (i == j) continue;
            if ((q.rel(i).attr_mask() & ~q.rel(j).attr_mask()) == 0) return true;
        }
    return false;
}

/// True when two relations anchor each other (each covers the other's
/// non-unique attributes). Such pairs collapse into one effective relation.
inline bool has_mutual_anchor_pair(const ConjunctiveQuery& q) {
    auto h = build_hypergraph(q);
    for (int i = 0; i < q.num_rels(); ++i)
        for (int j = i + 1; j < q.num_rels(); ++j) {
            Mask ni = q.rel(i).attr_mask() & ~h.unique_vertices;
            Mask nj = q.rel(j).attr_mask() & ~h.unique_vertices;
            if ((ni & ~q.rel(j).attr_mask()) == 0 &&
                (nj & ~q.rel(i).attr_mask()) == 0)
                return true;
        }
    return false;
}

/// Queries whose ear structure degenerates: a contained schema or a mutual
/// anchor pair lets one ear-removal round absorb several path levels at
/// once, so the height recursion and minimal-tree equality do not apply.
/// The join-tree and residual sweeps restrict to non-degenerate queries.
inline bool tree_degenerate(const ConjunctiveQuery& q) {
    return has_schema_containment(q) || has_mutual_anchor_pair(q);
}

template <typename Pred>
inline ConjunctiveQuery gen_query_where(Rng& rng, int max_attrs, int max_rels,
                                        Pred&& pred, int max_tries = 100000) {
    for (int i = 0; i < max_tries; ++i) {
        auto q = gen_random_query(rng, max_attrs, max_rels);
        if (pred(q)) return q;
    }
    throw std::runtime_error("rejection sampling failed");
}

/// Random database for a query: every relation gets `per_rel` tuples with
/// values drawn from [0, domain).
inline Database gen_random_db(Rng& rng, const ConjunctiveQuery& q, int per_rel,
                              int domain) {
    Database db(q.num_rels());
    for (const auto& r : q.relations()) {
        for (int i = 0; i < per_rel; ++i) {
            Tuple t;
            for (std::size_t j = 0; j < r.attrs.size(); ++j)
                t.push_back(uniform_int(rng, 0, domain - 1));
            db.apply({true, r.id, std::move(t)});
        }
    }
    return db;
}

/// Independent query evaluator used to cross-check eval_acyclic_naive:
/// assigns attributes one at a time, drawing candidates from the first
/// relation containing the attribute and pruning with per-relation partial
/// matches via linear scans.
inline TupleSet eval_backtrack(const Database& db, const ConjunctiveQuery& q) {
    const int na = q.num_attrs();
    std::vector<Value> assign(na);
    std::vector<char> bound(na, 0);
    TupleSet out;

    auto rel_consistent = [&](const RelationSchema& r, bool full_only) {
        for (const Tuple& t : db.rel(r.id)) {
            bool ok = true;
            for (std::size_t p = 0; p < r.attrs.size(); ++p) {
                if (!bound[r.attrs[p]]) {
                    if (full_only) { ok = false; break; }
                    continue;
                }
                if (t[p] != assign[r.attrs[p]]) { ok = false; break; }
            }
            if (ok) return true;
        }
        return false;
    };

    auto rec = [&](auto&& self, int a) -> void {
        if (a == na) {
            for (const auto& r : q.relations())
                if (!rel_consistent(r, true)) return;
            Tuple proj;
            for_each_bit(q.output_mask(), [&](int y) { proj.push_back(assign[y]); });
            out.insert(std::move(proj));
            return;
        }
        const RelationSchema* host = nullptr;
        int host_pos = -1;
        for (const auto& r : q.relations())
            for (std::size_t p = 0; p < r.attrs.size(); ++p)
                if (r.attrs[p] == a && !host) {
                    host = &r;
                    host_pos = static_cast<int>(p);
                }
        std::unordered_set<Value> cands;
        for (const Tuple& t : db.rel(host->id)) {
            bool ok = true;
            for (std::size_t p = 0; p < host->attrs.size(); ++p)
                if (bound[host->attrs[p]] && t[p] != assign[host->attrs[p]]) ok = false;
            if (ok) cands.insert(t[host_pos]);
        }
        for (Value v : cands) {
            assign[a] = v;
            bound[a] = 1;
            bool prune = false;
            for (const auto& r : q.relations())
                if (!rel_consistent(r, false)) prune = true;
            if (!prune) self(self, a + 1);
            bound[a] = 0;
        }
    };
    rec(rec, 0);
    return out;
}

}  // namespace testutil

#endif
