#ifndef CQDYN_CORE_HPP
#define CQDYN_CORE_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace cqdyn {

/// Domain values are 64-bit integers. The maximum value is reserved as the
/// null marker (written `_` in text formats) used by the update-lifting and
/// tensor reductions.
using Value = std::int64_t;
inline constexpr Value kNull = std::numeric_limits<Value>::max();

/// Attribute ids and relation ids are dense indexes into the owning query.
using AttrId = int;
using RelId = int;

/// Attribute/relation sets are bitmasks; queries are capped at 64 attributes
/// and 64 relations.
using Mask = std::uint64_t;

inline constexpr int kMaxAttrs = 64;
inline constexpr int kMaxRels = 64;

inline Mask bit(int i) { return Mask{1} << i; }
inline bool has_bit(Mask m, int i) { return (m >> i) & 1; }
inline int popcount(Mask m) { return __builtin_popcountll(m); }

/// Iterates set bits in ascending order.
template <typename F>
void for_each_bit(Mask m, F&& f) {
    while (m) {
        int i = __builtin_ctzll(m);
        f(i);
        m &= m - 1;
    }
}

struct Attribute {
    AttrId id = -1;
    std::string name;
};

struct RelationSchema {
    RelId id = -1;
    std::string name;
    std::vector<AttrId> attrs;  // ordered, positional

    Mask attr_mask() const {
        Mask m = 0;
        for (AttrId a : attrs) m |= bit(a);
        return m;
    }
};

class QueryError : public std::runtime_error {
public:
    explicit QueryError(const std::string& what) : std::runtime_error(what) {}
};

/// A self-join-free conjunctive query (V, E, ybar): attributes, relation
/// schemas and the set of output attributes.
class ConjunctiveQuery {
public:
    ConjunctiveQuery() = default;

    ConjunctiveQuery(std::vector<Attribute> attributes,
                     std::vector<RelationSchema> relations, Mask output)
        : attributes_(std::move(attributes)),
          relations_(std::move(relations)),
          output_(output) {
        validate();
    }

    const std::vector<Attribute>& attributes() const { return attributes_; }
    const std::vector<RelationSchema>& relations() const { return relations_; }
    int num_attrs() const { return static_cast<int>(attributes_.size()); }
    int num_rels() const { return static_cast<int>(relations_.size()); }

    Mask output_mask() const { return output_; }
    bool is_output(AttrId a) const { return has_bit(output_, a); }
    bool is_boolean() const { return output_ == 0; }
    bool is_full() const { return output_ == all_attrs_mask(); }

    Mask all_attrs_mask() const {
        return num_attrs() == 64 ? ~Mask{0} : bit(num_attrs()) - 1;
    }

    const RelationSchema& rel(RelId r) const { return relations_.at(r); }
    const Attribute& attr(AttrId a) const { return attributes_.at(a); }
    const std::string& attr_name(AttrId a) const { return attributes_.at(a).name; }

    std::optional<AttrId> find_attr(std::string_view name) const {
        for (const auto& a : attributes_)
            if (a.name == name) return a.id;
        return std::nullopt;
    }

    std::optional<RelId> find_rel(std::string_view name) const {
        for (const auto& r : relations_)
            if (r.name == name) return r.id;
        return std::nullopt;
    }

    /// E[x]: relations whose schema contains attribute x, as a relation mask.
    Mask rels_with_attr(AttrId a) const { return rels_with_[a]; }

    /// Renders a human-readable head/body form, e.g.
    /// "Q(x1) <- R1(x1, x2), R2(x2)".
    std::string to_string() const {
        std::ostringstream os;
        os << "Q(";
        bool first = true;
        for_each_bit(output_, [&](int a) {
            if (!first) os << ", ";
            os << attributes_[a].name;
            first = false;
        });
        os << ") <-";
        for (std::size_t i = 0; i < relations_.size(); ++i) {
            os << (i == 0 ? " " : ", ") << relations_[i].name << "(";
            for (std::size_t j = 0; j < relations_[i].attrs.size(); ++j) {
                if (j) os << ", ";
                os << attributes_[relations_[i].attrs[j]].name;
            }
            os << ")";
        }
        return os.str();
    }

private:
    void validate() {
        if (attributes_.empty()) throw QueryError("query has no attributes");
        if (relations_.empty()) throw QueryError("query has no relations");
        if (attributes_.size() > kMaxAttrs)
            throw QueryError("too many attributes (cap 64)");
        if (relations_.size() > kMaxRels)
            throw QueryError("too many relations (cap 64)");
        std::unordered_set<std::string> names;
        for (std::size_t i = 0; i < attributes_.size(); ++i) {
            if (attributes_[i].id != static_cast<AttrId>(i))
                throw QueryError("attribute ids must be dense 0..n-1");
            if (!names.insert(attributes_[i].name).second)
                throw QueryError("duplicate attribute name: " + attributes_[i].name);
        }
        names.clear();
        rels_with_.assign(attributes_.size(), 0);
        Mask covered = 0;
        for (std::size_t i = 0; i < relations_.size(); ++i) {
            const auto& r = relations_[i];
            if (r.id != static_cast<RelId>(i))
                throw QueryError("relation ids must be dense 0..n-1");
            if (!names.insert(r.name).second)
                throw QueryError("duplicate relation name: " + r.name);
            if (r.attrs.empty())
                throw QueryError("relation " + r.name + " has empty schema");
            Mask seen = 0;
            for (AttrId a : r.attrs) {
                if (a < 0 || a >= num_attrs())
                    throw QueryError("relation " + r.name + " references unknown attribute");
                if (has_bit(seen, a))
                    throw QueryError("relation " + r.name + " repeats an attribute");
                seen |= bit(a);
                rels_with_[a] |= bit(static_cast<int>(i));
            }
            covered |= seen;
        }
        if (covered != all_attrs_mask())
            throw QueryError("every attribute must appear in at least one relation");
        if ((output_ & ~all_attrs_mask()) != 0)
            throw QueryError("output set references unknown attribute");
    }

    std::vector<Attribute> attributes_;
    std::vector<RelationSchema> relations_;
    Mask output_ = 0;
    std::vector<Mask> rels_with_;
};

/// Relational hypergraph of a query: vertices are attribute ids, hyperedges
/// mirror the relations one-to-one (edge id == relation id).
struct Hypergraph {
    int num_vertices = 0;
    std::vector<Mask> edges;         // edge id -> vertex mask
    Mask unique_vertices = 0;        // vertices contained in exactly one edge
    std::vector<Mask> edges_with;    // vertex -> mask of edge ids containing it

    Mask all_vertices() const {
        return num_vertices == 64 ? ~Mask{0} : bit(num_vertices) - 1;
    }
};

inline Hypergraph build_hypergraph(const ConjunctiveQuery& q) {
    Hypergraph h;
    h.num_vertices = q.num_attrs();
    h.edges.reserve(q.relations().size());
    h.edges_with.assign(q.num_attrs(), 0);
    for (const auto& r : q.relations()) {
        Mask m = r.attr_mask();
        for_each_bit(m, [&](int a) { h.edges_with[a] |= bit(r.id); });
        h.edges.push_back(m);
    }
    for (int a = 0; a < h.num_vertices; ++a)
        if (popcount(h.edges_with[a]) == 1) h.unique_vertices |= bit(a);
    return h;
}

/// Primal graph restricted to `subset`: adjacency masks indexed by attribute
/// id; (u,v) adjacent iff some hyperedge contains both and both are in the
/// subset. Vertices outside the subset get empty adjacency.
inline std::vector<Mask> primal_graph(const Hypergraph& h, Mask subset) {
    std::vector<Mask> adj(h.num_vertices, 0);
    for (Mask e : h.edges) {
        Mask inside = e & subset;
        if (popcount(inside) < 2) continue;
        for_each_bit(inside, [&](int v) { adj[v] |= inside & ~bit(v); });
    }
    return adj;
}

/// Connectivity of `subset` in the primal graph. The empty set and singletons
/// are connected.
inline bool primal_connected(const Hypergraph& h, Mask subset) {
    if (popcount(subset) <= 1) return true;
    auto adj = primal_graph(h, subset);
    int start = __builtin_ctzll(subset);
    Mask seen = bit(start), frontier = bit(start);
    while (frontier) {
        Mask next = 0;
        for_each_bit(frontier, [&](int v) { next |= adj[v]; });
        next &= subset & ~seen;
        seen |= next;
        frontier = next;
    }
    return seen == subset;
}

// ---------------------------------------------------------------------------
// Tuples, databases, updates
// ---------------------------------------------------------------------------

using Tuple = std::vector<Value>;

struct TupleHash {
    std::size_t operator()(const Tuple& t) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (Value v : t) {
            std::uint64_t x = static_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i) {
                h ^= (x >> (8 * i)) & 0xff;
                h *= 1099511628211ULL;
            }
        }
        return static_cast<std::size_t>(h);
    }
};

using TupleSet = std::unordered_set<Tuple, TupleHash>;

struct UpdateEvent {
    bool insert = true;  // false = delete
    RelId relation = -1;
    Tuple tuple;
};

/// Set-semantics database: one tuple set per relation. Duplicate inserts and
/// absent deletes are no-ops.
class Database {
public:
    Database() = default;
    explicit Database(int num_relations) : rels_(num_relations) {}

    int num_relations() const { return static_cast<int>(rels_.size()); }
    const TupleSet& rel(RelId r) const { return rels_.at(r); }

    /// Applies one update; returns false when it was a no-op.
    bool apply(const UpdateEvent& ev) {
        auto& rs = rels_.at(ev.relation);
        if (ev.insert) return rs.insert(ev.tuple).second;
        return rs.erase(ev.tuple) > 0;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& rs : rels_) n += rs.size();
        return n;
    }

private:
    std::vector<TupleSet> rels_;
};

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line, int col)
        : std::runtime_error("line " + std::to_string(line) + ", col " +
                             std::to_string(col) + ": " + what),
          line(line),
          col(col) {}
    int line;
    int col;
};

namespace detail {

inline std::string_view strip(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::string_view strip_comment(std::string_view s) {
    auto pos = s.find('#');
    return pos == std::string_view::npos ? s : s.substr(0, pos);
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace detail

/// Parses the query-spec format:
///
///   attrs: x1 x2 x3
///   output: x1 x3          (the line may list no attributes)
///   R1(x1, x2)
///   R2(x2, x3)
///
/// `#` starts a comment; blank lines are ignored. Attribute and relation ids
/// are assigned densely in declaration order.
inline ConjunctiveQuery parse_query(std::string_view text) {
    std::vector<Attribute> attrs;
    std::unordered_map<std::string, AttrId> attr_ids;
    Mask output = 0;
    std::vector<RelationSchema> rels;
    bool saw_attrs = false, saw_output = false;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos
                                                    ? text.size() - pos
                                                    : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        std::string_view line = detail::strip(detail::strip_comment(raw));
        if (line.empty()) continue;

        if (line.substr(0, 6) == "attrs:") {
            if (saw_attrs) throw ParseError("duplicate attrs line", lineno, 1);
            saw_attrs = true;
            for (auto& name : detail::split_ws(line.substr(6))) {
                if (attr_ids.count(name))
                    throw ParseError("duplicate attribute " + name, lineno, 1);
                AttrId id = static_cast<AttrId>(attrs.size());
                attr_ids.emplace(name, id);
                attrs.push_back({id, name});
            }
            continue;
        }
        if (line.substr(0, 7) == "output:") {
            if (!saw_attrs) throw ParseError("output before attrs", lineno, 1);
            if (saw_output) throw ParseError("duplicate output line", lineno, 1);
            saw_output = true;
            for (auto& name : detail::split_ws(line.substr(7))) {
                auto it = attr_ids.find(name);
                if (it == attr_ids.end())
                    throw ParseError("output attribute not declared: " + name,
                                     lineno, 1);
                output |= bit(it->second);
            }
            continue;
        }

        // Relation line: Name(a, b, c)
        if (!saw_attrs || !saw_output)
            throw ParseError("relation before attrs/output lines", lineno, 1);
        auto open = line.find('(');
        if (open == std::string_view::npos || line.back() != ')')
            throw ParseError("expected Name(attr, ...)", lineno,
                             static_cast<int>(open == std::string_view::npos
                                                  ? line.size()
                                                  : open) + 1);
        std::string name(detail::strip(line.substr(0, open)));
        if (name.empty()) throw ParseError("missing relation name", lineno, 1);
        for (const auto& r : rels)
            if (r.name == name)
                throw ParseError("duplicate relation name " + name, lineno, 1);
        std::string_view body = line.substr(open + 1, line.size() - open - 2);
        RelationSchema schema;
        schema.id = static_cast<RelId>(rels.size());
        schema.name = name;
        std::size_t start = 0;
        while (start <= body.size()) {
            auto comma = body.find(',', start);
            std::string_view tok = detail::strip(
                body.substr(start, comma == std::string_view::npos
                                       ? body.size() - start
                                       : comma - start));
            if (!tok.empty()) {
                auto it = attr_ids.find(std::string(tok));
                if (it == attr_ids.end())
                    throw ParseError("undeclared attribute " + std::string(tok) +
                                         " in relation " + name,
                                     lineno, static_cast<int>(open + 2 + start));
                schema.attrs.push_back(it->second);
            } else if (comma != std::string_view::npos) {
                throw ParseError("empty attribute entry", lineno,
                                 static_cast<int>(open + 2 + start));
            }
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (schema.attrs.empty())
            throw ParseError("relation " + name + " lists no attributes", lineno, 1);
        rels.push_back(std::move(schema));
    }

    if (!saw_attrs) throw ParseError("missing attrs line", lineno, 1);
    if (!saw_output) throw ParseError("missing output line", lineno, 1);
    try {
        return ConjunctiveQuery(std::move(attrs), std::move(rels), output);
    } catch (const QueryError& e) {
        throw ParseError(e.what(), lineno, 1);
    }
}

/// Canonical serialization; parse(serialize(q)) reproduces q exactly.
inline std::string serialize_query(const ConjunctiveQuery& q) {
    std::ostringstream os;
    os << "attrs:";
    for (const auto& a : q.attributes()) os << ' ' << a.name;
    os << "\noutput:";
    for_each_bit(q.output_mask(), [&](int a) { os << ' ' << q.attr_name(a); });
    os << '\n';
    for (const auto& r : q.relations()) {
        os << r.name << '(';
        for (std::size_t i = 0; i < r.attrs.size(); ++i) {
            if (i) os << ", ";
            os << q.attr_name(r.attrs[i]);
        }
        os << ")\n";
    }
    return os.str();
}

inline std::string format_value(Value v) {
    return v == kNull ? "_" : std::to_string(v);
}

inline Value parse_value(std::string_view tok, int lineno = 0) {
    if (tok == "_") return kNull;
    Value out = 0;
    bool neg = false;
    std::size_t i = 0;
    if (!tok.empty() && (tok[0] == '-' || tok[0] == '+')) {
        neg = tok[0] == '-';
        i = 1;
    }
    if (i == tok.size()) throw ParseError("bad value '" + std::string(tok) + "'", lineno, 1);
    for (; i < tok.size(); ++i) {
        if (tok[i] < '0' || tok[i] > '9')
            throw ParseError("bad value '" + std::string(tok) + "'", lineno, 1);
        out = out * 10 + (tok[i] - '0');
    }
    return neg ? -out : out;
}

/// One update-log line: `+ Rname v1 v2 ...` or `- Rname v1 v2 ...`.
inline std::string format_event(const ConjunctiveQuery& q, const UpdateEvent& ev) {
    std::ostringstream os;
    os << (ev.insert ? '+' : '-') << ' ' << q.rel(ev.relation).name;
    for (Value v : ev.tuple) os << ' ' << format_value(v);
    return os.str();
}

}  // namespace cqdyn

#endif  // CQDYN_CORE_HPP
