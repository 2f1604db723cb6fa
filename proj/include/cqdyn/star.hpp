#ifndef CQDYN_STAR_HPP
#define CQDYN_STAR_HPP

#include <string>

#include "cqdyn/core.hpp"

namespace cqdyn {

/// Shape of a star query
///
///   Q(x_{d-j+1}, ..., x_d) <- R1(x1..xd), R2(x1), ..., R_{k+1}(xk)
///
/// R1 is the center relation; satellite i (1-based) joins on center
/// attribute x_i. The last j center attributes are output.
struct StarQuerySpec {
    int d = 0;  // center arity (= dimension of the query)
    int k = 0;  // number of satellites
    int j = 0;  // number of output attributes

    bool valid() const {
        return d >= 1 && j >= 0 && k >= 0 && d - j <= k && k <= d && j <= d;
    }

    /// Relation id of satellite i in [0, k): center is relation 0.
    static RelId satellite_rel(int i) { return i + 1; }
    int num_relations() const { return k + 1; }
};

inline ConjunctiveQuery star_query_cq(const StarQuerySpec& s) {
    if (!s.valid()) throw QueryError("invalid star spec");
    std::vector<Attribute> attrs;
    for (int i = 0; i < s.d; ++i)
        attrs.push_back({i, "x" + std::to_string(i + 1)});
    std::vector<RelationSchema> rels;
    RelationSchema center;
    center.id = 0;
    center.name = "R1";
    for (int i = 0; i < s.d; ++i) center.attrs.push_back(i);
    rels.push_back(std::move(center));
    for (int i = 0; i < s.k; ++i)
        rels.push_back({i + 1, "R" + std::to_string(i + 2), {i}});
    Mask output = 0;
    for (int i = s.d - s.j; i < s.d; ++i) output |= bit(i);
    return ConjunctiveQuery(std::move(attrs), std::move(rels), output);
}

}  // namespace cqdyn

#endif  // CQDYN_STAR_HPP
