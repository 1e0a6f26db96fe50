#pragma once

#include "lpdecomp/ast.hpp"

#include <ostream>
#include <vector>

namespace lpdecomp {

/// Where a hyperedge came from inside its rule.
struct EdgeOrigin {
    enum class Part : std::uint8_t { Head, Body };
    Part part = Part::Body;
    std::size_t index = 0;

    friend bool operator==(const EdgeOrigin&, const EdgeOrigin&) = default;
};

struct Hyperedge {
    std::size_t id = 0;
    VarSet vertices;
    EdgeOrigin origin;

    friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

/// Variables as vertices, one hyperedge per literal with at least one variable.
struct Hypergraph {
    VarSet vertices;
    std::vector<Hyperedge> edges;

    bool empty() const { return vertices.empty(); }

    /// Union of all head hyperedges; the root of a decomposition must cover it.
    VarSet head_vertices() const {
        VarSet out;
        for (const auto& e : edges)
            if (e.origin.part == EdgeOrigin::Part::Head)
                out.insert(e.vertices.begin(), e.vertices.end());
        return out;
    }
};

inline Hypergraph build_hypergraph(const Rule& r) {
    Hypergraph h;
    auto add = [&](const Literal& l, EdgeOrigin origin) {
        auto vars = literal_vars(l);
        if (vars.empty())
            return;
        h.vertices.insert(vars.begin(), vars.end());
        h.edges.push_back({h.edges.size(), std::move(vars), origin});
    };
    for (std::size_t i = 0; i < r.head.size(); ++i)
        add(r.head[i], {EdgeOrigin::Part::Head, i});
    for (std::size_t i = 0; i < r.body.size(); ++i)
        add(r.body[i], {EdgeOrigin::Part::Body, i});
    return h;
}

/// Debug listing: one sorted vertex per line, then one edge per line.
inline void dump(std::ostream& os, const Hypergraph& h) {
    for (const auto& v : h.vertices)
        os << "vertex " << v << '\n';
    for (const auto& e : h.edges) {
        os << "edge " << e.id << (e.origin.part == EdgeOrigin::Part::Head ? " head " : " body ")
           << e.origin.index << ':';
        for (const auto& v : e.vertices)
            os << ' ' << v;
        os << '\n';
    }
}

} // namespace lpdecomp
