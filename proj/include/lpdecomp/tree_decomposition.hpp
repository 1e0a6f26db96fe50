#pragma once

// Tree decompositions of rule hypergraphs by bucket elimination over the
// primal graph, with min-fill or min-degree elimination orderings.

#include "lpdecomp/hypergraph.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lpdecomp {

enum class Heuristic { MinFill, MinDegree };

inline std::string_view to_string(Heuristic h) { return h == Heuristic::MinFill ? "min-fill" : "min-degree"; }

/// Node ids are indices into `bags`.
struct TreeDecomposition {
    std::vector<VarSet> bags;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::size_t root = 0;

    std::size_t size() const { return bags.size(); }

    std::size_t width() const {
        std::size_t w = 0;
        for (const auto& b : bags)
            w = std::max(w, b.size());
        return w == 0 ? 0 : w - 1;
    }

    std::size_t total_bag_size() const {
        std::size_t s = 0;
        for (const auto& b : bags)
            s += b.size();
        return s;
    }

    std::vector<std::vector<std::size_t>> adjacency() const {
        std::vector<std::vector<std::size_t>> adj(bags.size());
        for (auto [a, b] : edges) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        for (auto& n : adj)
            std::sort(n.begin(), n.end());
        return adj;
    }

    /// Parent of every node when oriented away from `root`; the root maps to itself.
    /// Assumes a valid tree.
    std::vector<std::size_t> parents() const {
        auto adj = adjacency();
        std::vector<std::size_t> parent(bags.size(), bags.size());
        std::vector<std::size_t> queue{root};
        parent[root] = root;
        for (std::size_t i = 0; i < queue.size(); ++i)
            for (auto n : adj[queue[i]])
                if (parent[n] == bags.size()) {
                    parent[n] = queue[i];
                    queue.push_back(n);
                }
        return parent;
    }

    /// Nodes in breadth-first order from the root, children by ascending id.
    std::vector<std::size_t> preorder() const {
        auto adj = adjacency();
        std::vector<bool> seen(bags.size(), false);
        std::vector<std::size_t> order{root};
        seen[root] = true;
        for (std::size_t i = 0; i < order.size(); ++i)
            for (auto n : adj[order[i]])
                if (!seen[n]) {
                    seen[n] = true;
                    order.push_back(n);
                }
        return order;
    }

    friend bool operator==(const TreeDecomposition&, const TreeDecomposition&) = default;
};

/// A violated decomposition invariant with a witness.
struct Violation {
    enum class Kind { Coverage, Connectedness, TreeShape };
    Kind kind;
    VarSet witness_vars;
    std::string message;
};

inline std::optional<Violation> validate_decomposition(const Hypergraph& h, const TreeDecomposition& td) {
    const std::size_t n = td.bags.size();

    for (const auto& e : h.edges) {
        bool covered = std::any_of(td.bags.begin(), td.bags.end(), [&](const VarSet& bag) {
            return std::includes(bag.begin(), bag.end(), e.vertices.begin(), e.vertices.end());
        });
        if (!covered) {
            std::string msg = "hyperedge {";
            for (const auto& v : e.vertices)
                msg += (msg.back() == '{' ? "" : ",") + v;
            return Violation{Violation::Kind::Coverage, e.vertices, msg + "} is not covered by any bag"};
        }
    }

    for (auto [a, b] : td.edges)
        if (a >= n || b >= n || a == b)
            return Violation{Violation::Kind::TreeShape, {}, "tree edge references an invalid node"};
    auto adj = td.adjacency();

    VarSet all;
    for (const auto& bag : td.bags)
        all.insert(bag.begin(), bag.end());
    for (const auto& v : all) {
        std::vector<std::size_t> holders;
        for (std::size_t t = 0; t < n; ++t)
            if (td.bags[t].contains(v))
                holders.push_back(t);
        std::vector<bool> seen(n, false);
        std::vector<std::size_t> stack{holders.front()};
        seen[holders.front()] = true;
        std::size_t reached = 0;
        while (!stack.empty()) {
            auto t = stack.back();
            stack.pop_back();
            ++reached;
            for (auto u : adj[t])
                if (!seen[u] && td.bags[u].contains(v)) {
                    seen[u] = true;
                    stack.push_back(u);
                }
        }
        if (reached != holders.size())
            return Violation{Violation::Kind::Connectedness, {v},
                             "bags containing " + v + " do not induce a connected subtree"};
    }

    if (n == 0)
        return Violation{Violation::Kind::TreeShape, {}, "decomposition has no nodes"};
    if (td.edges.size() != n - 1)
        return Violation{Violation::Kind::TreeShape, {},
                         "expected " + std::to_string(n - 1) + " tree edges, found " + std::to_string(td.edges.size())};
    if (td.root >= n)
        return Violation{Violation::Kind::TreeShape, {}, "root is not a node"};
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t reached = 0;
    while (!stack.empty()) {
        auto t = stack.back();
        stack.pop_back();
        ++reached;
        for (auto u : adj[t])
            if (!seen[u]) {
                seen[u] = true;
                stack.push_back(u);
            }
    }
    if (reached != n)
        return Violation{Violation::Kind::TreeShape, {}, "tree edges do not connect all nodes"};
    return std::nullopt;
}

namespace detail {

using Graph = std::map<std::string, VarSet>;

inline Graph primal_graph(const Hypergraph& h) {
    Graph g;
    auto clique = [&](const VarSet& vs) {
        for (const auto& a : vs) {
            auto& n = g[a];
            for (const auto& b : vs)
                if (a != b)
                    n.insert(b);
        }
    };
    for (const auto& v : h.vertices)
        g[v];
    for (const auto& e : h.edges)
        clique(e.vertices);
    // Disjunctive heads: all head variables must meet in one bag.
    clique(h.head_vertices());
    return g;
}

inline std::size_t fill_in(const Graph& g, const std::string& v) {
    const auto& n = g.at(v);
    std::size_t missing = 0;
    for (auto a = n.begin(); a != n.end(); ++a)
        for (auto b = std::next(a); b != n.end(); ++b)
            missing += g.at(*a).contains(*b) ? 0 : 1;
    return missing;
}

/// Tie-break ranks: lexicographic for seed 0, a seeded shuffle otherwise.
inline std::map<std::string, std::size_t> tie_ranks(const VarSet& vertices, std::uint64_t seed) {
    std::vector<std::string> order(vertices.begin(), vertices.end());
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);
    }
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i)
        rank[order[i]] = i;
    return rank;
}

/// Merges every bag that is a subset of a neighbouring bag into that neighbour.
inline void reduce(std::vector<VarSet>& bags, std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<bool> alive(bags.size(), true);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < edges.size() && !changed; ++i) {
            auto [a, b] = edges[i];
            std::size_t gone, keep;
            if (std::includes(bags[b].begin(), bags[b].end(), bags[a].begin(), bags[a].end())) {
                gone = a, keep = b;
            } else if (std::includes(bags[a].begin(), bags[a].end(), bags[b].begin(), bags[b].end())) {
                gone = b, keep = a;
            } else {
                continue;
            }
            edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(i));
            for (auto& [x, y] : edges) {
                if (x == gone) x = keep;
                if (y == gone) y = keep;
            }
            alive[gone] = false;
            changed = true;
        }
    }
    std::vector<std::size_t> remap(bags.size());
    std::vector<VarSet> kept;
    for (std::size_t i = 0; i < bags.size(); ++i)
        if (alive[i]) {
            remap[i] = kept.size();
            kept.push_back(std::move(bags[i]));
        }
    for (auto& [x, y] : edges)
        x = remap[x], y = remap[y];
    bags = std::move(kept);
}

} // namespace detail

/// Decomposes `h` by eliminating vertices in heuristic order. The result is
/// reduced, rooted at a bag covering all head variables, numbered breadth-first
/// from the root, and validated before it is returned.
inline TreeDecomposition tree_decompose(const Hypergraph& h, Heuristic heuristic = Heuristic::MinFill,
                                        std::uint64_t seed = 0) {
    if (h.empty())
        throw EmptyHypergraphError("cannot decompose a hypergraph without vertices");

    auto g = detail::primal_graph(h);
    auto rank = detail::tie_ranks(h.vertices, seed);

    std::vector<std::string> order;
    std::vector<VarSet> bags;
    while (!g.empty()) {
        const std::string* best = nullptr;
        std::pair<std::size_t, std::size_t> best_key{};
        for (const auto& [v, nbrs] : g) {
            std::size_t score = heuristic == Heuristic::MinFill ? detail::fill_in(g, v) : nbrs.size();
            std::pair<std::size_t, std::size_t> key{score, rank.at(v)};
            if (!best || key < best_key) {
                best = &v;
                best_key = key;
            }
        }
        std::string v = *best;
        VarSet nbrs = g.at(v);
        VarSet bag = nbrs;
        bag.insert(v);
        for (const auto& a : nbrs) {
            auto& na = g.at(a);
            na.erase(v);
            for (const auto& b : nbrs)
                if (a != b)
                    na.insert(b);
        }
        g.erase(v);
        order.push_back(v);
        bags.push_back(std::move(bag));
    }

    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < order.size(); ++i)
        position[order[i]] = i;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::size_t> orphans;
    for (std::size_t i = 0; i < bags.size(); ++i) {
        std::size_t parent = bags.size();
        for (const auto& u : bags[i])
            if (u != order[i])
                parent = std::min(parent, position.at(u));
        if (parent == bags.size())
            orphans.push_back(i);
        else
            edges.emplace_back(i, parent);
    }
    // Disconnected primal graphs leave one orphan per component; chain them up.
    for (std::size_t i = 0; i + 1 < orphans.size(); ++i)
        edges.emplace_back(orphans[i], orphans.back());

    detail::reduce(bags, edges);

    TreeDecomposition raw{std::move(bags), std::move(edges), 0};
    auto head = h.head_vertices();
    for (std::size_t t = 0; t < raw.bags.size(); ++t)
        if (std::includes(raw.bags[t].begin(), raw.bags[t].end(), head.begin(), head.end())) {
            raw.root = t;
            break;
        }

    auto bfs = raw.preorder();
    std::vector<std::size_t> renumber(bfs.size());
    for (std::size_t i = 0; i < bfs.size(); ++i)
        renumber[bfs[i]] = i;
    TreeDecomposition td;
    td.root = 0;
    for (auto t : bfs)
        td.bags.push_back(raw.bags[t]);
    for (auto [a, b] : raw.edges) {
        auto x = renumber[a], y = renumber[b];
        td.edges.emplace_back(std::min(x, y), std::max(x, y));
    }
    std::sort(td.edges.begin(), td.edges.end());

    if (auto bad = validate_decomposition(h, td))
        throw std::logic_error("tree_decompose produced an invalid decomposition: " + bad->message);
    return td;
}

/// Index of the preferred candidate: minimal width, then minimal total bag
/// size, then lowest index.
inline std::size_t select_best(std::span<const TreeDecomposition> candidates) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& b = candidates[best];
        if (std::pair(c.width(), c.total_bag_size()) < std::pair(b.width(), b.total_bag_size()))
            best = i;
    }
    return best;
}

inline constexpr std::size_t kCandidatesPerHeuristic = 4;

/// Builds `k` candidates per heuristic (seeds 0..k-1, min-fill first) and
/// returns the preferred one.
inline TreeDecomposition select_decomposition(const Hypergraph& h, std::size_t k = kCandidatesPerHeuristic) {
    std::vector<TreeDecomposition> candidates;
    candidates.reserve(2 * k);
    for (auto heuristic : {Heuristic::MinFill, Heuristic::MinDegree})
        for (std::uint64_t seed = 0; seed < std::max<std::size_t>(k, 1); ++seed)
            candidates.push_back(tree_decompose(h, heuristic, seed));
    return candidates[select_best(candidates)];
}

/// Debug listing: one bag per line, then the tree edges.
inline void dump(std::ostream& os, const TreeDecomposition& td) {
    for (std::size_t t = 0; t < td.bags.size(); ++t) {
        os << "bag " << t << (t == td.root ? " (root):" : ":");
        for (const auto& v : td.bags[t])
            os << ' ' << v;
        os << '\n';
    }
    for (auto [a, b] : td.edges)
        os << "tree-edge " << a << ' ' << b << '\n';
}

} // namespace lpdecomp
