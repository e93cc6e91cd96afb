#pragma once

// Shared generators and independent oracles for the test suites.

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "bittide/graph.hpp"

namespace bittide::testing {

/// Random spanning tree plus extra edges with probability `extra`.
inline OrientedGraph random_connected_graph(int n, double extra, std::mt19937_64& rng)
{
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Edge> edges;
    std::vector<std::vector<char>> used(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
    auto add = [&](int a, int b, bool flip) {
        used[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
        used[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 1;
        edges.push_back(flip ? Edge{b, a} : Edge{a, b});
    };
    std::bernoulli_distribution coin(0.5);
    for (int k = 1; k < n; ++k) {
        std::uniform_int_distribution<int> pick(0, k - 1);
        add(order[static_cast<std::size_t>(pick(rng))], order[static_cast<std::size_t>(k)], coin(rng));
    }
    std::bernoulli_distribution more(extra);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!used[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] && more(rng))
                add(i, j, coin(rng));
    return {n, std::move(edges)};
}

/// Random simple graph (possibly disconnected).
inline OrientedGraph random_graph(int n, double prob, std::mt19937_64& rng)
{
    std::bernoulli_distribution coin(prob);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng))
                edges.push_back({i, j});
    return {n, std::move(edges)};
}

struct UnionFind {
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x)
    {
        while (parent[static_cast<std::size_t>(x)] != x)
            x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
    std::vector<int> parent;
};

inline bool connected_by_union_find(const OrientedGraph& g)
{
    UnionFind uf(g.node_count());
    for (const auto& e : g.edges())
        uf.unite(e.source, e.target);
    const int root = uf.find(0);
    for (int i = 1; i < g.node_count(); ++i)
        if (uf.find(i) != root)
            return false;
    return true;
}

/// Effective resistance by Kirchhoff: inject a unit current at i, ground j,
/// solve the grounded Laplacian for node potentials.
inline double kirchhoff_resistance(const OrientedGraph& g, int i, int j)
{
    if (i == j)
        return 0.0;
    const int n = g.node_count();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges()) {
        lap(e.source, e.source) += 1;
        lap(e.target, e.target) += 1;
        lap(e.source, e.target) -= 1;
        lap(e.target, e.source) -= 1;
    }
    std::vector<int> keep;
    for (int k = 0; k < n; ++k)
        if (k != j)
            keep.push_back(k);
    const int r = n - 1;
    Eigen::MatrixXd grounded(r, r);
    Eigen::VectorXd current = Eigen::VectorXd::Zero(r);
    for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b)
            grounded(a, b) = lap(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
        if (keep[static_cast<std::size_t>(a)] == i)
            current(a) = 1.0;
    }
    const Eigen::VectorXd v = grounded.ldlt().solve(current);
    for (int a = 0; a < r; ++a)
        if (keep[static_cast<std::size_t>(a)] == i)
            return v(a);
    return 0.0;
}

} // namespace bittide::testing
