#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bittide/errors.hpp"
#include "bittide/numerics.hpp"

namespace bittide {

struct Edge {
    int source;
    int target;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected graph whose edges carry an orientation used only for signs.
/// Construction rejects self-loops, duplicate undirected edges and
/// out-of-range endpoints. Connectivity is not enforced here; it is checked
/// where the math needs it (spectral_data, scenario loading).
class OrientedGraph {
  public:
    OrientedGraph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges))
    {
        if (n_ < 2)
            throw InvalidGraph("graph needs at least 2 nodes");
        std::set<std::pair<int, int>> seen;
        for (std::size_t l = 0; l < edges_.size(); ++l) {
            const auto [s, t] = edges_[l];
            if (s < 0 || t < 0 || s >= n_ || t >= n_)
                throw InvalidGraph("edge " + std::to_string(l) + " has an endpoint out of range");
            if (s == t)
                throw InvalidGraph("edge " + std::to_string(l) + " is a self-loop");
            if (!seen.emplace(std::min(s, t), std::max(s, t)).second)
                throw InvalidGraph("edge " + std::to_string(l) + " duplicates an earlier edge");
        }
    }

    int node_count() const { return n_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int l) const { return edges_.at(static_cast<std::size_t>(l)); }

    bool has_edge(int i, int j) const
    {
        return std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
            return (e.source == i && e.target == j) || (e.source == j && e.target == i);
        });
    }

    std::vector<std::vector<int>> adjacency() const
    {
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
        for (const auto& e : edges_) {
            adj[static_cast<std::size_t>(e.source)].push_back(e.target);
            adj[static_cast<std::size_t>(e.target)].push_back(e.source);
        }
        return adj;
    }

    bool is_connected() const
    {
        const auto adj = adjacency();
        std::vector<char> seen(static_cast<std::size_t>(n_), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    ++count;
                    stack.push_back(v);
                }
            }
        }
        return count == n_;
    }

    /// Hop distances from `from` (-1 for unreachable nodes).
    std::vector<int> hop_distances(int from) const
    {
        const auto adj = adjacency();
        std::vector<int> dist(static_cast<std::size_t>(n_), -1);
        std::queue<int> frontier;
        dist.at(static_cast<std::size_t>(from)) = 0;
        frontier.push(from);
        while (!frontier.empty()) {
            const int u = frontier.front();
            frontier.pop();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                    frontier.push(v);
                }
            }
        }
        return dist;
    }

    /// Copy with one more edge, oriented lower index to higher index.
    OrientedGraph with_edge(int i, int j) const
    {
        auto edges = edges_;
        edges.push_back({std::min(i, j), std::max(i, j)});
        return {n_, std::move(edges)};
    }

    friend bool operator==(const OrientedGraph&, const OrientedGraph&) = default;

  private:
    int n_;
    std::vector<Edge> edges_;
};

namespace graphs {

inline OrientedGraph complete(int n)
{
    if (n < 2)
        throw InvalidGraph("complete graph needs n >= 2");
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            edges.push_back({i, j});
    return {n, std::move(edges)};
}

inline OrientedGraph path(int n)
{
    if (n < 2)
        throw InvalidGraph("path graph needs n >= 2");
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i)
        edges.push_back({i, i + 1});
    return {n, std::move(edges)};
}

/// Grid graph with row-major numbering: node (r, c) has index r * cols + c.
inline OrientedGraph mesh(int rows, int cols)
{
    if (rows < 1 || cols < 1 || rows * cols < 2)
        throw InvalidGraph("mesh needs rows * cols >= 2");
    std::vector<Edge> edges;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int u = r * cols + c;
            if (c + 1 < cols)
                edges.push_back({u, u + 1});
            if (r + 1 < rows)
                edges.push_back({u, u + cols});
        }
    }
    return {rows * cols, std::move(edges)};
}

} // namespace graphs

inline Matrix incidence_matrix(const OrientedGraph& g)
{
    Matrix b = Matrix::Zero(g.node_count(), g.edge_count());
    for (int l = 0; l < g.edge_count(); ++l) {
        b(g.edge(l).source, l) = 1.0;
        b(g.edge(l).target, l) = -1.0;
    }
    return b;
}

inline Matrix laplacian(const OrientedGraph& g)
{
    const Matrix b = incidence_matrix(g);
    return b * b.transpose();
}

struct SpectralData {
    Matrix incidence;
    Matrix laplacian;
    Matrix pseudo_inverse;
    Matrix u1;                // n x (n-1), orthonormal, orthogonal to the ones vector
    Matrix reduced_laplacian; // u1^T L u1, positive definite
    Vector eigenvalues;       // ascending, eigenvalues(0) == 0
    Matrix eigenvectors;

    int node_count() const { return static_cast<int>(laplacian.rows()); }
    int edge_count() const { return static_cast<int>(incidence.cols()); }
    double algebraic_connectivity() const { return eigenvalues(1); }
    double lambda_max() const { return eigenvalues(eigenvalues.size() - 1); }
};

/// Eigenvalues below tol * lambda_max count as zero; exactly one is allowed.
inline SpectralData spectral_data(const OrientedGraph& g, double tol = 1e-9)
{
    SpectralData sd;
    sd.incidence = incidence_matrix(g);
    sd.laplacian = sd.incidence * sd.incidence.transpose();
    const auto eig = numerics::eig_symmetric(sd.laplacian);
    const int n = g.node_count();
    const double threshold = tol * std::max(eig.values(n - 1), 1.0);
    int zeros = 0;
    for (int k = 0; k < n; ++k)
        if (eig.values(k) < threshold)
            ++zeros;
    if (zeros != 1)
        throw NotConnected("graph Laplacian has " + std::to_string(zeros) +
                           " zero eigenvalues; the graph is not connected");

    sd.eigenvalues = eig.values;
    sd.eigenvalues(0) = 0.0;
    sd.eigenvectors = eig.vectors;
    sd.u1 = eig.vectors.rightCols(n - 1);
    const Vector inv = eig.values.tail(n - 1).cwiseInverse();
    sd.pseudo_inverse = numerics::symmetrized(sd.u1 * inv.asDiagonal() * sd.u1.transpose());
    sd.reduced_laplacian = numerics::symmetrized(sd.u1.transpose() * sd.laplacian * sd.u1);
    return sd;
}

inline double resistance_distance(const SpectralData& sd, int i, int j)
{
    const int n = sd.node_count();
    if (i < 0 || j < 0 || i >= n || j >= n)
        throw std::out_of_range("resistance_distance: node index out of range");
    if (i == j)
        return 0.0;
    const auto& p = sd.pseudo_inverse;
    return std::max(0.0, p(i, i) + p(j, j) - 2.0 * p(i, j));
}

inline Matrix resistance_matrix(const SpectralData& sd)
{
    const int n = sd.node_count();
    Matrix r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            r(i, j) = resistance_distance(sd, i, j);
    return r;
}

struct FiedlerResult {
    Vector vector;
    double algebraic_connectivity;
    bool degenerate; // lambda_2 repeated: any unit vector of the eigenspace maximizes
    int multiplicity;
};

/// Unit eigenvector of lambda_2, signed so its first nonzero entry is positive.
inline FiedlerResult fiedler_vector(const SpectralData& sd, double tol = 1e-8)
{
    const int n = sd.node_count();
    const double lambda2 = sd.eigenvalues(1);
    int mult = 1;
    while (1 + mult < n && sd.eigenvalues(1 + mult) - lambda2 <= tol * sd.lambda_max())
        ++mult;

    Vector v = sd.eigenvectors.col(1);
    v.normalize();
    for (int i = 0; i < n; ++i) {
        if (std::abs(v(i)) > 1e-12) {
            if (v(i) < 0)
                v = -v;
            break;
        }
    }
    return {v, lambda2, mult > 1, mult};
}

/// Orthonormal basis of the lambda_2 eigenspace (one column when simple).
inline Matrix fiedler_space(const SpectralData& sd, double tol = 1e-8)
{
    const auto f = fiedler_vector(sd, tol);
    return sd.eigenvectors.middleCols(1, f.multiplicity);
}

} // namespace bittide
