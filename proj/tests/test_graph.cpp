#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bittide/graph.hpp"
#include "test_support.hpp"

using namespace bittide;
using bittide::testing::kirchhoff_resistance;
using bittide::testing::random_connected_graph;

namespace {

OrientedGraph triangle() { return {3, {{0, 1}, {1, 2}, {0, 2}}}; }

} // namespace

TEST(OrientedGraph, RejectsSelfLoopsDuplicatesAndRange)
{
    EXPECT_THROW(OrientedGraph(3, {{0, 0}}), InvalidGraph);
    EXPECT_THROW(OrientedGraph(3, {{0, 1}, {1, 0}}), InvalidGraph);
    EXPECT_THROW(OrientedGraph(3, {{0, 3}}), InvalidGraph);
    EXPECT_THROW(OrientedGraph(1, {}), InvalidGraph);
}

TEST(Incidence, SingleEdge)
{
    const Matrix b = incidence_matrix(OrientedGraph(2, {{0, 1}}));
    ASSERT_EQ(b.rows(), 2);
    ASSERT_EQ(b.cols(), 1);
    EXPECT_EQ(b(0, 0), 1.0);
    EXPECT_EQ(b(1, 0), -1.0);
}

TEST(Incidence, Triangle)
{
    Matrix want(3, 3);
    want << 1, 0, 1, -1, 1, 0, 0, -1, -1;
    EXPECT_EQ(incidence_matrix(triangle()), want);
}

TEST(Incidence, ColumnsSumToZero)
{
    std::mt19937_64 rng(1);
    const Matrix b = incidence_matrix(random_connected_graph(10, 0.3, rng));
    EXPECT_EQ(b.colwise().sum().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Laplacian, Triangle)
{
    Matrix want(3, 3);
    want << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    EXPECT_EQ(laplacian(triangle()), want);
}

TEST(Laplacian, Path)
{
    Matrix want(3, 3);
    want << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    EXPECT_EQ(laplacian(graphs::path(3)), want);
}

TEST(Laplacian, RankIsNMinusOneWhenConnected)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_connected_graph(3 + trial % 6, 0.4, rng);
        Eigen::FullPivLU<Matrix> lu(laplacian(g));
        lu.setThreshold(1e-10);
        EXPECT_EQ(lu.rank(), g.node_count() - 1);
    }
}

TEST(SpectralData, TriangleSpectrum)
{
    // L = 3I - J: eigenvalue 0 on the ones vector, 3 on its complement.
    const auto sd = spectral_data(triangle());
    EXPECT_NEAR(sd.eigenvalues(0), 0.0, 1e-15);
    EXPECT_NEAR(sd.eigenvalues(1), 3.0, 1e-12);
    EXPECT_NEAR(sd.eigenvalues(2), 3.0, 1e-12);
}

TEST(SpectralData, DisconnectedGraphThrows)
{
    EXPECT_THROW(spectral_data(OrientedGraph(4, {{0, 1}, {2, 3}})), NotConnected);
}

TEST(SpectralData, PseudoInverseAndBasisIdentities)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_connected_graph(2 + trial % 9, 0.3, rng);
        const auto sd = spectral_data(g);
        const int n = g.node_count();
        const auto& l = sd.laplacian;
        EXPECT_LE((l * sd.pseudo_inverse * l - l).norm(), 1e-10 * l.norm());
        EXPECT_LE((sd.pseudo_inverse * Vector::Ones(n)).norm(), 1e-12);
        EXPECT_LE((l * Vector::Ones(n)).norm(), 0.0);
        EXPECT_LE((sd.u1.transpose() * sd.u1 - Matrix::Identity(n - 1, n - 1)).norm(), 1e-12);
        EXPECT_LE((sd.u1.transpose() * Vector::Ones(n)).norm(), 1e-12);
        Matrix u(n, n);
        u << sd.u1, Vector::Constant(n, 1.0 / std::sqrt(double(n)));
        EXPECT_LE((u.transpose() * u - Matrix::Identity(n, n)).norm(), 1e-12);
        const auto lhat = numerics::eig_symmetric(sd.reduced_laplacian);
        EXPECT_GT(lhat.values(0), 0.0);
        EXPECT_LE((sd.u1 * sd.reduced_laplacian * sd.u1.transpose() - l).norm(), 1e-10);
    }
}

TEST(SpectralData, AlgebraicConnectivityPositiveIffConnected)
{
    std::mt19937_64 rng(4);
    int connected = 0;
    int disconnected = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = bittide::testing::random_graph(2 + trial % 7, 0.35, rng);
        const bool oracle = bittide::testing::connected_by_union_find(g);
        const auto ev = numerics::eig_symmetric(laplacian(g)).values;
        EXPECT_EQ(ev(1) > 1e-9 * std::max(1.0, ev(ev.size() - 1)), oracle);
        EXPECT_EQ(g.is_connected(), oracle);
        (oracle ? connected : disconnected)++;
        if (!oracle)
            EXPECT_THROW(spectral_data(g), NotConnected);
    }
    EXPECT_GT(connected, 10);
    EXPECT_GT(disconnected, 10);
}

TEST(Resistance, SingleEdgeIsOneOhm)
{
    EXPECT_NEAR(resistance_distance(spectral_data(graphs::path(2)), 0, 1), 1.0, 1e-14);
}

TEST(Resistance, TriangleSeriesParallel)
{
    // 1 ohm in parallel with 2 ohms in series: 1 * 2 / 3.
    const auto g = triangle();
    EXPECT_NEAR(resistance_distance(spectral_data(g), 0, 1), 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(kirchhoff_resistance(g, 0, 1), 2.0 / 3.0, 1e-14);
}

TEST(Resistance, MatchesKirchhoffOracle)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 15; ++trial) {
        const auto g = random_connected_graph(3 + trial % 7, 0.3, rng);
        const auto sd = spectral_data(g);
        for (int i = 0; i < g.node_count(); ++i)
            for (int j = 0; j < g.node_count(); ++j)
                EXPECT_NEAR(resistance_distance(sd, i, j), kirchhoff_resistance(g, i, j), 1e-10);
    }
}

TEST(Resistance, MeshCloseAndFarPairs)
{
    const auto sd = spectral_data(graphs::mesh(4, 6));
    // Adjacent corner nodes and diagonally opposite corners.
    EXPECT_NEAR(resistance_distance(sd, 0, 1), 0.700, 0.700 * 0.01);
    EXPECT_NEAR(resistance_distance(sd, 0, 23), 2.262, 2.262 * 0.01);
}

TEST(Resistance, SymmetricZeroDiagonalBoundedByHops)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_connected_graph(2 + trial % 8, 0.25, rng);
        const auto sd = spectral_data(g);
        for (int i = 0; i < g.node_count(); ++i) {
            const auto hops = g.hop_distances(i);
            EXPECT_EQ(resistance_distance(sd, i, i), 0.0);
            for (int j = 0; j < g.node_count(); ++j) {
                EXPECT_DOUBLE_EQ(resistance_distance(sd, i, j), resistance_distance(sd, j, i));
                EXPECT_LE(resistance_distance(sd, i, j), hops[static_cast<std::size_t>(j)] + 1e-10);
            }
        }
    }
}

TEST(Resistance, TriangleInequality)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_connected_graph(3 + trial % 6, 0.3, rng);
        const Matrix r = resistance_matrix(spectral_data(g));
        const int n = g.node_count();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    EXPECT_LE(r(i, j), r(i, k) + r(k, j) + 1e-10);
    }
}

TEST(Resistance, RayleighMonotonicity)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_connected_graph(3 + trial % 7, 0.2, rng);
        const int n = g.node_count();
        std::vector<std::pair<int, int>> missing;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (!g.has_edge(i, j))
                    missing.emplace_back(i, j);
        if (missing.empty())
            continue;
        const auto [i, j] = missing[std::uniform_int_distribution<std::size_t>(0, missing.size() - 1)(rng)];
        const Matrix before = resistance_matrix(spectral_data(g));
        const Matrix after = resistance_matrix(spectral_data(g.with_edge(i, j)));
        EXPECT_LE((after - before).maxCoeff(), 1e-10);
    }
}

TEST(Resistance, IndexOutOfRange)
{
    EXPECT_THROW(resistance_distance(spectral_data(graphs::path(3)), 0, 3), std::out_of_range);
}

TEST(Fiedler, PathOfThree)
{
    // L = [1 -1 0; -1 2 -1; 0 -1 1] has spectrum {0, 1, 3}; lambda = 1 on (1, 0, -1).
    const auto f = fiedler_vector(spectral_data(graphs::path(3)));
    EXPECT_FALSE(f.degenerate);
    EXPECT_NEAR(f.algebraic_connectivity, 1.0, 1e-12);
    EXPECT_NEAR(f.vector(0), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(f.vector(1), 0.0, 1e-12);
    EXPECT_NEAR(f.vector(2), -1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Fiedler, CompleteGraphIsDegenerate)
{
    const auto f = fiedler_vector(spectral_data(graphs::complete(4)));
    EXPECT_TRUE(f.degenerate);
    EXPECT_EQ(f.multiplicity, 3);
    EXPECT_NEAR(f.algebraic_connectivity, 4.0, 1e-12);
}

TEST(Fiedler, OrthogonalToOnes)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_connected_graph(3 + trial % 8, 0.3, rng);
        const auto f = fiedler_vector(spectral_data(g));
        EXPECT_NEAR(f.vector.sum(), 0.0, 1e-12);
        EXPECT_NEAR(f.vector.norm(), 1.0, 1e-12);
    }
}

TEST(Generators, Sizes)
{
    EXPECT_EQ(graphs::complete(3).edge_count(), 3);
    const auto m = graphs::mesh(4, 6);
    EXPECT_EQ(m.node_count(), 24);
    EXPECT_EQ(m.edge_count(), 4 * 5 + 6 * 3);
    EXPECT_EQ(graphs::path(2), graphs::complete(2));
    for (const auto& e : m.edges())
        EXPECT_LT(e.source, e.target);
    EXPECT_THROW(graphs::complete(1), InvalidGraph);
    EXPECT_THROW(graphs::mesh(1, 1), InvalidGraph);
    EXPECT_NO_THROW(graphs::mesh(1, 2));
}
