#pragma once

#include <array>
#include <map>
#include <utility>
#include <vector>

#include "curvebind/tensor.hpp"

namespace curvebind {

// Plain unweighted undirected graph used for curvature computations.
struct SimpleGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges; // canonical (min, max), unique
    std::vector<std::vector<int>> adj;

    static SimpleGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges);
    int degree(int v) const { return static_cast<int>(adj[v].size()); }
    bool adjacent(int u, int v) const;
};

// Uniform probability measure over a node's one-hop neighborhood.
struct NeighborMeasure {
    std::vector<int> support;
    std::vector<double> mass;
};

struct LcfVector {
    double min = 0.0, max = 0.0, mean = 0.0, std = 0.0, median = 0.0;
    std::array<double, 5> as_array() const { return {min, max, mean, std, median}; }
};

// Per-edge Ollivier-Ricci curvature keyed on the canonical edge.
struct CurvatureMap {
    std::map<std::pair<int, int>, double> kappa;
    double at(int u, int v) const;
};

NeighborMeasure neighbor_measure(const SimpleGraph& g, int node);

// Exact hop-count distances between two node sets, computed over the whole
// graph (not the induced subgraph). Throws NumericError on unreachable pairs.
Tensor local_distances(const SimpleGraph& g, const std::vector<int>& s,
                       const std::vector<int>& t);

// Exact Wasserstein-1 between two measures under the given cost matrix
// (rows indexed by mu's support, columns by nu's).
double wasserstein1(const NeighborMeasure& mu, const NeighborMeasure& nu, const Tensor& cost);

// kappa(u, v) = 1 - W1(m_u, m_v) for adjacent u, v.
double edge_curvature(const SimpleGraph& g, int u, int v);

// Every edge's curvature, each computed once.
CurvatureMap graph_curvature(const SimpleGraph& g);

// Five statistics [min, max, mean, std, median] of the node's curvature
// multiset; population std; all-zero for isolated nodes.
LcfVector node_lcf(const SimpleGraph& g, const CurvatureMap& cm, int v);

std::vector<LcfVector> graph_lcf(const SimpleGraph& g);

Tensor lcf_feature_matrix(const std::vector<LcfVector>& lcf);

} // namespace curvebind
