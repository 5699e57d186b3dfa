#include "curvebind/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "curvebind/errors.hpp"
#include "curvebind/transport.hpp"

namespace curvebind {

SimpleGraph SimpleGraph::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    SimpleGraph g;
    g.n = n;
    g.adj.resize(static_cast<std::size_t>(n));
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n || b >= n) throw ValidationError("graph: edge index out of range");
        if (a == b) throw ValidationError("graph: self-loop");
        const auto e = std::minmax(a, b);
        if (!seen.insert({e.first, e.second}).second) continue;
        g.edges.push_back({e.first, e.second});
        g.adj[static_cast<std::size_t>(a)].push_back(b);
        g.adj[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& nb : g.adj) std::sort(nb.begin(), nb.end());
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

bool SimpleGraph::adjacent(int u, int v) const {
    const auto& nb = adj[static_cast<std::size_t>(u)];
    return std::binary_search(nb.begin(), nb.end(), v);
}

double CurvatureMap::at(int u, int v) const {
    const auto e = std::minmax(u, v);
    auto it = kappa.find({e.first, e.second});
    if (it == kappa.end()) throw ValidationError("curvature: edge not in map");
    return it->second;
}

NeighborMeasure neighbor_measure(const SimpleGraph& g, int node) {
    const int deg = g.degree(node);
    if (deg == 0) throw ValidationError("neighbor_measure: isolated node has no measure");
    NeighborMeasure m;
    m.support = g.adj[static_cast<std::size_t>(node)];
    m.mass.assign(m.support.size(), 1.0 / static_cast<double>(deg));
    return m;
}

namespace {

// single-source hop counts; -1 for unreachable
std::vector<int> bfs_hops(const SimpleGraph& g, int src) {
    std::vector<int> d(static_cast<std::size_t>(g.n), -1);
    std::queue<int> q;
    d[static_cast<std::size_t>(src)] = 0;
    q.push(src);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : g.adj[static_cast<std::size_t>(u)])
            if (d[static_cast<std::size_t>(v)] < 0) {
                d[static_cast<std::size_t>(v)] = d[static_cast<std::size_t>(u)] + 1;
                q.push(v);
            }
    }
    return d;
}

double w1_between(const SimpleGraph& g, int u, int v,
                  const std::vector<std::vector<int>>* all_hops) {
    const NeighborMeasure mu = neighbor_measure(g, u);
    const NeighborMeasure nu = neighbor_measure(g, v);
    Tensor cost(mu.support.size(), nu.support.size());
    if (all_hops) {
        for (std::size_t i = 0; i < mu.support.size(); ++i)
            for (std::size_t j = 0; j < nu.support.size(); ++j) {
                const int h = (*all_hops)[static_cast<std::size_t>(mu.support[i])]
                                         [static_cast<std::size_t>(nu.support[j])];
                if (h < 0) throw NumericError("curvature: unreachable support pair");
                cost(i, j) = static_cast<double>(h);
            }
    } else {
        cost = local_distances(g, mu.support, nu.support);
    }
    return wasserstein1(mu, nu, cost);
}

} // namespace

Tensor local_distances(const SimpleGraph& g, const std::vector<int>& s,
                       const std::vector<int>& t) {
    Tensor out(s.size(), t.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::vector<int> d = bfs_hops(g, s[i]);
        for (std::size_t j = 0; j < t.size(); ++j) {
            const int h = d[static_cast<std::size_t>(t[j])];
            if (h < 0)
                throw NumericError("local_distances: node " + std::to_string(t[j]) +
                                   " unreachable from " + std::to_string(s[i]));
            out(i, j) = static_cast<double>(h);
        }
    }
    return out;
}

double wasserstein1(const NeighborMeasure& mu, const NeighborMeasure& nu, const Tensor& cost) {
    return solve_transport(mu.mass, nu.mass, cost);
}

double edge_curvature(const SimpleGraph& g, int u, int v) {
    if (!g.adjacent(u, v)) throw ValidationError("edge_curvature: nodes are not adjacent");
    // d_G(u, v) = 1 for adjacent nodes, so kappa = 1 - W1
    return 1.0 - w1_between(g, u, v, nullptr);
}

CurvatureMap graph_curvature(const SimpleGraph& g) {
    // hop counts from every node that carries a measure; one BFS per node
    std::vector<std::vector<int>> hops(static_cast<std::size_t>(g.n));
    std::vector<char> needed(static_cast<std::size_t>(g.n), 0);
    for (auto [u, v] : g.edges) {
        for (int z : g.adj[static_cast<std::size_t>(u)]) needed[static_cast<std::size_t>(z)] = 1;
        for (int z : g.adj[static_cast<std::size_t>(v)]) needed[static_cast<std::size_t>(z)] = 1;
    }
    for (int i = 0; i < g.n; ++i)
        if (needed[static_cast<std::size_t>(i)]) hops[static_cast<std::size_t>(i)] = bfs_hops(g, i);

    CurvatureMap cm;
    for (auto [u, v] : g.edges) cm.kappa[{u, v}] = 1.0 - w1_between(g, u, v, &hops);
    return cm;
}

LcfVector node_lcf(const SimpleGraph& g, const CurvatureMap& cm, int v) {
    const auto& nb = g.adj[static_cast<std::size_t>(v)];
    LcfVector out;
    if (nb.empty()) return out; // isolated node: neutral all-zero feature
    std::vector<double> ks;
    ks.reserve(nb.size());
    for (int u : nb) ks.push_back(cm.at(u, v));
    std::sort(ks.begin(), ks.end());
    const std::size_t c = ks.size();
    out.min = ks.front();
    out.max = ks.back();
    double mean = 0.0;
    for (double k : ks) mean += k;
    mean /= static_cast<double>(c);
    out.mean = mean;
    double var = 0.0;
    for (double k : ks) var += (k - mean) * (k - mean);
    out.std = std::sqrt(var / static_cast<double>(c)); // population convention
    out.median = c % 2 == 1 ? ks[c / 2] : 0.5 * (ks[c / 2 - 1] + ks[c / 2]);
    return out;
}

std::vector<LcfVector> graph_lcf(const SimpleGraph& g) {
    const CurvatureMap cm = graph_curvature(g);
    std::vector<LcfVector> out;
    out.reserve(static_cast<std::size_t>(g.n));
    for (int v = 0; v < g.n; ++v) out.push_back(node_lcf(g, cm, v));
    return out;
}

Tensor lcf_feature_matrix(const std::vector<LcfVector>& lcf) {
    Tensor out(lcf.size(), 5);
    for (std::size_t i = 0; i < lcf.size(); ++i) {
        const auto a = lcf[i].as_array();
        for (std::size_t j = 0; j < 5; ++j) out(i, j) = a[j];
    }
    return out;
}

} // namespace curvebind
