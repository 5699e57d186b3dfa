#pragma once

#include <utility>
#include <vector>

#include "curvebind/complex.hpp"
#include "curvebind/curvature.hpp"
#include "curvebind/geom.hpp"

namespace curvebind {

// Ligand subgraph: nodes are atoms, edges are the declared chemical bonds.
struct LigandGraph {
    int n = 0;
    std::vector<Vec3> coords;
    std::vector<std::pair<int, int>> edges; // canonical, unique
    std::vector<int> degree;
};

// Protein subgraph: nodes are residues (C-alpha), edges within 8 A (<=).
struct ProteinGraph {
    int n = 0;
    std::vector<Vec3> coords;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> degree;
};

// (ligand atom, residue) pairs with distance strictly below 10 A.
struct CrossEdges {
    std::vector<std::pair<int, int>> pairs;
};

struct ComplexGraph {
    LigandGraph ligand;
    ProteinGraph protein;
    CrossEdges cross;
};

constexpr double kProteinEdgeCutoff = 8.0; // inclusive
constexpr double kCrossEdgeCutoff = 10.0;  // strict

LigandGraph build_ligand_graph(const ComplexRecord& rec);
ProteinGraph build_protein_graph(const ComplexRecord& rec, double cutoff = kProteinEdgeCutoff);
CrossEdges build_cross_edges(const ComplexRecord& rec, double cutoff = kCrossEdgeCutoff);

// Cross edges from raw coordinates; used inside the docking loop where the
// ligand moves between layers.
CrossEdges build_cross_edges(const std::vector<Vec3>& ligand, const std::vector<Vec3>& protein,
                             double cutoff = kCrossEdgeCutoff);

ComplexGraph build_complex_graph(const ComplexRecord& rec,
                                 double protein_cutoff = kProteinEdgeCutoff,
                                 double cross_cutoff = kCrossEdgeCutoff);

SimpleGraph to_simple_graph(const LigandGraph& g);
SimpleGraph to_simple_graph(const ProteinGraph& g);

// Directed view of an undirected edge list: one entry per (center, neighbor)
// ordered pair, sorted by center. Weights follow the degree-normalized rule
// w_ik = deg(k) / sum_{k' in N(i)} deg(k'), or 1/|N(i)| in uniform mode.
struct DirectedEdges {
    std::vector<int> src, dst;
    std::vector<double> weight;
};

DirectedEdges directed_with_degree_weights(int n, const std::vector<std::pair<int, int>>& edges,
                                           const std::vector<int>& degree, bool uniform);

std::string dump_graph_json(const ComplexGraph& g);

} // namespace curvebind
