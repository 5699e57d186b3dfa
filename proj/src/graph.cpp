#include "curvebind/graph.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "curvebind/errors.hpp"

namespace curvebind {

LigandGraph build_ligand_graph(const ComplexRecord& rec) {
    rec.validate();
    LigandGraph g;
    g.n = static_cast<int>(rec.ligand_atoms.size());
    g.coords.reserve(rec.ligand_atoms.size());
    for (const auto& a : rec.ligand_atoms) g.coords.push_back(a.xyz);
    g.degree.assign(static_cast<std::size_t>(g.n), 0);
    for (const auto& b : rec.ligand_bonds) {
        const auto e = std::minmax(b.i, b.j);
        g.edges.push_back({e.first, e.second});
        ++g.degree[static_cast<std::size_t>(b.i)];
        ++g.degree[static_cast<std::size_t>(b.j)];
    }
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

ProteinGraph build_protein_graph(const ComplexRecord& rec, double cutoff) {
    ProteinGraph g;
    g.n = static_cast<int>(rec.residues.size());
    g.coords.reserve(rec.residues.size());
    for (const auto& r : rec.residues) g.coords.push_back(r.ca);
    g.degree.assign(static_cast<std::size_t>(g.n), 0);
    const double c2 = cutoff * cutoff;
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j)
            if (distance2(g.coords[static_cast<std::size_t>(i)],
                          g.coords[static_cast<std::size_t>(j)]) <= c2) {
                g.edges.push_back({i, j});
                ++g.degree[static_cast<std::size_t>(i)];
                ++g.degree[static_cast<std::size_t>(j)];
            }
    return g;
}

CrossEdges build_cross_edges(const std::vector<Vec3>& ligand, const std::vector<Vec3>& protein,
                             double cutoff) {
    CrossEdges ce;
    const double c2 = cutoff * cutoff;
    for (std::size_t i = 0; i < ligand.size(); ++i)
        for (std::size_t j = 0; j < protein.size(); ++j)
            if (distance2(ligand[i], protein[j]) < c2)
                ce.pairs.push_back({static_cast<int>(i), static_cast<int>(j)});
    return ce;
}

CrossEdges build_cross_edges(const ComplexRecord& rec, double cutoff) {
    std::vector<Vec3> lig, prot;
    for (const auto& a : rec.ligand_atoms) lig.push_back(a.xyz);
    for (const auto& r : rec.residues) prot.push_back(r.ca);
    return build_cross_edges(lig, prot, cutoff);
}

ComplexGraph build_complex_graph(const ComplexRecord& rec, double protein_cutoff,
                                 double cross_cutoff) {
    ComplexGraph g;
    g.ligand = build_ligand_graph(rec);
    g.protein = build_protein_graph(rec, protein_cutoff);
    g.cross = build_cross_edges(rec, cross_cutoff);
    return g;
}

SimpleGraph to_simple_graph(const LigandGraph& g) { return SimpleGraph::from_edges(g.n, g.edges); }
SimpleGraph to_simple_graph(const ProteinGraph& g) { return SimpleGraph::from_edges(g.n, g.edges); }

DirectedEdges directed_with_degree_weights(int n, const std::vector<std::pair<int, int>>& edges,
                                           const std::vector<int>& degree, bool uniform) {
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
    for (auto [a, b] : edges) {
        nbrs[static_cast<std::size_t>(a)].push_back(b);
        nbrs[static_cast<std::size_t>(b)].push_back(a);
    }
    DirectedEdges de;
    for (int i = 0; i < n; ++i) {
        auto& nb = nbrs[static_cast<std::size_t>(i)];
        std::sort(nb.begin(), nb.end());
        double denom = 0.0;
        for (int k : nb)
            denom += uniform ? 1.0 : static_cast<double>(degree[static_cast<std::size_t>(k)]);
        for (int k : nb) {
            de.src.push_back(i);
            de.dst.push_back(k);
            const double num =
                uniform ? 1.0 : static_cast<double>(degree[static_cast<std::size_t>(k)]);
            de.weight.push_back(denom > 0.0 ? num / denom : 0.0);
        }
    }
    return de;
}

std::string dump_graph_json(const ComplexGraph& g) {
    nlohmann::json doc;
    auto fill = [](nlohmann::json& side, int n, const std::vector<Vec3>& coords,
                   const std::vector<std::pair<int, int>>& edges, const std::vector<int>& degree) {
        side["n"] = n;
        side["coords"] = nlohmann::json::array();
        for (const auto& p : coords) side["coords"].push_back({p.x, p.y, p.z});
        side["edges"] = nlohmann::json::array();
        for (auto [a, b] : edges) side["edges"].push_back({a, b});
        side["degree"] = degree;
    };
    fill(doc["ligand"], g.ligand.n, g.ligand.coords, g.ligand.edges, g.ligand.degree);
    fill(doc["protein"], g.protein.n, g.protein.coords, g.protein.edges, g.protein.degree);
    doc["cross"] = nlohmann::json::array();
    for (auto [i, j] : g.cross.pairs) doc["cross"].push_back({i, j});
    return doc.dump(2);
}

} // namespace curvebind
