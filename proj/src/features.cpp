#include "curvebind/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

#include "curvebind/errors.hpp"

namespace curvebind {

namespace {

const std::array<const char*, 18>& element_slots() {
    static const std::array<const char*, 18> e = {"C",  "N",  "O",  "S",  "P",  "F",
                                                  "Cl", "Br", "I",  "B",  "Si", "Se",
                                                  "As", "Fe", "Zn", "Mg", "Ca", "other"};
    return e;
}

int element_slot(const std::string& sym) {
    const auto& slots = element_slots();
    for (std::size_t k = 0; k + 1 < slots.size(); ++k)
        if (sym == slots[k]) return static_cast<int>(k);
    return static_cast<int>(slots.size()) - 1; // "other"
}

const std::array<const char*, 20>& aa_codes() {
    static const std::array<const char*, 20> a = {"ALA", "ARG", "ASN", "ASP", "CYS",
                                                  "GLN", "GLU", "GLY", "HIS", "ILE",
                                                  "LEU", "LYS", "MET", "PHE", "PRO",
                                                  "SER", "THR", "TRP", "TYR", "VAL"};
    return a;
}

struct AaProps {
    double hydropathy; // Kyte-Doolittle
    double charge;     // net charge at pH 7
    bool polar;
    double mw; // residue molecular weight
    bool aromatic;
};

const std::map<std::string, AaProps>& aa_props() {
    static const std::map<std::string, AaProps> p = {
        {"ALA", {1.8, 0, false, 89.09, false}},   {"ARG", {-4.5, 1, true, 174.20, false}},
        {"ASN", {-3.5, 0, true, 132.12, false}},  {"ASP", {-3.5, -1, true, 133.10, false}},
        {"CYS", {2.5, 0, false, 121.16, false}},  {"GLN", {-3.5, 0, true, 146.15, false}},
        {"GLU", {-3.5, -1, true, 147.13, false}}, {"GLY", {-0.4, 0, false, 75.07, false}},
        {"HIS", {-3.2, 0.1, true, 155.16, true}}, {"ILE", {4.5, 0, false, 131.17, false}},
        {"LEU", {3.8, 0, false, 131.17, false}},  {"LYS", {-3.9, 1, true, 146.19, false}},
        {"MET", {1.9, 0, false, 149.21, false}},  {"PHE", {2.8, 0, false, 165.19, true}},
        {"PRO", {-1.6, 0, false, 115.13, false}}, {"SER", {-0.8, 0, true, 105.09, false}},
        {"THR", {-0.7, 0, true, 119.12, false}},  {"TRP", {-0.9, 0, false, 204.23, true}},
        {"TYR", {-1.3, 0, true, 181.19, true}},   {"VAL", {4.2, 0, false, 117.15, false}},
    };
    return p;
}

int clamp_slot(int v, int lo, int hi, int* clamped) {
    if (v < lo || v > hi) {
        if (clamped) ++*clamped;
        return std::min(hi, std::max(lo, v));
    }
    return v;
}

} // namespace

int amino_acid_index(const std::string& three_letter) {
    const auto& codes = aa_codes();
    for (std::size_t k = 0; k < codes.size(); ++k)
        if (three_letter == codes[k]) return static_cast<int>(k);
    return -1;
}

Tensor ligand_base_features(const ComplexRecord& rec, const LigandGraph& graph,
                            int* clamped_count) {
    if (static_cast<int>(rec.ligand_atoms.size()) != graph.n)
        throw ShapeError("ligand_base_features: record/graph atom count mismatch");
    Tensor out(rec.ligand_atoms.size(), kLigandFeatureWidth);

    // per-atom bond-order histogram
    std::vector<std::array<double, 4>> bond_hist(rec.ligand_atoms.size(), {0, 0, 0, 0});
    std::vector<double> valence(rec.ligand_atoms.size(), 0.0);
    for (const auto& b : rec.ligand_bonds) {
        int slot = 0;
        double order = 1.0;
        switch (b.order) {
            case BondOrder::Single: slot = 0; order = 1.0; break;
            case BondOrder::Double: slot = 1; order = 2.0; break;
            case BondOrder::Triple: slot = 2; order = 3.0; break;
            case BondOrder::Aromatic: slot = 3; order = 1.5; break;
        }
        bond_hist[static_cast<std::size_t>(b.i)][static_cast<std::size_t>(slot)] += 1.0;
        bond_hist[static_cast<std::size_t>(b.j)][static_cast<std::size_t>(slot)] += 1.0;
        valence[static_cast<std::size_t>(b.i)] += order;
        valence[static_cast<std::size_t>(b.j)] += order;
    }

    for (std::size_t i = 0; i < rec.ligand_atoms.size(); ++i) {
        const auto& a = rec.ligand_atoms[i];
        std::size_t off = 0;
        out(i, off + static_cast<std::size_t>(element_slot(a.element))) = 1.0;
        off += 18;
        const int deg = clamp_slot(graph.degree[i], 0, 6, clamped_count);
        out(i, off + static_cast<std::size_t>(deg)) = 1.0;
        off += 7;
        const int charge = clamp_slot(a.formal_charge, -2, 2, clamped_count);
        out(i, off + static_cast<std::size_t>(charge + 2)) = 1.0;
        off += 5;
        const int val = clamp_slot(
            static_cast<int>(std::lround(valence[i] + static_cast<double>(a.h_count))), 0, 7,
            clamped_count);
        out(i, off + static_cast<std::size_t>(val)) = 1.0;
        off += 8;
        out(i, off++) = a.aromatic ? 1.0 : 0.0;
        out(i, off++) = a.in_ring ? 1.0 : 0.0;
        const int hc = clamp_slot(a.h_count, 0, 4, clamped_count);
        out(i, off + static_cast<std::size_t>(hc)) = 1.0;
        off += 5;
        off += 2; // chirality flags: reserved, records carry no chirality
        for (std::size_t k = 0; k < 4; ++k) out(i, off + k) = bond_hist[i][k];
        off += 4;
        out(i, off++) = 1.0; // bias
    }
    return out;
}

Tensor protein_base_features(const ComplexRecord& rec, const EmbeddingTable* table,
                             ProteinFeatureMode mode) {
    if (mode == ProteinFeatureMode::Precomputed1280) {
        if (!table) throw MissingEmbeddingError(rec.id + ": precomputed mode needs a table");
        if (!rec.embedding_key)
            throw MissingEmbeddingError(rec.id + ": record has no embedding_key");
        const Tensor& rows = table->lookup(*rec.embedding_key);
        if (rows.rows() != rec.residues.size())
            throw ShapeError(rec.id + ": embedding rows (" + std::to_string(rows.rows()) +
                             ") do not match residue count (" +
                             std::to_string(rec.residues.size()) + ")");
        return rows;
    }

    Tensor out(rec.residues.size(), kProteinFallbackWidth);
    for (std::size_t i = 0; i < rec.residues.size(); ++i) {
        const std::string& code = rec.residues[i].type;
        const int idx = amino_acid_index(code);
        if (idx >= 0) out(i, static_cast<std::size_t>(idx)) = 1.0;
        auto it = aa_props().find(code);
        double hydro = 0.5, charge = 0.5, polar = 0.0, mw = 0.5, arom = 0.0;
        if (it != aa_props().end()) {
            // min-max constants: hydropathy [-4.5, 4.5], mw [GLY 75.07, TRP 204.23]
            hydro = (it->second.hydropathy + 4.5) / 9.0;
            charge = (it->second.charge + 1.0) / 2.0;
            polar = it->second.polar ? 1.0 : 0.0;
            mw = (it->second.mw - 75.07) / (204.23 - 75.07);
            arom = it->second.aromatic ? 1.0 : 0.0;
        }
        out(i, 20) = hydro;
        out(i, 21) = charge;
        out(i, 22) = polar;
        out(i, 23) = mw;
        out(i, 24) = arom;
    }
    return out;
}

Tensor load_ligand_feature_override(std::istream& in, std::size_t n_atoms) {
    Tensor out(n_atoms, kLigandFeatureWidth);
    std::vector<char> seen(n_atoms, 0);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int idx = -1;
        if (!(ss >> idx) || idx < 0 || static_cast<std::size_t>(idx) >= n_atoms)
            throw ParseError("feature override line " + std::to_string(lineno) +
                             ": bad atom index");
        for (int j = 0; j < kLigandFeatureWidth; ++j) {
            double v;
            if (!(ss >> v))
                throw ParseError("feature override line " + std::to_string(lineno) +
                                 ": expected " + std::to_string(kLigandFeatureWidth) + " values");
            out(static_cast<std::size_t>(idx), static_cast<std::size_t>(j)) = v;
        }
        seen[static_cast<std::size_t>(idx)] = 1;
    }
    for (std::size_t i = 0; i < n_atoms; ++i)
        if (!seen[i])
            throw ParseError("feature override: atom " + std::to_string(i) + " missing");
    return out;
}

} // namespace curvebind
