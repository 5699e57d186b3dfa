#pragma once

#include <string>
#include <vector>

#include "curvebind/complex.hpp"
#include "curvebind/graph.hpp"
#include "curvebind/tensor.hpp"

namespace curvebind {

// Fixed 52-slot per-atom layout:
//   element one-hot (18) | degree 0-6 (7) | formal charge -2..+2 (5) |
//   explicit valence 0-7 (8) | aromatic (1) | in-ring (1) |
//   h-count 0-4 (5) | chirality flags (2, reserved) |
//   bond-order histogram s/d/t/a (4) | bias 1.0 (1)
constexpr int kLigandFeatureWidth = 52;

// Fallback residue layout: amino-acid one-hot (20) + normalized hydropathy,
// charge at pH 7, polarity flag, normalized molecular weight, aromatic flag.
constexpr int kProteinFallbackWidth = 25;

constexpr int kEsmEmbeddingWidth = 1280;
constexpr int kLcfWidth = 5;

enum class ProteinFeatureMode { Precomputed1280, Fallback25 };

// Out-of-range attributes clamp to the boundary slot; clamps are counted so
// callers can log them.
Tensor ligand_base_features(const ComplexRecord& rec, const LigandGraph& graph,
                            int* clamped_count = nullptr);

Tensor protein_base_features(const ComplexRecord& rec, const EmbeddingTable* table,
                             ProteinFeatureMode mode);

// TSV override: atom_index then kLigandFeatureWidth values per line.
Tensor load_ligand_feature_override(std::istream& in, std::size_t n_atoms);

int amino_acid_index(const std::string& three_letter); // -1 when unknown

} // namespace curvebind
