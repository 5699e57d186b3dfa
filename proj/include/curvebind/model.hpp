#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curvebind/complex.hpp"
#include "curvebind/docking.hpp"
#include "curvebind/features.hpp"
#include "curvebind/graph.hpp"
#include "curvebind/net.hpp"
#include "curvebind/params.hpp"
#include "curvebind/pocket.hpp"

namespace curvebind {

// A complex with everything the forward pass needs, precomputed once:
// graphs, curvature features, base features, labels, coordinate tensors.
struct ComplexInstance {
    ComplexRecord record;
    LigandGraph lig_graph;
    ProteinGraph prot_graph;
    Tensor lig_base;   // n_l x 52
    Tensor prot_base;  // n_p x (1280 | 25)
    Tensor lig_lcf;    // n_l x 5
    Tensor prot_lcf;   // n_p x 5
    PocketLabels labels;
    Tensor conformer;  // n_l x 3 docking input geometry
    Tensor true_pose;  // n_l x 3 reference pose
    Tensor prot_ca;    // n_p x 3
    Vec3 protein_centroid;

    std::size_t n_l() const { return record.ligand_atoms.size(); }
    std::size_t n_p() const { return record.residues.size(); }
};

ComplexInstance prepare_instance(const ComplexRecord& rec, const EmbeddingTable* table,
                                 const ModelConfig& cfg,
                                 const Tensor* ligand_feature_override = nullptr);

struct RunOptions {
    bool training = false;          // gumbel noise + curriculum center
    int epoch = 0;
    int tp_epoch = 0;               // epoch < tp_epoch: docking uses the true center
    std::uint64_t noise_seed = 0;   // per-complex stream for gumbel noise
    bool compute_losses = true;
    bool pocket_only = false;       // stop after the pocket stage
    bool trace = false;             // keep per-iteration coordinates

    // pin the discrete structure (gradient verification)
    CrossEdgeLog* cross_log = nullptr;
    const std::vector<int>* frozen_pocket = nullptr;
};

struct PipelineResult {
    // pocket stage
    VarId probs = kNoVar;
    VarId center = kNoVar;       // [1 x 3]
    VarId radius_raw = kNoVar;   // [1 x 1]
    double radius_final = 0.0;
    std::vector<int> pocket;     // selected residue ids
    VarId cls_loss = kNoVar, center_loss = kNoVar, radius_loss = kNoVar, pocket_loss = kNoVar;

    // docking stage
    VarId pred_coords = kNoVar;  // [n_l x 3]
    VarId coord_loss = kNoVar, dist_loss = kNoVar, docking_loss = kNoVar, total_loss = kNoVar;
    std::vector<Tensor> trace;

    bool trainable = false; // labels carried at least one pocket residue
};

PipelineResult run_pipeline(Tape& t, ParamVars& P, const ComplexInstance& inst,
                            const ModelConfig& cfg, const RunOptions& opts);

// Encoder entry: concat(base, lcf-or-zero) -> affine projection to d_node.
VarId assemble_node_features(Tape& t, VarId base, VarId lcf, VarId w, VarId b, bool use_lcf);

// --- synthetic micro-complexes (tests, gradcheck, overfit experiments) ---

struct SyntheticSpec {
    int pocket_residues = 8;
    int far_residues = 4;
    int ligand_atoms = 5;
    double pocket_shell = 6.0;
    double far_min = 20.0;
    double far_max = 32.0;
    bool ring_bond = true;
};

ComplexRecord make_synthetic_complex(std::uint64_t seed, const SyntheticSpec& spec = {});

} // namespace curvebind
