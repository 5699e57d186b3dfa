#pragma once

#include <string>
#include <utility>
#include <vector>

#include "curvebind/graph.hpp"
#include "curvebind/params.hpp"
#include "curvebind/tape.hpp"

namespace curvebind {

// Node embeddings, coordinates and the pair embedding flowing through the
// layer stack. z is flattened pairwise: row (i * n_p + j).
struct GraphStateVars {
    VarId h_l = kNoVar, h_p = kNoVar;
    VarId x_l = kNoVar, x_p = kNoVar;
    VarId z = kNoVar;
    std::size_t n_l = 0, n_p = 0;
};

// Static per-stack topology. Cross edges are rebuilt from coordinates before
// every layer, so only the within-molecule graphs live here.
struct StackGeom {
    DirectedEdges lig;
    DirectedEdges prot;
    double cross_cutoff = kCrossEdgeCutoff;
};

StackGeom make_stack_geom(const LigandGraph& lg, const std::vector<std::pair<int, int>>& prot_edges,
                          const std::vector<int>& prot_degree, int n_prot, bool degree_weights,
                          double cross_cutoff);

// Squared distances are divided by 10^2 (the cross cutoff squared) before
// entering any MLP, keeping activations O(1) at pocket scale.
constexpr double kSquaredDistanceScale = 0.01;

// Coordinate gates go through a bounded output (scale * tanh). The scale
// keeps per-layer displacements well under the 10 A cross-edge shell even
// when the gate saturates: the docking stack applies 32 recycled updates,
// and a pose that escapes the shell loses every interface force that could
// pull it back.
constexpr double kCoordGateBound = 0.25;

// Within-molecule update: messages from graph neighbors, additive
// feature update, degree-weighted coordinate update.
std::pair<VarId, VarId> independent_update(Tape& t, ParamVars& P, const std::string& prefix,
                                           VarId h, VarId x, const DirectedEdges& de,
                                           bool update_coords);

// Bidirectional cross-attention with pair bias, then the pair embedding is
// refreshed from the updated node embeddings.
struct CrossAttentionOut {
    VarId h_l, h_p, z;
};
CrossAttentionOut cross_attention_update(Tape& t, ParamVars& P, const std::string& layer_prefix,
                                         VarId h_l, VarId h_p, VarId z, std::size_t n_l,
                                         std::size_t n_p, int heads);

// Geometry-aware messaging over cross edges for one side. `pairs` holds
// (self node, other node); z rows are indexed i_lig * n_p + j_prot.
std::pair<VarId, VarId> interface_update(Tape& t, ParamVars& P, const std::string& prefix,
                                         VarId h_self, VarId x_self, VarId h_other, VarId x_other,
                                         VarId z, const std::vector<std::pair<int, int>>& pairs,
                                         bool self_is_ligand, std::size_t n_p,
                                         bool update_coords);

GraphStateVars layer_forward(Tape& t, ParamVars& P, const std::string& layer_prefix,
                             GraphStateVars s, const StackGeom& geom,
                             const std::vector<std::pair<int, int>>& cross_pairs,
                             const ModelConfig& cfg);

// Records (or replays) the cross-edge sets chosen before each layer
// application. Replay pins the discrete structure so finite-difference
// checks probe the smooth restriction of the loss.
struct CrossEdgeLog {
    std::vector<std::vector<std::pair<int, int>>> seq;
    std::size_t cursor = 0;
    bool replay = false;
};

// Applies `layers` layers under `stage` ("pocket" or "dock"); cross edges are
// rebuilt from current coordinates before each layer.
GraphStateVars stack_forward(Tape& t, ParamVars& P, const std::string& stage, int layers,
                             GraphStateVars s, const StackGeom& geom, const ModelConfig& cfg,
                             CrossEdgeLog* log = nullptr);

// z_ij = Linear(Linear(h_i) (x) Linear(h_j)) with the named parameter block.
VarId opm_pair_embedding(Tape& t, ParamVars& P, const std::string& prefix, VarId h_l, VarId h_p);

std::vector<Vec3> coords_from_tensor(const Tensor& t);

} // namespace curvebind
