#pragma once

#include <vector>

#include "curvebind/net.hpp"
#include "curvebind/params.hpp"
#include "curvebind/tape.hpp"

namespace curvebind {

// Rigidly translate the conformer so its centroid sits at `center` [1 x 3].
// No rotation is applied; gradients flow into the center.
VarId init_pose(Tape& t, VarId conformer, VarId center);

struct RefineResult {
    GraphStateVars state;
    std::vector<Tensor> trace; // coordinates after each iteration
};

// M2-layer stack applied end-to-end and recycled `iterations` times with
// shared parameters; cross edges refresh from the moving coordinates before
// every layer. Aborts with NumericError when any coordinate exceeds the
// divergence guard.
RefineResult refine(Tape& t, ParamVars& P, GraphStateVars s, const StackGeom& geom,
                    const ModelConfig& cfg, bool want_trace = false,
                    CrossEdgeLog* log = nullptr);

// mean over atoms of Huber applied to the per-atom euclidean error
VarId coord_loss(Tape& t, VarId pred, VarId truth, double delta);

// (1/(nl*np)) [ sum (D-Dt)^2 + sum (D-Dh)^2 + gamma_d sum (Dt-Dh)^2 ]
VarId distance_map_loss(Tape& t, VarId d_true, VarId d_coords, VarId d_embed, double gamma_d);

VarId docking_loss(Tape& t, VarId coord_term, VarId dist_term);

// pairwise distances between pred ligand rows and pocket C-alpha rows,
// flattened to [(n_l * n_p) x 1] in row-major pair order
VarId pairwise_distances(Tape& t, VarId lig_coords, VarId pocket_coords);

// distance decoded from the pair embedding: softplus(MLP(z)) >= 0
VarId distance_from_pairs(Tape& t, ParamVars& P, VarId z);

} // namespace curvebind
