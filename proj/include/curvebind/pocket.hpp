#pragma once

#include <vector>

#include "curvebind/complex.hpp"
#include "curvebind/graph.hpp"
#include "curvebind/params.hpp"
#include "curvebind/tape.hpp"

namespace curvebind {

struct PocketLabels {
    std::vector<int> y;      // 0/1 per residue
    Vec3 true_center;        // mean C-alpha of positive residues
    double true_radius = 0;  // max center-to-ligand-atom distance
    int positives = 0;
    bool trainable = false;  // at least one positive residue
};

// y_j = 1 iff residue j's C-alpha lies strictly within `cutoff` of any
// ligand atom of the reference pose (same rule as the cross-edge cutoff).
PocketLabels ground_truth_labels(const ComplexRecord& rec, double cutoff = kCrossEdgeCutoff);

// --- tape-level building blocks, shared by the pipeline and the tests ---

// affine head on per-residue embeddings -> logits [n x 1]
VarId classify_logits(Tape& t, ParamVars& P, VarId h_p);

// Balanced focal loss for one complex: weight * -sum_j [ y (1-p)^g log p +
// (1-y) p^g log(1-p) ]. Probabilities are clamped to [eps, 1-eps] first.
VarId focal_loss(Tape& t, VarId probs, const std::vector<int>& y, double gamma, double weight,
                 double eps = 1e-7);

// softmax((logits + gumbel_noise) / tau); pass noise = nullptr at inference
// (plain softmax of the logits, no temperature).
VarId gumbel_weights(Tape& t, VarId logits, double tau, const Tensor* noise);

// normalized probability-weighted mean of C-alpha coordinates -> [1 x 3]
VarId pocket_center(Tape& t, VarId weights, VarId ca_coords);

// Huber of the euclidean error between two equally-shaped tensors -> scalar
VarId huber_loss(Tape& t, VarId pred, VarId target, double delta);

// plain-value Huber on an error magnitude, for oracles and reports
double huber_value(double error_norm, double delta);

// r_hat = phi_r(sum_i h_i); returns the raw radius var. The final radius is
// r_hat + sqrt(n_l) (or the fixed ablation radius) and is a plain value.
VarId radius_head(Tape& t, ParamVars& P, VarId h_l);
double final_radius(double radius_raw, std::size_t n_ligand_atoms, bool dynamic_radius,
                    double fixed_radius);

// L_pocket = L_cls + L_cen + alpha1 * L_r
VarId pocket_loss(Tape& t, VarId cls, VarId cen, VarId rad, double alpha1);

// residues with |ca - center| <= radius; falls back to the k nearest when
// the sphere is empty
std::vector<int> select_pocket(const Tensor& ca_coords, const Vec3& center, double radius,
                               int fallback_k);

} // namespace curvebind
