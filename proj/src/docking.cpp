#include "curvebind/docking.hpp"

#include <string>

#include "curvebind/errors.hpp"

namespace curvebind {

VarId init_pose(Tape& t, VarId conformer, VarId center) {
    const Tensor& c = t.val(conformer);
    if (c.cols() != 3 || t.val(center).rows() != 1 || t.val(center).cols() != 3)
        throw ShapeError("init_pose: shapes");
    Tensor centroid(1, 3);
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < 3; ++j) centroid(0, j) += c(i, j);
    for (std::size_t j = 0; j < 3; ++j) centroid(0, j) /= static_cast<double>(c.rows());
    const VarId offset = t.sub(center, t.constant(std::move(centroid)));
    return t.add_rowvec(conformer, offset);
}

RefineResult refine(Tape& t, ParamVars& P, GraphStateVars s, const StackGeom& geom,
                    const ModelConfig& cfg, bool want_trace, CrossEdgeLog* log) {
    RefineResult out;
    for (int it = 0; it < cfg.refine_iterations; ++it) {
        s = stack_forward(t, P, "dock", cfg.dock_layers, s, geom, cfg, log);
        const Tensor& x = t.val(s.x_l);
        const double mx = x.max_abs();
        if (!x.all_finite() || mx > cfg.divergence_guard)
            throw NumericError("docking diverged at iteration " + std::to_string(it) +
                               ": max |coord| = " + std::to_string(mx));
        if (want_trace) out.trace.push_back(x);
    }
    out.state = s;
    return out;
}

VarId coord_loss(Tape& t, VarId pred, VarId truth, double delta) {
    check_same_shape(t.val(pred), t.val(truth), "coord_loss");
    return t.mean_all(t.huber_rows(t.sub(pred, truth), delta));
}

VarId distance_map_loss(Tape& t, VarId d_true, VarId d_coords, VarId d_embed, double gamma_d) {
    check_same_shape(t.val(d_true), t.val(d_coords), "distance_map_loss");
    check_same_shape(t.val(d_true), t.val(d_embed), "distance_map_loss");
    const double inv = 1.0 / static_cast<double>(t.val(d_true).size());
    const VarId e1 = t.sub(d_true, d_coords);
    const VarId e2 = t.sub(d_true, d_embed);
    const VarId e3 = t.sub(d_coords, d_embed);
    VarId acc = t.add(t.sum_all(t.mul(e1, e1)), t.sum_all(t.mul(e2, e2)));
    if (gamma_d != 0.0) acc = t.add(acc, t.scale(t.sum_all(t.mul(e3, e3)), gamma_d));
    return t.scale(acc, inv);
}

VarId docking_loss(Tape& t, VarId coord_term, VarId dist_term) {
    return t.add(coord_term, dist_term);
}

VarId pairwise_distances(Tape& t, VarId lig_coords, VarId pocket_coords) {
    const std::size_t nl = t.val(lig_coords).rows();
    const std::size_t np = t.val(pocket_coords).rows();
    std::vector<int> li(nl * np), pj(nl * np);
    for (std::size_t i = 0; i < nl; ++i)
        for (std::size_t j = 0; j < np; ++j) {
            li[i * np + j] = static_cast<int>(i);
            pj[i * np + j] = static_cast<int>(j);
        }
    const VarId diff = t.sub(t.gather_rows(lig_coords, std::move(li)),
                             t.gather_rows(pocket_coords, std::move(pj)));
    return t.norm_rows(diff);
}

VarId distance_from_pairs(Tape& t, ParamVars& P, VarId z) {
    const VarId zn = t.scale(t.layer_norm(z, P("dock.dmap_ln.g"), P("dock.dmap_ln.b")),
                             kHeadInputScale);
    return t.softplus(mlp2(t, zn, P("dock.dmap.W1"), P("dock.dmap.b1"), P("dock.dmap.W2"),
                           P("dock.dmap.b2")));
}

} // namespace curvebind
