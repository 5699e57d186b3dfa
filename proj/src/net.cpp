#include "curvebind/net.hpp"

#include <algorithm>
#include <cmath>

#include "curvebind/errors.hpp"

namespace curvebind {

std::vector<Vec3> coords_from_tensor(const Tensor& t) {
    std::vector<Vec3> out;
    out.reserve(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) out.push_back(t.row_vec3(i));
    return out;
}

StackGeom make_stack_geom(const LigandGraph& lg, const std::vector<std::pair<int, int>>& prot_edges,
                          const std::vector<int>& prot_degree, int n_prot, bool degree_weights,
                          double cross_cutoff) {
    StackGeom g;
    g.lig = directed_with_degree_weights(lg.n, lg.edges, lg.degree, !degree_weights);
    g.prot = directed_with_degree_weights(n_prot, prot_edges, prot_degree, !degree_weights);
    g.cross_cutoff = cross_cutoff;
    return g;
}

std::pair<VarId, VarId> independent_update(Tape& t, ParamVars& P, const std::string& prefix,
                                           VarId h, VarId x, const DirectedEdges& de,
                                           bool update_coords) {
    const std::size_t n = t.val(h).rows();
    if (de.src.empty()) return {h, x}; // no edges anywhere: nothing moves
    const VarId hn = t.layer_norm(h, P(prefix + "ln_ind.g"), P(prefix + "ln_ind.b"));

    // nodes with no neighbors stay untouched
    Tensor has_nbr(n, 1);
    for (int s : de.src) has_nbr(static_cast<std::size_t>(s), 0) = 1.0;

    const VarId hi = t.gather_rows(hn, de.src);
    const VarId hk = t.gather_rows(hn, de.dst);
    const VarId xi = t.gather_rows(x, de.src);
    const VarId xk = t.gather_rows(x, de.dst);
    const VarId diff = t.sub(xi, xk);
    const VarId d2 = t.scale(t.row_sum(t.mul(diff, diff)), kSquaredDistanceScale);

    // m_ik = phi_e(h_i, h_k, |x_i - x_k|^2)
    const VarId msg = mlp2(t, t.concat_cols({hi, hk, d2}), P(prefix + "msg.W1"),
                           P(prefix + "msg.b1"), P(prefix + "msg.W2"), P(prefix + "msg.b2"));

    const VarId agg = t.scatter_add_rows(msg, de.src, n);
    const VarId upd = mlp2(t, t.concat_cols({hn, agg}), P(prefix + "upd.W1"), P(prefix + "upd.b1"),
                           P(prefix + "upd.W2"), P(prefix + "upd.b2"));
    const VarId h_out = t.add(h, t.scale_rows(upd, t.constant(has_nbr)));

    if (!update_coords) return {h_out, x};

    // x_i += sum_k w_ik (x_i - x_k) phi_x(m_ik)
    const VarId gate = t.scale(t.tanh(mlp2(t, msg, P(prefix + "gate.W1"), P(prefix + "gate.b1"),
                                           P(prefix + "gate.W2"), P(prefix + "gate.b2"))),
                               kCoordGateBound);
    Tensor w(de.src.size(), 1);
    for (std::size_t e = 0; e < de.src.size(); ++e) w(e, 0) = de.weight[e];
    const VarId contrib = t.scale_rows(t.scale_rows(diff, gate), t.constant(std::move(w)));
    const VarId x_out = t.add(x, t.scatter_add_rows(contrib, de.src, n));
    return {h_out, x_out};
}

namespace {

// one attention direction: query side attends over the key/value side
VarId attention_direction(Tape& t, ParamVars& P, const std::string& base, VarId hq, VarId hkv,
                          VarId bias_heads /* (nq*nk) x H */, std::size_t nq, std::size_t nk,
                          int heads, int d_node) {
    const VarId q = affine(t, hq, P(base + "att.q.W"), P(base + "att.q.b"));
    const VarId k = affine(t, hkv, P(base + "att.k.W"), P(base + "att.k.b"));
    const VarId v = affine(t, hkv, P(base + "att.v.W"), P(base + "att.v.b"));
    const int c = d_node / heads;
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));
    std::vector<VarId> head_outs;
    for (int hh = 0; hh < heads; ++hh) {
        const std::size_t c0 = static_cast<std::size_t>(hh * c);
        const std::size_t c1 = static_cast<std::size_t>((hh + 1) * c);
        const VarId qh = t.slice_cols(q, c0, c1);
        const VarId kh = t.slice_cols(k, c0, c1);
        const VarId vh = t.slice_cols(v, c0, c1);
        VarId logits = t.scale(t.matmul_nt(qh, kh), inv_sqrt_c);
        const VarId bh = t.reshape(
            t.slice_cols(bias_heads, static_cast<std::size_t>(hh), static_cast<std::size_t>(hh + 1)),
            nq, nk);
        logits = t.add(logits, bh);
        const VarId att = t.softmax_rows(logits);
        head_outs.push_back(t.matmul(att, vh));
    }
    const VarId concat = heads == 1 ? head_outs[0] : t.concat_cols(head_outs);
    return affine(t, concat, P(base + "att.out.W"), P(base + "att.out.b"));
}

} // namespace

VarId opm_pair_embedding(Tape& t, ParamVars& P, const std::string& prefix, VarId h_l, VarId h_p) {
    const VarId a = affine(t, h_l, P(prefix + ".a.W"), P(prefix + ".a.b"));
    const VarId b = affine(t, h_p, P(prefix + ".b.W"), P(prefix + ".b.b"));
    return t.opm_combine(a, b, P(prefix + ".out.W"), P(prefix + ".out.b"));
}

CrossAttentionOut cross_attention_update(Tape& t, ParamVars& P, const std::string& layer_prefix,
                                         VarId h_l, VarId h_p, VarId z, std::size_t n_l,
                                         std::size_t n_p, int heads) {
    const int d = static_cast<int>(t.val(h_l).cols());
    const VarId hln = t.layer_norm(h_l, P(layer_prefix + "lig.ln_att.g"),
                                   P(layer_prefix + "lig.ln_att.b"));
    const VarId hpn = t.layer_norm(h_p, P(layer_prefix + "prot.ln_att.g"),
                                   P(layer_prefix + "prot.ln_att.b"));

    // pair bias per head, shared between directions (transposed for protein)
    const VarId bias = affine(t, z, P(layer_prefix + "att.bias.W"), P(layer_prefix + "att.bias.b"));

    const VarId lig_delta =
        attention_direction(t, P, layer_prefix, hln, hpn, bias, n_l, n_p, heads, d);
    CrossAttentionOut out;
    out.h_l = t.add(h_l, lig_delta);

    // protein view of the bias: rows indexed (j * n_l + i)
    std::vector<int> perm(n_l * n_p);
    for (std::size_t i = 0; i < n_l; ++i)
        for (std::size_t j = 0; j < n_p; ++j)
            perm[j * n_l + i] = static_cast<int>(i * n_p + j);
    const VarId bias_t = t.gather_rows(bias, std::move(perm));
    const VarId prot_delta =
        attention_direction(t, P, layer_prefix, hpn, hln, bias_t, n_p, n_l, heads, d);
    out.h_p = t.add(h_p, prot_delta);

    out.z = opm_pair_embedding(t, P, layer_prefix + "opm", out.h_l, out.h_p);
    return out;
}

std::pair<VarId, VarId> interface_update(Tape& t, ParamVars& P, const std::string& prefix,
                                         VarId h_self, VarId x_self, VarId h_other, VarId x_other,
                                         VarId z, const std::vector<std::pair<int, int>>& pairs,
                                         bool self_is_ligand, std::size_t n_p,
                                         bool update_coords) {
    if (pairs.empty()) return {h_self, x_self};
    const std::size_t n = t.val(h_self).rows();

    // sort by self node so segment softmax sees contiguous runs
    std::vector<std::pair<int, int>> es = pairs;
    std::sort(es.begin(), es.end());
    std::vector<int> self_idx, other_idx, pair_idx;
    self_idx.reserve(es.size());
    other_idx.reserve(es.size());
    pair_idx.reserve(es.size());
    for (auto [s, o] : es) {
        self_idx.push_back(s);
        other_idx.push_back(o);
        const int i = self_is_ligand ? s : o;
        const int j = self_is_ligand ? o : s;
        pair_idx.push_back(i * static_cast<int>(n_p) + j);
    }

    const VarId hs = t.layer_norm(h_self, P(prefix + "ln_ifc.g"), P(prefix + "ln_ifc.b"));
    const VarId q = mlp2(t, hs, P(prefix + "ifq.W1"), P(prefix + "ifq.b1"), P(prefix + "ifq.W2"),
                         P(prefix + "ifq.b2"));

    const VarId xi = t.gather_rows(x_self, self_idx);
    const VarId xj = t.gather_rows(x_other, other_idx);
    const VarId diff = t.sub(xj, xi);
    const VarId d2 = t.scale(t.row_sum(t.mul(diff, diff)), kSquaredDistanceScale);
    const VarId hj = t.gather_rows(h_other, other_idx);
    const VarId kin = t.concat_cols({d2, hj});

    const VarId kk = mlp2(t, kin, P(prefix + "ifk.W1"), P(prefix + "ifk.b1"), P(prefix + "ifk.W2"),
                          P(prefix + "ifk.b2"));
    const VarId vv = mlp2(t, kin, P(prefix + "ifv.W1"), P(prefix + "ifv.b1"), P(prefix + "ifv.W2"),
                          P(prefix + "ifv.b2"));

    const VarId zp = t.gather_rows(z, pair_idx);
    const VarId bb = mlp2(t, zp, P(prefix + "ifb.W1"), P(prefix + "ifb.b1"), P(prefix + "ifb.W2"),
                          P(prefix + "ifb.b2"));

    const VarId qe = t.gather_rows(q, self_idx);
    const VarId logits = t.add(t.row_sum(t.mul(qe, kk)), bb);
    const VarId alpha = t.segment_softmax(logits, self_idx, n);

    const VarId h_out = t.add(h_self, t.scatter_add_rows(t.scale_rows(vv, alpha), self_idx, n));
    if (!update_coords) return {h_out, x_self};

    const VarId gate = t.scale(t.tanh(mlp2(t, vv, P(prefix + "ifxv.W1"), P(prefix + "ifxv.b1"),
                                           P(prefix + "ifxv.W2"), P(prefix + "ifxv.b2"))),
                               kCoordGateBound);
    const VarId contrib = t.scale_rows(t.scale_rows(diff, gate), alpha);
    const VarId x_out = t.add(x_self, t.scatter_add_rows(contrib, self_idx, n));
    return {h_out, x_out};
}

GraphStateVars layer_forward(Tape& t, ParamVars& P, const std::string& layer_prefix,
                             GraphStateVars s, const StackGeom& geom,
                             const std::vector<std::pair<int, int>>& cross_pairs,
                             const ModelConfig& cfg) {
    const bool move_prot = !cfg.freeze_protein_coords;

    // 1. independent messaging within each molecule
    auto [hl1, xl1] =
        independent_update(t, P, layer_prefix + "lig.", s.h_l, s.x_l, geom.lig, true);
    auto [hp1, xp1] =
        independent_update(t, P, layer_prefix + "prot.", s.h_p, s.x_p, geom.prot, move_prot);

    // 2. cross-attention over the opposite molecule, then refresh z
    const CrossAttentionOut att =
        cross_attention_update(t, P, layer_prefix, hl1, hp1, s.z, s.n_l, s.n_p, cfg.heads);

    // 3. interface messaging over the cross edges
    std::vector<std::pair<int, int>> prot_pairs;
    prot_pairs.reserve(cross_pairs.size());
    for (auto [i, j] : cross_pairs) prot_pairs.push_back({j, i});

    auto [hl2, xl2] = interface_update(t, P, layer_prefix + "lig.", att.h_l, xl1, att.h_p, xp1,
                                       att.z, cross_pairs, true, s.n_p, true);
    auto [hp2, xp2] = interface_update(t, P, layer_prefix + "prot.", att.h_p, xp1, att.h_l, xl1,
                                       att.z, prot_pairs, false, s.n_p, move_prot);

    GraphStateVars out = s;
    out.h_l = hl2;
    out.h_p = hp2;
    out.x_l = xl2;
    out.x_p = xp2;
    out.z = att.z;
    return out;
}

GraphStateVars stack_forward(Tape& t, ParamVars& P, const std::string& stage, int layers,
                             GraphStateVars s, const StackGeom& geom, const ModelConfig& cfg,
                             CrossEdgeLog* log) {
    for (int l = 0; l < layers; ++l) {
        std::vector<std::pair<int, int>> pairs;
        if (log && log->replay) {
            if (log->cursor >= log->seq.size())
                throw ShapeError("cross-edge replay log exhausted");
            pairs = log->seq[log->cursor++];
        } else {
            pairs = build_cross_edges(coords_from_tensor(t.val(s.x_l)),
                                      coords_from_tensor(t.val(s.x_p)), geom.cross_cutoff)
                        .pairs;
            if (log) log->seq.push_back(pairs);
        }
        s = layer_forward(t, P, stage + ".l" + std::to_string(l) + ".", s, geom, pairs, cfg);
    }
    return s;
}

} // namespace curvebind
