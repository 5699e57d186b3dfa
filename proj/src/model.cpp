#include "curvebind/model.hpp"

#include <cmath>

#include "curvebind/errors.hpp"
#include "curvebind/rng.hpp"

namespace curvebind {

ComplexInstance prepare_instance(const ComplexRecord& rec, const EmbeddingTable* table,
                                 const ModelConfig& cfg, const Tensor* ligand_feature_override) {
    rec.validate();
    if (rec.ligand_atoms.empty()) throw ValidationError(rec.id + ": ligand has no atoms");
    if (rec.residues.empty()) throw ValidationError(rec.id + ": protein has no residues");

    ComplexInstance inst;
    inst.record = rec;
    inst.lig_graph = build_ligand_graph(rec);
    inst.prot_graph = build_protein_graph(rec, cfg.protein_cutoff);

    if (ligand_feature_override) {
        if (ligand_feature_override->rows() != rec.ligand_atoms.size() ||
            ligand_feature_override->cols() != static_cast<std::size_t>(kLigandFeatureWidth))
            throw ShapeError(rec.id + ": ligand feature override shape");
        inst.lig_base = *ligand_feature_override;
    } else {
        inst.lig_base = ligand_base_features(rec, inst.lig_graph);
    }
    inst.prot_base = protein_base_features(rec, table, cfg.protein_mode);

    // curvature is topological: computed once per static graph
    inst.lig_lcf = lcf_feature_matrix(graph_lcf(to_simple_graph(inst.lig_graph)));
    inst.prot_lcf = lcf_feature_matrix(graph_lcf(to_simple_graph(inst.prot_graph)));

    inst.labels = ground_truth_labels(rec, cfg.cross_cutoff);
    inst.true_pose = Tensor::from_vec3_rows([&] {
        std::vector<Vec3> v;
        for (const auto& a : rec.ligand_atoms) v.push_back(a.xyz);
        return v;
    }());
    std::vector<Vec3> scratch;
    inst.conformer = Tensor::from_vec3_rows(rec.conformer_or_pose(scratch));
    inst.prot_ca = Tensor::from_vec3_rows([&] {
        std::vector<Vec3> v;
        for (const auto& r : rec.residues) v.push_back(r.ca);
        return v;
    }());
    Vec3 c;
    for (const auto& r : rec.residues) c += r.ca;
    inst.protein_centroid = c * (1.0 / static_cast<double>(rec.residues.size()));
    return inst;
}

VarId assemble_node_features(Tape& t, VarId base, VarId lcf, VarId w, VarId b, bool use_lcf) {
    const Tensor& lv = t.val(lcf);
    const VarId lcf_in = use_lcf ? lcf : t.constant(Tensor(lv.rows(), lv.cols()));
    return affine(t, t.concat_cols({base, lcf_in}), w, b);
}

namespace {

// conformer placed with its centroid on the protein centroid; the pocket
// stage must not see the ligand's true position
Tensor pocket_stage_coords(const ComplexInstance& inst) {
    Tensor x = inst.conformer;
    double cen[3] = {0, 0, 0};
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < 3; ++j) cen[j] += x(i, j);
    const double off[3] = {inst.protein_centroid.x - cen[0] / static_cast<double>(x.rows()),
                           inst.protein_centroid.y - cen[1] / static_cast<double>(x.rows()),
                           inst.protein_centroid.z - cen[2] / static_cast<double>(x.rows())};
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < 3; ++j) x(i, j) += off[j];
    return x;
}

Tensor gumbel_noise_tensor(std::size_t n, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x67756d62656cull));
    Tensor noise(n, 1);
    for (std::size_t j = 0; j < n; ++j) noise(j, 0) = rng.gumbel();
    return noise;
}

} // namespace

PipelineResult run_pipeline(Tape& t, ParamVars& P, const ComplexInstance& inst,
                            const ModelConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    PipelineResult res;
    res.trainable = inst.labels.trainable;
    const std::size_t n_l = inst.n_l(), n_p = inst.n_p();

    // ---- encoder ----
    const VarId h_l0 = assemble_node_features(t, t.constant(inst.lig_base),
                                              t.constant(inst.lig_lcf), P("enc.lig_proj.W"),
                                              P("enc.lig_proj.b"), cfg.use_lcf);
    const VarId h_p0 = assemble_node_features(t, t.constant(inst.prot_base),
                                              t.constant(inst.prot_lcf), P("enc.prot_proj.W"),
                                              P("enc.prot_proj.b"), cfg.use_lcf);
    const VarId z0 = opm_pair_embedding(t, P, "enc.opm", h_l0, h_p0);

    // ---- pocket stage over the full protein ----
    GraphStateVars s;
    s.h_l = h_l0;
    s.h_p = h_p0;
    s.z = z0;
    s.n_l = n_l;
    s.n_p = n_p;
    s.x_l = t.constant(pocket_stage_coords(inst));
    s.x_p = t.constant(inst.prot_ca);

    const StackGeom pocket_geom =
        make_stack_geom(inst.lig_graph, inst.prot_graph.edges, inst.prot_graph.degree,
                        inst.prot_graph.n, cfg.degree_weights, cfg.cross_cutoff);
    s = stack_forward(t, P, "pocket", cfg.pocket_layers, s, pocket_geom, cfg, opts.cross_log);

    const VarId logits = classify_logits(t, P, s.h_p);
    res.probs = t.sigmoid(logits);

    Tensor noise;
    const Tensor* noise_ptr = nullptr;
    if (opts.training) {
        noise = gumbel_noise_tensor(n_p, opts.noise_seed);
        noise_ptr = &noise;
    }
    const VarId weights = gumbel_weights(t, logits, cfg.gumbel_tau, noise_ptr);
    res.center = pocket_center(t, weights, s.x_p);
    res.radius_raw = radius_head(t, P, s.h_l);
    res.radius_final = final_radius(t.val(res.radius_raw)[0], n_l, cfg.dynamic_radius,
                                    cfg.fixed_radius);

    const bool with_losses = opts.compute_losses && inst.labels.trainable;
    if (with_losses) {
        const double weight = cfg.balanced_focal
                                  ? static_cast<double>(n_p) /
                                        static_cast<double>(inst.labels.positives)
                                  : 1.0;
        const double gamma = cfg.balanced_focal ? cfg.focal_gamma : 0.0;
        res.cls_loss = focal_loss(t, res.probs, inst.labels.y, gamma, weight, cfg.prob_epsilon);
        Tensor tc(1, 3);
        tc(0, 0) = inst.labels.true_center.x;
        tc(0, 1) = inst.labels.true_center.y;
        tc(0, 2) = inst.labels.true_center.z;
        res.center_loss = huber_loss(t, res.center, t.constant(std::move(tc)), cfg.huber_delta);
        res.radius_loss = huber_loss(t, res.radius_raw,
                                     t.constant(Tensor::scalar(inst.labels.true_radius)),
                                     cfg.huber_delta);
        res.pocket_loss = pocket_loss(t, res.cls_loss, res.center_loss, res.radius_loss,
                                      cfg.alpha1);
    }
    if (opts.pocket_only) return res;

    // ---- docking stage over the selected pocket ----
    const bool use_true_center =
        opts.training && opts.epoch < opts.tp_epoch && inst.labels.trainable;
    Vec3 center_value = use_true_center
                            ? inst.labels.true_center
                            : Vec3{t.val(res.center)(0, 0), t.val(res.center)(0, 1),
                                   t.val(res.center)(0, 2)};
    res.pocket = opts.frozen_pocket
                     ? *opts.frozen_pocket
                     : select_pocket(inst.prot_ca, center_value, res.radius_final,
                                     cfg.pocket_fallback_k);

    // pocket subgraph with induced protein edges
    std::vector<int> inv(n_p, -1);
    for (std::size_t k = 0; k < res.pocket.size(); ++k) inv[res.pocket[k]] = static_cast<int>(k);
    std::vector<std::pair<int, int>> sub_edges;
    for (auto [a, b] : inst.prot_graph.edges)
        if (inv[a] >= 0 && inv[b] >= 0) sub_edges.push_back({inv[a], inv[b]});
    std::vector<int> sub_degree(res.pocket.size(), 0);
    for (auto [a, b] : sub_edges) {
        ++sub_degree[static_cast<std::size_t>(a)];
        ++sub_degree[static_cast<std::size_t>(b)];
    }

    GraphStateVars d;
    d.n_l = n_l;
    d.n_p = res.pocket.size();
    d.h_l = s.h_l;
    d.h_p = t.gather_rows(s.h_p, res.pocket);
    d.x_p = t.gather_rows(t.constant(inst.prot_ca), res.pocket);
    d.z = opm_pair_embedding(t, P, "dock.opm0", d.h_l, d.h_p);

    VarId center_used;
    if (use_true_center) {
        Tensor tc(1, 3);
        tc(0, 0) = inst.labels.true_center.x;
        tc(0, 1) = inst.labels.true_center.y;
        tc(0, 2) = inst.labels.true_center.z;
        center_used = t.constant(std::move(tc));
    } else {
        center_used = res.center;
    }
    d.x_l = init_pose(t, t.constant(inst.conformer), center_used);

    const StackGeom dock_geom = make_stack_geom(inst.lig_graph, sub_edges, sub_degree,
                                                static_cast<int>(res.pocket.size()),
                                                cfg.degree_weights, cfg.cross_cutoff);
    const RefineResult ref = refine(t, P, d, dock_geom, cfg, opts.trace, opts.cross_log);
    res.pred_coords = ref.state.x_l;
    res.trace = ref.trace;

    if (with_losses) {
        res.coord_loss = coord_loss(t, res.pred_coords, t.constant(inst.true_pose),
                                    cfg.huber_delta);
        // true distances between the reference pose and the pocket C-alphas
        Tensor d_true(n_l * res.pocket.size(), 1);
        for (std::size_t i = 0; i < n_l; ++i)
            for (std::size_t j = 0; j < res.pocket.size(); ++j)
                d_true(i * res.pocket.size() + j, 0) =
                    distance(inst.true_pose.row_vec3(i),
                             inst.prot_ca.row_vec3(static_cast<std::size_t>(res.pocket[j])));
        const VarId d_coords = pairwise_distances(t, res.pred_coords, ref.state.x_p);
        const VarId d_embed = distance_from_pairs(t, P, ref.state.z);
        res.dist_loss = distance_map_loss(t, t.constant(std::move(d_true)), d_coords, d_embed,
                                          cfg.gamma_d);
        res.docking_loss = docking_loss(t, res.coord_loss, res.dist_loss);
        res.total_loss = t.add(res.pocket_loss, res.docking_loss);
    }
    return res;
}

ComplexRecord make_synthetic_complex(std::uint64_t seed, const SyntheticSpec& spec) {
    Rng rng(Rng::mix(seed, 0x73796e7468ull));
    ComplexRecord rec;
    rec.id = "synth-" + std::to_string(seed);

    auto unit = [&rng]() {
        // uniform direction via normalized gaussian triple
        Vec3 v;
        double n = 0.0;
        do {
            v = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
            n = v.norm();
        } while (n < 1e-6);
        return v * (1.0 / n);
    };

    // global offset keeps nothing pinned at the origin
    const Vec3 base{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};

    // chain ligand, bond length ~1.5, recentred
    const char* elems[3] = {"C", "N", "O"};
    std::vector<Vec3> atoms;
    Vec3 cur{0, 0, 0};
    for (int i = 0; i < spec.ligand_atoms; ++i) {
        atoms.push_back(cur);
        cur += unit() * 1.5;
    }
    Vec3 cen{0, 0, 0};
    for (const auto& p : atoms) cen += p;
    cen = cen * (1.0 / static_cast<double>(atoms.size()));
    for (auto& p : atoms) p = p - cen + base;

    const bool ring = spec.ring_bond && spec.ligand_atoms >= 4;
    for (int i = 0; i < spec.ligand_atoms; ++i) {
        LigandAtom a;
        a.element = elems[rng.uniform_int(0, 2)];
        a.h_count = rng.uniform_int(0, 2);
        a.in_ring = ring;
        a.xyz = atoms[static_cast<std::size_t>(i)];
        rec.ligand_atoms.push_back(std::move(a));
    }
    for (int i = 0; i + 1 < spec.ligand_atoms; ++i)
        rec.ligand_bonds.push_back({i, i + 1, BondOrder::Single});
    if (ring) rec.ligand_bonds.push_back({0, spec.ligand_atoms - 1, BondOrder::Single});

    // pocket residues in antipodal pairs of equal radius: the shell mean
    // coincides with the ligand centroid, as in a ligand sitting inside its
    // site
    const char* codes[8] = {"ALA", "GLY", "LEU", "SER", "TRP", "HIS", "ASP", "LYS"};
    for (int j = 0; j < spec.pocket_residues; j += 2) {
        const Vec3 dir = unit();
        const double r = rng.uniform(spec.pocket_shell - 1.0, spec.pocket_shell + 1.0);
        Residue a;
        a.type = codes[rng.uniform_int(0, 7)];
        a.ca = base + dir * r;
        rec.residues.push_back(std::move(a));
        if (j + 1 < spec.pocket_residues) {
            Residue b;
            b.type = codes[rng.uniform_int(0, 7)];
            b.ca = base + dir * -r;
            rec.residues.push_back(std::move(b));
        }
    }
    for (int j = 0; j < spec.far_residues; ++j) {
        Residue r;
        r.type = codes[rng.uniform_int(0, 7)];
        r.ca = base + unit() * rng.uniform(spec.far_min, spec.far_max);
        rec.residues.push_back(std::move(r));
    }
    rec.validate();
    return rec;
}

} // namespace curvebind
