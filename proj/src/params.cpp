#include "curvebind/params.hpp"

#include <cmath>

#include "curvebind/errors.hpp"
#include "curvebind/rng.hpp"

namespace curvebind {

void ModelConfig::validate() const {
    if (d_node < 1 || d_pair < 1 || d_opm < 1) throw ValidationError("config: widths must be >= 1");
    if (heads < 1 || d_node % heads != 0)
        throw ValidationError("config: heads must divide d_node");
    if (pocket_layers < 1 || dock_layers < 1 || refine_iterations < 1)
        throw ValidationError("config: layer/iteration counts must be >= 1");
    if (gumbel_tau <= 0.0) throw ValidationError("config: gumbel_tau must be > 0");
    if (huber_delta <= 0.0) throw ValidationError("config: huber_delta must be > 0");
    if (protein_cutoff <= 0.0 || cross_cutoff <= 0.0)
        throw ValidationError("config: cutoffs must be > 0");
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["d_node"] = d_node;
    j["d_pair"] = d_pair;
    j["d_opm"] = d_opm;
    j["heads"] = heads;
    j["pocket_layers"] = pocket_layers;
    j["dock_layers"] = dock_layers;
    j["refine_iterations"] = refine_iterations;
    j["protein_mode"] =
        protein_mode == ProteinFeatureMode::Precomputed1280 ? "precomputed-1280" : "fallback-25";
    j["use_lcf"] = use_lcf;
    j["degree_weights"] = degree_weights;
    j["dynamic_radius"] = dynamic_radius;
    j["balanced_focal"] = balanced_focal;
    j["freeze_protein_coords"] = freeze_protein_coords;
    j["gumbel_tau"] = gumbel_tau;
    j["huber_delta"] = huber_delta;
    j["focal_gamma"] = focal_gamma;
    j["gamma_d"] = gamma_d;
    j["alpha1"] = alpha1;
    j["fixed_radius"] = fixed_radius;
    j["pocket_fallback_k"] = pocket_fallback_k;
    j["protein_cutoff"] = protein_cutoff;
    j["cross_cutoff"] = cross_cutoff;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_node = j.value("d_node", c.d_node);
    c.d_pair = j.value("d_pair", c.d_pair);
    c.d_opm = j.value("d_opm", c.d_opm);
    c.heads = j.value("heads", c.heads);
    c.pocket_layers = j.value("pocket_layers", c.pocket_layers);
    c.dock_layers = j.value("dock_layers", c.dock_layers);
    c.refine_iterations = j.value("refine_iterations", c.refine_iterations);
    const std::string mode = j.value("protein_mode", "fallback-25");
    if (mode == "precomputed-1280")
        c.protein_mode = ProteinFeatureMode::Precomputed1280;
    else if (mode == "fallback-25")
        c.protein_mode = ProteinFeatureMode::Fallback25;
    else
        throw ParseError("config: unknown protein_mode '" + mode + "'");
    c.use_lcf = j.value("use_lcf", c.use_lcf);
    c.degree_weights = j.value("degree_weights", c.degree_weights);
    c.dynamic_radius = j.value("dynamic_radius", c.dynamic_radius);
    c.balanced_focal = j.value("balanced_focal", c.balanced_focal);
    c.freeze_protein_coords = j.value("freeze_protein_coords", c.freeze_protein_coords);
    c.gumbel_tau = j.value("gumbel_tau", c.gumbel_tau);
    c.huber_delta = j.value("huber_delta", c.huber_delta);
    c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
    c.gamma_d = j.value("gamma_d", c.gamma_d);
    c.alpha1 = j.value("alpha1", c.alpha1);
    c.fixed_radius = j.value("fixed_radius", c.fixed_radius);
    c.pocket_fallback_k = j.value("pocket_fallback_k", c.pocket_fallback_k);
    c.protein_cutoff = j.value("protein_cutoff", c.protein_cutoff);
    c.cross_cutoff = j.value("cross_cutoff", c.cross_cutoff);
    c.validate();
    return c;
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ShapeError("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ShapeError("unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& [k, t] : tensors) n += t.size();
    return n;
}

namespace {

using Init = ParamShape::Init;

void add(std::vector<ParamShape>& v, const std::string& name, std::size_t r, std::size_t c,
         Init init = Init::Xavier, double const_value = 0.0) {
    v.push_back({name, r, c, init, const_value});
}

// two affine layers, hidden width = input width
void add_mlp(std::vector<ParamShape>& v, const std::string& p, std::size_t in, std::size_t out,
             bool zero_out = false) {
    add(v, p + ".W1", in, in);
    add(v, p + ".b1", 1, in, Init::Zero);
    add(v, p + ".W2", in, out, zero_out ? Init::Zero : Init::Xavier);
    add(v, p + ".b2", 1, out, Init::Zero);
}

void add_ln(std::vector<ParamShape>& v, const std::string& p, std::size_t d) {
    add(v, p + ".g", 1, d, Init::One);
    add(v, p + ".b", 1, d, Init::Zero);
}

void add_opm(std::vector<ParamShape>& v, const std::string& p, std::size_t d, std::size_t k,
             std::size_t dp) {
    add(v, p + ".a.W", d, k);
    add(v, p + ".a.b", 1, k, Init::Zero);
    add(v, p + ".b.W", d, k);
    add(v, p + ".b.b", 1, k, Init::Zero);
    add(v, p + ".out.W", k * k, dp);
    add(v, p + ".out.b", 1, dp, Init::Zero);
}

} // namespace

std::vector<ParamShape> param_shapes(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t d = static_cast<std::size_t>(cfg.d_node);
    const std::size_t dp = static_cast<std::size_t>(cfg.d_pair);
    const std::size_t k = static_cast<std::size_t>(cfg.d_opm);
    const std::size_t h = static_cast<std::size_t>(cfg.heads);

    std::vector<ParamShape> v;
    add(v, "enc.lig_proj.W", static_cast<std::size_t>(cfg.ligand_in_width()), d);
    add(v, "enc.lig_proj.b", 1, d, Init::Zero);
    add(v, "enc.prot_proj.W", static_cast<std::size_t>(cfg.protein_in_width()), d);
    add(v, "enc.prot_proj.b", 1, d, Init::Zero);
    add_opm(v, "enc.opm", d, k, dp);

    auto add_stage = [&](const std::string& stage, int layers) {
        for (int l = 0; l < layers; ++l) {
            const std::string base = stage + ".l" + std::to_string(l) + ".";
            for (const std::string side : {"lig", "prot"}) {
                const std::string s = base + side + ".";
                add_ln(v, s + "ln_ind", d);
                add_mlp(v, s + "msg", 2 * d + 1, d);
                add_mlp(v, s + "upd", 2 * d, d);
                add_mlp(v, s + "gate", d, 1, /*zero_out=*/true);
                add_ln(v, s + "ln_att", d);
                add_ln(v, s + "ln_ifc", d);
                add_mlp(v, s + "ifq", d, d);
                add_mlp(v, s + "ifk", d + 1, d);
                add_mlp(v, s + "ifv", d + 1, d);
                add_mlp(v, s + "ifb", dp, 1);
                add_mlp(v, s + "ifxv", d, 1, /*zero_out=*/true);
            }
            add(v, base + "att.q.W", d, d);
            add(v, base + "att.q.b", 1, d, Init::Zero);
            add(v, base + "att.k.W", d, d);
            add(v, base + "att.k.b", 1, d, Init::Zero);
            add(v, base + "att.v.W", d, d);
            add(v, base + "att.v.b", 1, d, Init::Zero);
            add(v, base + "att.bias.W", dp, h);
            add(v, base + "att.bias.b", 1, h, Init::Zero);
            add(v, base + "att.out.W", d, d);
            add(v, base + "att.out.b", 1, d, Init::Zero);
            add_opm(v, base + "opm", d, k, dp);
        }
    };
    add_stage("pocket", cfg.pocket_layers);
    add_stage("dock", cfg.dock_layers);

    // heads: zero weights, biases seeded at typical pocket scales so early
    // training is not dominated by out-of-range predictions
    add_ln(v, "pocket.cls_ln", d);
    add(v, "pocket.cls.W", d, 1, Init::Zero);
    add(v, "pocket.cls.b", 1, 1, Init::Zero);
    add_ln(v, "pocket.radius_ln", d);
    add_mlp(v, "pocket.radius", d, 1, /*zero_out=*/true);
    v.back().init = Init::Const; // radius.b2: raw radius starts near 6 A
    v.back().const_value = 6.0;

    add_opm(v, "dock.opm0", d, k, dp);
    add_ln(v, "dock.dmap_ln", dp);
    // decoded distances start uniform at a typical ligand-to-pocket distance;
    // a zero-mean start keeps the distance-consistency term from warping early
    // poses before the head has learned per-pair distances
    add_mlp(v, "dock.dmap", dp, 1, /*zero_out=*/true);
    v.back().init = Init::Const; // dmap.b2, pre-softplus
    v.back().const_value = 6.5;
    return v;
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x706172616d73ull));
    ParamStore store;
    for (const ParamShape& ps : param_shapes(cfg)) {
        Tensor t(ps.rows, ps.cols);
        switch (ps.init) {
            case ParamShape::Init::Zero: break;
            case ParamShape::Init::One:
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0;
                break;
            case ParamShape::Init::Const:
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = ps.const_value;
                break;
            case ParamShape::Init::Xavier: {
                const double s =
                    std::sqrt(6.0 / static_cast<double>(ps.rows + ps.cols));
                for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-s, s);
                break;
            }
        }
        store.tensors[ps.name] = std::move(t);
    }
    return store;
}

void randomize_params(ParamStore& store, std::uint64_t seed, double scale) {
    Rng rng(Rng::mix(seed, 0x72616e64ull));
    for (auto& [name, t] : store.tensors)
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.uniform(-scale, scale);
}

VarId ParamVars::operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const VarId id = tape_->leaf(store_->at(name), trainable_);
    cache_[name] = id;
    return id;
}

} // namespace curvebind
