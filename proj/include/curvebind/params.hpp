#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvebind/features.hpp"
#include "curvebind/tape.hpp"
#include "curvebind/tensor.hpp"

namespace curvebind {

struct ModelConfig {
    int d_node = 512;
    int d_pair = 128;
    int d_opm = 32;
    int heads = 4;
    int pocket_layers = 1;     // M1
    int dock_layers = 4;       // M2
    int refine_iterations = 8;
    ProteinFeatureMode protein_mode = ProteinFeatureMode::Fallback25;

    // ablation switches (each maps to one mechanism)
    bool use_lcf = true;
    bool degree_weights = true;
    bool dynamic_radius = true;
    bool balanced_focal = true; // false: plain BCE (gamma 0, unit weight)

    bool freeze_protein_coords = true;
    double gumbel_tau = 1.0;
    double huber_delta = 1.0;
    double focal_gamma = 2.0;
    double gamma_d = 1.0;
    double alpha1 = 0.05;
    double fixed_radius = 20.0;
    int pocket_fallback_k = 8;
    double protein_cutoff = 8.0;
    double cross_cutoff = 10.0;
    double divergence_guard = 1e4;
    double prob_epsilon = 1e-7;

    int ligand_in_width() const { return kLigandFeatureWidth + kLcfWidth; }
    int protein_base_width() const {
        return protein_mode == ProteinFeatureMode::Precomputed1280 ? kEsmEmbeddingWidth
                                                                   : kProteinFallbackWidth;
    }
    int protein_in_width() const { return protein_base_width() + kLcfWidth; }
    int head_width() const { return d_node / heads; }
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// Named parameter tensors; std::map keeps iteration deterministic.
struct ParamStore {
    std::map<std::string, Tensor> tensors;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    std::size_t total_size() const;
};

struct ParamShape {
    std::string name;
    std::size_t rows = 0, cols = 0;
    enum class Init { Xavier, Zero, One, Const } init = Init::Xavier;
    double const_value = 0.0;
};

// Prediction heads read layer-normalized inputs scaled by this constant;
// the scale preconditions the heads so small per-weight optimizer steps
// still move logits, radii and distances across their physical ranges.
constexpr double kHeadInputScale = 8.0;

std::vector<ParamShape> param_shapes(const ModelConfig& cfg);
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Uniform fill of every tensor, including the blocks init_params zeroes
// (classifier, coordinate gates, regression heads). Gradient verification
// and perturbation tests want all paths live.
void randomize_params(ParamStore& store, std::uint64_t seed, double scale = 0.15);

// Lazily inserts parameters into a tape as leaves; one leaf per name.
class ParamVars {
public:
    ParamVars(Tape& tape, const ParamStore& store, bool trainable = true)
        : tape_(&tape), store_(&store), trainable_(trainable) {}

    VarId operator()(const std::string& name);
    const std::map<std::string, VarId>& used() const { return cache_; }
    Tape& tape() { return *tape_; }

private:
    Tape* tape_;
    const ParamStore* store_;
    bool trainable_;
    std::map<std::string, VarId> cache_;
};

} // namespace curvebind
