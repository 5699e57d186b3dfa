#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "curvebind/model.hpp"
#include "curvebind/params.hpp"

namespace curvebind {

struct AblationFlags {
    bool no_lcf = false;
    bool uniform_weights = false;
    bool fixed_radius = false;
    bool plain_bce = false;
};

void apply_ablations(ModelConfig& cfg, const AblationFlags& flags);

struct TrainConfig {
    double learning_rate = 5e-5;
    int batch_size = 3;
    int epochs = 450;
    int max_steps = 0;   // 0: derive from epochs
    int tp_epoch = -1;   // -1: half of the epochs
    std::uint64_t seed = 0;
    double weight_decay = 0.01;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::string schedule = "linear"; // "constant" | "linear"
    double decay_start_frac = 0.5;   // linear: constant until this fraction
    double end_factor = 0.1;         // linear: final lr = end_factor * base
    AblationFlags ablation;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

double scheduled_lr(const TrainConfig& cfg, int step, int total_steps);

// epoch < tp: the true center feeds the docking stage, else the predicted one
inline Vec3 curriculum_center(int epoch, int tp, const Vec3& true_center,
                              const Vec3& pred_center) {
    return epoch < tp ? true_center : pred_center;
}

using GradMap = std::map<std::string, Tensor>;

struct AdamWState {
    GradMap m, v;
    std::int64_t t = 0;
};

// decoupled weight decay; lr = 0 leaves parameters bit-identical
void adamw_step(ParamStore& params, const GradMap& grads, AdamWState& state, double lr,
                const TrainConfig& cfg);

enum class LossTerm { Focal, Center, Radius, Coord, DistMap, Pocket, Docking, Total };

struct StepStats {
    int step = 0, epoch = 0;
    double lr = 0;
    double total = 0, pocket = 0, docking = 0;
    double cls = 0, center = 0, radius = 0, coord = 0, dist = 0;
    int batch_complexes = 0;
};

// Mean-of-batch gradients of the selected loss term. Per-complex gumbel
// streams are derived from (seed, complex ordinal, step) so serial and
// parallel accumulation agree.
GradMap batch_gradients(const std::vector<const ComplexInstance*>& batch,
                        const ParamStore& params, const ModelConfig& cfg, int epoch, int tp_epoch,
                        std::uint64_t seed, int step, LossTerm term, StepStats* stats);

struct TrainResult {
    ParamStore params;
    std::vector<StepStats> log;
    int steps = 0;
};

TrainResult train(const std::vector<ComplexInstance>& dataset, ModelConfig cfg,
                  const TrainConfig& tc, std::ostream* log_jsonl = nullptr,
                  const std::function<void(const StepStats&)>& on_step = {});

// --- gradient verification ---

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double worst = 0.0;
    bool pass(double tol) const { return worst < tol; }
};

// Central-difference verification of d(loss term)/d(parameters) on one
// instance; samples >= min_coords coordinates per parameter block (whole
// block when smaller). Relative error |a - n| / max(1, |a|, |n|).
GradCheckReport gradcheck_model(const ComplexInstance& inst, const ParamStore& params,
                                const ModelConfig& cfg, LossTerm term, double step,
                                int min_coords, std::uint64_t seed);

// Comparison core: central differences of eval_loss around `params` against
// the supplied analytic gradients. Exposed so fault-injection tests can
// corrupt a block and watch it get flagged.
GradCheckReport gradcheck_compare(const std::function<double(const ParamStore&)>& eval_loss,
                                  const GradMap& analytic, const ParamStore& params, double step,
                                  int min_coords, std::uint64_t seed);

const char* loss_term_name(LossTerm term);
LossTerm loss_term_from_name(const std::string& name);

} // namespace curvebind
