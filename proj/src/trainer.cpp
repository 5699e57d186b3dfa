#include "curvebind/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <ostream>

#include "curvebind/errors.hpp"
#include "curvebind/jsonio.hpp"
#include "curvebind/rng.hpp"

namespace curvebind {

void apply_ablations(ModelConfig& cfg, const AblationFlags& flags) {
    if (flags.no_lcf) cfg.use_lcf = false;
    if (flags.uniform_weights) cfg.degree_weights = false;
    if (flags.fixed_radius) cfg.dynamic_radius = false;
    if (flags.plain_bce) cfg.balanced_focal = false;
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["max_steps"] = max_steps;
    j["tp_epoch"] = tp_epoch;
    j["seed"] = seed;
    j["weight_decay"] = weight_decay;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["schedule"] = schedule;
    j["decay_start_frac"] = decay_start_frac;
    j["end_factor"] = end_factor;
    j["ablation"] = {{"no_lcf", ablation.no_lcf},
                     {"uniform_weights", ablation.uniform_weights},
                     {"fixed_radius", ablation.fixed_radius},
                     {"plain_bce", ablation.plain_bce}};
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.tp_epoch = j.value("tp_epoch", c.tp_epoch);
    c.seed = j.value("seed", c.seed);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.schedule = j.value("schedule", c.schedule);
    c.decay_start_frac = j.value("decay_start_frac", c.decay_start_frac);
    c.end_factor = j.value("end_factor", c.end_factor);
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        c.ablation.no_lcf = a.value("no_lcf", false);
        c.ablation.uniform_weights = a.value("uniform_weights", false);
        c.ablation.fixed_radius = a.value("fixed_radius", false);
        c.ablation.plain_bce = a.value("plain_bce", false);
    }
    if (c.learning_rate <= 0.0) throw ValidationError("train config: learning_rate must be > 0");
    if (c.batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    return c;
}

double scheduled_lr(const TrainConfig& cfg, int step, int total_steps) {
    if (cfg.schedule == "constant" || total_steps <= 1) return cfg.learning_rate;
    if (cfg.schedule != "linear") throw ValidationError("unknown schedule '" + cfg.schedule + "'");
    const double start = cfg.decay_start_frac * static_cast<double>(total_steps);
    if (static_cast<double>(step) <= start) return cfg.learning_rate;
    const double span = static_cast<double>(total_steps) - start;
    const double f = span <= 0.0 ? 1.0
                                 : 1.0 - (1.0 - cfg.end_factor) *
                                             (static_cast<double>(step) - start) / span;
    return cfg.learning_rate * std::max(cfg.end_factor, f);
}

void adamw_step(ParamStore& params, const GradMap& grads, AdamWState& state, double lr,
                const TrainConfig& cfg) {
    ++state.t;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (auto& [name, theta] : params.tensors) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        Tensor& m = state.m.try_emplace(name, theta.rows(), theta.cols()).first->second;
        Tensor& v = state.v.try_emplace(name, theta.rows(), theta.cols()).first->second;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            theta[k] -= lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) +
                              cfg.weight_decay * theta[k]);
        }
    }
}

namespace {

VarId select_term(const PipelineResult& r, LossTerm term) {
    switch (term) {
        case LossTerm::Focal: return r.cls_loss;
        case LossTerm::Center: return r.center_loss;
        case LossTerm::Radius: return r.radius_loss;
        case LossTerm::Coord: return r.coord_loss;
        case LossTerm::DistMap: return r.dist_loss;
        case LossTerm::Pocket: return r.pocket_loss;
        case LossTerm::Docking: return r.docking_loss;
        case LossTerm::Total: return r.total_loss;
    }
    return kNoVar;
}

bool pocket_only_term(LossTerm term) {
    return term == LossTerm::Focal || term == LossTerm::Center || term == LossTerm::Radius ||
           term == LossTerm::Pocket;
}

} // namespace

const char* loss_term_name(LossTerm term) {
    switch (term) {
        case LossTerm::Focal: return "focal";
        case LossTerm::Center: return "center";
        case LossTerm::Radius: return "radius";
        case LossTerm::Coord: return "coord";
        case LossTerm::DistMap: return "distmap";
        case LossTerm::Pocket: return "pocket";
        case LossTerm::Docking: return "docking";
        case LossTerm::Total: return "total";
    }
    return "?";
}

LossTerm loss_term_from_name(const std::string& name) {
    for (LossTerm t : {LossTerm::Focal, LossTerm::Center, LossTerm::Radius, LossTerm::Coord,
                       LossTerm::DistMap, LossTerm::Pocket, LossTerm::Docking, LossTerm::Total})
        if (name == loss_term_name(t)) return t;
    throw ValidationError("unknown loss term '" + name + "'");
}

GradMap batch_gradients(const std::vector<const ComplexInstance*>& batch,
                        const ParamStore& params, const ModelConfig& cfg, int epoch, int tp_epoch,
                        std::uint64_t seed, int step, LossTerm term, StepStats* stats) {
    GradMap grads;
    int used = 0;
    for (std::size_t b = 0; b < batch.size(); ++b)
        if (batch[b]->labels.trainable) ++used;
    if (used == 0) return grads;
    const double inv = 1.0 / static_cast<double>(used);

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const ComplexInstance& inst = *batch[b];
        if (!inst.labels.trainable) continue;
        Tape tape(true);
        ParamVars P(tape, params, true);
        RunOptions opts;
        opts.training = true;
        opts.epoch = epoch;
        opts.tp_epoch = tp_epoch;
        opts.noise_seed = Rng::mix(Rng::mix(seed, static_cast<std::uint64_t>(step)),
                                   std::hash<std::string>{}(inst.record.id));
        opts.pocket_only = pocket_only_term(term);
        const PipelineResult res = run_pipeline(tape, P, inst, cfg, opts);
        const VarId objective = select_term(res, term);
        if (objective == kNoVar) throw NumericError("selected loss term was not computed");
        if (!std::isfinite(tape.val(objective)[0]))
            throw NumericError("non-finite loss on complex " + inst.record.id);
        tape.backward(objective);
        for (const auto& [name, id] : P.used()) {
            const Tensor& g = tape.grad(id);
            auto it = grads.find(name);
            if (it == grads.end()) {
                Tensor acc(g.rows(), g.cols());
                axpy(acc, g, inv);
                grads.emplace(name, std::move(acc));
            } else {
                axpy(it->second, g, inv);
            }
        }
        if (stats) {
            auto val = [&](VarId id) { return id == kNoVar ? 0.0 : tape.val(id)[0] * inv; };
            stats->total += val(res.total_loss);
            stats->pocket += val(res.pocket_loss);
            stats->docking += val(res.docking_loss);
            stats->cls += val(res.cls_loss);
            stats->center += val(res.center_loss);
            stats->radius += val(res.radius_loss);
            stats->coord += val(res.coord_loss);
            stats->dist += val(res.dist_loss);
            ++stats->batch_complexes;
        }
    }
    return grads;
}

TrainResult train(const std::vector<ComplexInstance>& dataset, ModelConfig cfg,
                  const TrainConfig& tc, std::ostream* log_jsonl,
                  const std::function<void(const StepStats&)>& on_step) {
    apply_ablations(cfg, tc.ablation);
    cfg.validate();
    std::vector<const ComplexInstance*> trainable;
    for (const auto& inst : dataset)
        if (inst.labels.trainable) trainable.push_back(&inst);
    if (trainable.empty()) throw ValidationError("train: no trainable complexes");

    const int per_epoch = static_cast<int>(
        (trainable.size() + static_cast<std::size_t>(tc.batch_size) - 1) /
        static_cast<std::size_t>(tc.batch_size));
    const int total_steps =
        tc.max_steps > 0 ? tc.max_steps : tc.epochs * std::max(1, per_epoch);
    const int epochs_total = (total_steps + per_epoch - 1) / per_epoch;
    const int tp = tc.tp_epoch >= 0 ? tc.tp_epoch : epochs_total / 2;

    TrainResult out;
    out.params = init_params(cfg, tc.seed);
    AdamWState adam;
    Rng shuffle_rng(Rng::mix(tc.seed, 0x7368756666ull));

    std::vector<std::size_t> order(trainable.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int step = 0;
    for (int epoch = 0; step < total_steps; ++epoch) {
        // deterministic Fisher-Yates reshuffle each epoch
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(shuffle_rng.uniform_int(
                          0, static_cast<int>(i) - 1))]);
        for (int bstart = 0; bstart < static_cast<int>(trainable.size()) && step < total_steps;
             bstart += tc.batch_size) {
            std::vector<const ComplexInstance*> batch;
            for (int k = bstart;
                 k < std::min<int>(bstart + tc.batch_size, static_cast<int>(trainable.size()));
                 ++k)
                batch.push_back(trainable[order[static_cast<std::size_t>(k)]]);

            StepStats st;
            st.step = step;
            st.epoch = epoch;
            st.lr = scheduled_lr(tc, step, total_steps);
            // a non-finite loss or a diverged refinement rejects the step;
            // training continues with the parameters untouched
            bool rejected = false;
            GradMap grads;
            try {
                grads = batch_gradients(batch, out.params, cfg, epoch, tp, tc.seed, step,
                                        LossTerm::Total, &st);
            } catch (const NumericError& e) {
                rejected = true;
                std::cerr << "step " << step << " rejected: " << e.what() << "\n";
            }
            if (!rejected) adamw_step(out.params, grads, adam, st.lr, tc);
            if (log_jsonl) {
                nlohmann::json j;
                j["step"] = st.step;
                j["epoch"] = st.epoch;
                j["lr"] = st.lr;
                j["total"] = st.total;
                j["pocket"] = st.pocket;
                j["docking"] = st.docking;
                j["cls"] = st.cls;
                j["center"] = st.center;
                j["radius"] = st.radius;
                j["coord"] = st.coord;
                j["dist"] = st.dist;
                dump_json_g17(*log_jsonl, j);
                *log_jsonl << '\n';
            }
            if (on_step) on_step(st);
            out.log.push_back(st);
            ++step;
        }
    }
    out.steps = step;
    return out;
}

GradCheckReport gradcheck_model(const ComplexInstance& inst, const ParamStore& params,
                                const ModelConfig& cfg, LossTerm term, double step,
                                int min_coords, std::uint64_t seed) {
    const std::uint64_t noise_seed =
        Rng::mix(Rng::mix(seed, 0), std::hash<std::string>{}(inst.record.id));
    RunOptions base;
    base.training = true;
    base.epoch = 1 << 20; // predicted-center branch
    base.tp_epoch = 0;
    base.noise_seed = noise_seed;
    base.pocket_only = pocket_only_term(term);

    // analytic gradients; the discrete structure (pocket selection and every
    // cross-edge rebuild) is recorded here and replayed around each
    // perturbation, so the finite differences see a smooth function
    CrossEdgeLog log;
    std::vector<int> pocket;
    GradMap analytic;
    {
        Tape tape(true);
        ParamVars P(tape, params, true);
        RunOptions opts = base;
        opts.cross_log = &log;
        const PipelineResult res = run_pipeline(tape, P, inst, cfg, opts);
        pocket = res.pocket;
        const VarId objective = select_term(res, term);
        if (objective == kNoVar) throw NumericError("gradcheck: loss term not computed");
        tape.backward(objective);
        for (const auto& [name, id] : P.used()) analytic.emplace(name, tape.grad(id));
    }
    log.replay = true;

    auto eval_loss = [&](const ParamStore& p) {
        log.cursor = 0;
        Tape tape(false);
        ParamVars P(tape, p, false);
        RunOptions opts = base;
        opts.cross_log = &log;
        if (!pocket.empty()) opts.frozen_pocket = &pocket;
        const PipelineResult res = run_pipeline(tape, P, inst, cfg, opts);
        const VarId objective = select_term(res, term);
        if (objective == kNoVar) throw NumericError("gradcheck: loss term not computed");
        return tape.val(objective)[0];
    };

    return gradcheck_compare(eval_loss, analytic, params, step, min_coords, seed);
}

GradCheckReport gradcheck_compare(const std::function<double(const ParamStore&)>& eval_loss,
                                  const GradMap& analytic, const ParamStore& params, double step,
                                  int min_coords, std::uint64_t seed) {
    ParamStore work = params;
    Rng rng(Rng::mix(seed, 0x6772616463686bull));
    GradCheckReport report;
    for (const auto& [name, theta] : params.tensors) {
        GradCheckBlock block;
        block.name = name;
        const std::size_t total = theta.size();
        if (total == 0) {
            report.blocks.push_back(block);
            continue;
        }
        std::vector<std::size_t> coords;
        if (total <= static_cast<std::size_t>(min_coords)) {
            for (std::size_t k = 0; k < total; ++k) coords.push_back(k);
        } else {
            for (int k = 0; k < min_coords; ++k)
                coords.push_back(static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int>(total) - 1)));
        }
        const Tensor* ga = nullptr;
        auto it = analytic.find(name);
        if (it != analytic.end()) ga = &it->second;
        Tensor& wt = work.at(name);
        for (std::size_t k : coords) {
            const double orig = wt[k];
            wt[k] = orig + step;
            const double fp = eval_loss(work);
            wt[k] = orig - step;
            const double fm = eval_loss(work);
            wt[k] = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = ga ? (*ga)[k] : 0.0;
            const double rel = std::abs(a - numeric) /
                               std::max({1.0, std::abs(a), std::abs(numeric)});
            block.max_rel_err = std::max(block.max_rel_err, rel);
            ++block.checked;
        }
        report.worst = std::max(report.worst, block.max_rel_err);
        report.blocks.push_back(std::move(block));
    }
    return report;
}

} // namespace curvebind
