// curvebind command-line tool: ingest, curvature, featurize, train, dock,
// eval, gradcheck, dump-graph.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "curvebind/checkpoint.hpp"
#include "curvebind/complex.hpp"
#include "curvebind/curvature.hpp"
#include "curvebind/errors.hpp"
#include "curvebind/jsonio.hpp"
#include "curvebind/metrics.hpp"
#include "curvebind/model.hpp"
#include "curvebind/rng.hpp"
#include "curvebind/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace curvebind;

namespace {

constexpr const char* kVersion = "curvebind 0.1.0";

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

class Manifest {
public:
    Manifest(std::string command, std::uint64_t seed) : seed_(seed) {
        doc_["command"] = std::move(command);
        doc_["version"] = kVersion;
        doc_["seed"] = seed;
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        doc_["timestamp_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
        start_ = std::chrono::steady_clock::now();
    }

    void add_input(const std::string& path) { doc_["inputs"].push_back(path); }
    void set_config_hash(const std::string& canonical) {
        // FNV-1a
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : canonical) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        std::ostringstream ss;
        ss << std::hex << h;
        doc_["config_hash"] = ss.str();
    }
    void stage_done(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        doc_["timing_s"][stage] =
            std::chrono::duration<double>(now - start_).count();
        start_ = now;
    }
    void write(const std::string& path) {
        if (!doc_.contains("config_hash")) doc_["config_hash"] = "none";
        if (!doc_.contains("inputs")) doc_["inputs"] = json::array();
        write_text_file(path, json_g17(doc_, 1));
    }

private:
    json doc_;
    std::uint64_t seed_;
    std::chrono::steady_clock::time_point start_;
};

std::uint64_t resolve_seed(std::uint64_t cli_seed, bool seed_given) {
    if (seed_given) return cli_seed;
    if (const char* env = std::getenv("CURVEBIND_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ValidationError("CURVEBIND_SEED is not a number");
        }
    }
    return 0;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& paths) {
    std::vector<std::string> files;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<std::string> dir_files;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (!entry.is_regular_file()) continue;
                const std::string ext = entry.path().extension().string();
                if (ext == ".json" || ext == ".pdb" || ext == ".ent")
                    dir_files.push_back(entry.path().string());
            }
            std::sort(dir_files.begin(), dir_files.end());
            files.insert(files.end(), dir_files.begin(), dir_files.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

EmbeddingTable load_embeddings_arg(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        std::string stem = fs::path(path).stem().string();
        return load_embedding_table_binary(in, stem);
    }
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return load_embedding_table(in);
}

struct ConfigFile {
    ModelConfig model;
    TrainConfig train;
    bool train_seed_from_file = false;
};

ConfigFile load_config(const std::string& path) {
    ConfigFile cfg;
    if (path.empty()) return cfg;
    const json doc = parse_json_file(path);
    if (doc.contains("model")) cfg.model = ModelConfig::from_json(doc.at("model"));
    if (doc.contains("train")) {
        cfg.train = TrainConfig::from_json(doc.at("train"));
        cfg.train_seed_from_file = doc.at("train").contains("seed");
    }
    if (doc.contains("encoder")) {
        // alternative spelling for the encoder knobs
        const json& e = doc.at("encoder");
        cfg.model.d_node = e.value("d_node", cfg.model.d_node);
        cfg.model.d_pair = e.value("d_pair", cfg.model.d_pair);
        cfg.model.use_lcf = e.value("use_lcf", cfg.model.use_lcf);
        if (e.contains("protein_mode")) {
            const std::string mode = e.at("protein_mode").get<std::string>();
            if (mode == "precomputed-1280")
                cfg.model.protein_mode = ProteinFeatureMode::Precomputed1280;
            else if (mode == "fallback-25")
                cfg.model.protein_mode = ProteinFeatureMode::Fallback25;
            else
                throw ParseError("config: unknown encoder.protein_mode '" + mode + "'");
        }
        cfg.model.validate();
    }
    return cfg;
}

struct AblationCli {
    bool no_lcf = false, uniform_weights = false, fixed_radius = false, plain_bce = false;

    void attach(CLI::App* cmd) {
        cmd->add_flag("--no-lcf", no_lcf, "disable local curvature features");
        cmd->add_flag("--uniform-weights", uniform_weights,
                      "uniform neighbor weights in coordinate updates");
        cmd->add_flag("--fixed-radius", fixed_radius, "fixed 20 A pocket radius");
        cmd->add_flag("--plain-bce", plain_bce, "plain BCE instead of balanced focal loss");
    }
    void apply(ModelConfig& cfg) const {
        AblationFlags f{no_lcf, uniform_weights, fixed_radius, plain_bce};
        apply_ablations(cfg, f);
    }
    void apply(TrainConfig& tc) const {
        tc.ablation.no_lcf |= no_lcf;
        tc.ablation.uniform_weights |= uniform_weights;
        tc.ablation.fixed_radius |= fixed_radius;
        tc.ablation.plain_bce |= plain_bce;
    }
};

// parallel per-complex loop; results land by index so output order is fixed
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

json coords_json(const Tensor& x) {
    json rows = json::array();
    for (std::size_t i = 0; i < x.rows(); ++i)
        rows.push_back({x(i, 0), x(i, 1), x(i, 2)});
    return rows;
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& policy_path,
               const std::string& out_path, std::uint64_t seed) {
    Manifest manifest("ingest", seed);
    FilterPolicy policy;
    if (!policy_path.empty()) {
        std::ifstream in(policy_path);
        if (!in) throw IoError("cannot open " + policy_path);
        policy = parse_filter_policy(in);
        manifest.add_input(policy_path);
    }
    const std::vector<std::string> files = expand_inputs(inputs);
    if (files.empty()) std::cerr << "warning: no complex documents found\n";

    json index;
    index["policy"] = {{"contact_cutoff", policy.contact_cutoff},
                       {"min_contacts_exclusive", policy.min_contacts_exclusive},
                       {"max_ligand_atoms_exclusive", policy.max_ligand_atoms_exclusive}};
    index["complexes"] = json::array();
    int kept = 0, dropped = 0, failed = 0;
    for (const auto& f : files) {
        manifest.add_input(f);
        json entry;
        entry["path"] = f;
        try {
            ComplexRecord rec = parse_complex_file(f);
            rec = prune_chains(rec, policy.contact_cutoff);
            rec.validate();
            const FilterDecision d = apply_filters(rec, policy);
            entry["id"] = rec.id;
            entry["kept"] = d.keep;
            entry["contacts"] = count_contacts(rec, policy.contact_cutoff);
            entry["ligand_atoms"] = rec.ligand_atoms.size();
            entry["residues"] = rec.residues.size();
            if (!d.keep) {
                entry["reason"] = d.reason;
                ++dropped;
            } else {
                ++kept;
            }
        } catch (const Error& e) {
            entry["kept"] = false;
            entry["error"] = e.what();
            ++failed;
            std::cerr << "error: " << f << ": " << e.what() << "\n";
        }
        index["complexes"].push_back(std::move(entry));
    }
    index["kept"] = kept;
    index["dropped"] = dropped;
    index["failed"] = failed;
    manifest.stage_done("ingest");
    write_text_file(out_path, json_g17(index, 1));
    manifest.write(out_path + ".manifest.json");
    std::cout << "ingest: " << kept << " kept, " << dropped << " dropped, " << failed
              << " failed -> " << out_path << "\n";
    return 0;
}

void write_curvature_tsv(const SimpleGraph& g, const std::string& edge_path,
                         const std::string& node_path) {
    const CurvatureMap cm = graph_curvature(g);
    std::ostringstream edges;
    edges << "u\tv\tkappa\n";
    for (const auto& [e, k] : cm.kappa)
        edges << e.first << '\t' << e.second << '\t' << format_g17(k) << '\n';
    write_text_file(edge_path, edges.str());

    std::ostringstream nodes;
    nodes << "node\tlcf_min\tlcf_max\tlcf_mean\tlcf_std\tlcf_median\n";
    for (int v = 0; v < g.n; ++v) {
        const LcfVector l = node_lcf(g, cm, v);
        nodes << v;
        for (double x : l.as_array()) nodes << '\t' << format_g17(x);
        nodes << '\n';
    }
    write_text_file(node_path, nodes.str());
}

int cmd_curvature(const std::string& graph_path, const std::string& complex_path,
                  const std::string& out_prefix, std::uint64_t seed) {
    Manifest manifest("curvature", seed);
    if (!graph_path.empty()) {
        manifest.add_input(graph_path);
        const json doc = parse_json_file(graph_path);
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : doc.at("edges")) edges.push_back({e.at(0), e.at(1)});
        const SimpleGraph g = SimpleGraph::from_edges(doc.at("n").get<int>(), edges);
        write_curvature_tsv(g, out_prefix + ".edges.tsv", out_prefix + ".nodes.tsv");
        std::cout << "curvature: " << g.edges.size() << " edges -> " << out_prefix
                  << ".{edges,nodes}.tsv\n";
    } else {
        manifest.add_input(complex_path);
        const ComplexRecord rec = parse_complex_file(complex_path);
        const LigandGraph lg = build_ligand_graph(rec);
        const ProteinGraph pg = build_protein_graph(rec);
        write_curvature_tsv(to_simple_graph(lg), out_prefix + ".ligand.edges.tsv",
                            out_prefix + ".ligand.nodes.tsv");
        write_curvature_tsv(to_simple_graph(pg), out_prefix + ".protein.edges.tsv",
                            out_prefix + ".protein.nodes.tsv");
        std::cout << "curvature: ligand + protein TSVs -> " << out_prefix << ".*\n";
    }
    manifest.stage_done("curvature");
    manifest.write(out_prefix + ".manifest.json");
    return 0;
}

int cmd_dump_graph(const std::string& complex_path, const std::string& out_path,
                   std::uint64_t seed) {
    Manifest manifest("dump-graph", seed);
    manifest.add_input(complex_path);
    const ComplexRecord rec = parse_complex_file(complex_path);
    write_text_file(out_path, dump_graph_json(build_complex_graph(rec)));
    manifest.stage_done("dump");
    manifest.write(out_path + ".manifest.json");
    std::cout << "dump-graph -> " << out_path << "\n";
    return 0;
}

int cmd_featurize(const std::string& complex_path, const std::string& embeddings_path,
                  const std::string& atom_features_path, const std::string& config_path,
                  const std::string& out_prefix, std::uint64_t seed) {
    Manifest manifest("featurize", seed);
    manifest.add_input(complex_path);
    ConfigFile cfg = load_config(config_path);
    EmbeddingTable table;
    if (!embeddings_path.empty()) {
        table = load_embeddings_arg(embeddings_path);
        manifest.add_input(embeddings_path);
        cfg.model.protein_mode = ProteinFeatureMode::Precomputed1280;
    }
    const ComplexRecord rec = parse_complex_file(complex_path);
    Tensor override_feat;
    const Tensor* override_ptr = nullptr;
    if (!atom_features_path.empty()) {
        std::ifstream in(atom_features_path);
        if (!in) throw IoError("cannot open " + atom_features_path);
        override_feat = load_ligand_feature_override(in, rec.ligand_atoms.size());
        override_ptr = &override_feat;
        manifest.add_input(atom_features_path);
    }
    const ComplexInstance inst =
        prepare_instance(rec, table.entries() ? &table : nullptr, cfg.model, override_ptr);

    auto dump_side = [&](const Tensor& base, const Tensor& lcf, const std::string& path) {
        std::ostringstream ss;
        for (std::size_t i = 0; i < base.rows(); ++i) {
            ss << i;
            for (std::size_t j = 0; j < base.cols(); ++j) ss << '\t' << format_g17(base(i, j));
            for (std::size_t j = 0; j < lcf.cols(); ++j) ss << '\t' << format_g17(lcf(i, j));
            ss << '\n';
        }
        write_text_file(path, ss.str());
    };
    dump_side(inst.lig_base, inst.lig_lcf, out_prefix + ".ligand.tsv");
    dump_side(inst.prot_base, inst.prot_lcf, out_prefix + ".protein.tsv");
    manifest.stage_done("featurize");
    manifest.write(out_prefix + ".manifest.json");
    std::cout << "featurize: base + LCF blocks -> " << out_prefix << ".{ligand,protein}.tsv\n";
    return 0;
}

std::vector<ComplexInstance> load_dataset(const std::vector<std::string>& data,
                                          const EmbeddingTable* table, const ModelConfig& cfg,
                                          Manifest& manifest) {
    std::vector<std::string> files;
    for (const auto& d : data) {
        if (!fs::is_directory(d) && d.size() > 5 &&
            d.substr(d.size() - 5) == ".json") {
            // could be an ingest index: inspect
            const json doc = parse_json_file(d);
            if (doc.contains("complexes")) {
                for (const auto& e : doc.at("complexes"))
                    if (e.value("kept", false)) files.push_back(e.at("path").get<std::string>());
                manifest.add_input(d);
                continue;
            }
        }
        const auto expanded = expand_inputs({d});
        files.insert(files.end(), expanded.begin(), expanded.end());
    }
    std::vector<ComplexInstance> out;
    for (const auto& f : files) {
        manifest.add_input(f);
        out.push_back(prepare_instance(parse_complex_file(f), table, cfg));
    }
    return out;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& data,
              const std::string& embeddings_path, const std::string& out_path,
              const std::string& log_path, const AblationCli& abl, std::uint64_t seed,
              bool seed_given) {
    Manifest manifest("train", seed);
    ConfigFile cfg = load_config(config_path);
    if (!config_path.empty()) manifest.add_input(config_path);
    abl.apply(cfg.train);
    // seed priority: --seed flag, then the config file, then the environment
    if (seed_given || !cfg.train_seed_from_file) cfg.train.seed = seed;
    ModelConfig mc = cfg.model;
    apply_ablations(mc, cfg.train.ablation);
    manifest.set_config_hash(json_g17(mc.to_json()) + json_g17(cfg.train.to_json()));

    EmbeddingTable table;
    if (!embeddings_path.empty()) {
        table = load_embeddings_arg(embeddings_path);
        manifest.add_input(embeddings_path);
    }
    const std::vector<ComplexInstance> dataset =
        load_dataset(data, table.entries() ? &table : nullptr, mc, manifest);
    manifest.stage_done("load");

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw IoError("cannot write " + log_path);
    }
    const TrainResult result = train(dataset, cfg.model, cfg.train, log ? &log : nullptr);
    manifest.stage_done("train");

    save_checkpoint({mc, result.params}, out_path);
    manifest.write(out_path + ".manifest.json");
    const double last = result.log.empty() ? 0.0 : result.log.back().total;
    std::cout << "train: " << result.steps << " steps, final batch loss "
              << format_g17(last) << " -> " << out_path << "\n";
    return 0;
}

int cmd_dock(const std::string& checkpoint_path, const std::vector<std::string>& complexes,
             const std::string& embeddings_path, const std::string& out_dir, bool trace,
             bool xyz, int jobs, bool deterministic, std::uint64_t seed) {
    Manifest manifest("dock", seed);
    manifest.add_input(checkpoint_path);
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    manifest.set_config_hash(json_g17(ckpt.config.to_json()));
    EmbeddingTable table;
    if (!embeddings_path.empty()) {
        table = load_embeddings_arg(embeddings_path);
        manifest.add_input(embeddings_path);
    }
    const std::vector<std::string> files = expand_inputs(complexes);
    fs::create_directories(out_dir);

    std::vector<ComplexInstance> insts;
    for (const auto& f : files) {
        manifest.add_input(f);
        insts.push_back(
            prepare_instance(parse_complex_file(f), table.entries() ? &table : nullptr,
                             ckpt.config));
    }
    manifest.stage_done("load");

    if (deterministic) jobs = 1;
    std::vector<std::string> errors(insts.size());
    parallel_for(insts.size(), jobs, [&](std::size_t i) {
        const ComplexInstance& inst = insts[i];
        try {
            Tape t(false);
            ParamVars P(t, ckpt.params, false);
            RunOptions opts;
            opts.training = false;
            opts.trace = trace;
            const PipelineResult res = run_pipeline(t, P, inst, ckpt.config, opts);

            json pose;
            pose["id"] = inst.record.id;
            pose["coords"] = coords_json(t.val(res.pred_coords));
            if (trace) {
                pose["iterations"] = json::array();
                for (const Tensor& x : res.trace) pose["iterations"].push_back(coords_json(x));
            }
            write_text_file(out_dir + "/" + inst.record.id + ".pose.json", json_g17(pose, 1));

            if (xyz) {
                std::ostringstream ss;
                ss << inst.record.ligand_atoms.size() << "\n" << inst.record.id << "\n";
                for (std::size_t a = 0; a < inst.record.ligand_atoms.size(); ++a)
                    ss << inst.record.ligand_atoms[a].element << ' '
                       << format_g17(t.val(res.pred_coords)(a, 0)) << ' '
                       << format_g17(t.val(res.pred_coords)(a, 1)) << ' '
                       << format_g17(t.val(res.pred_coords)(a, 2)) << '\n';
                write_text_file(out_dir + "/" + inst.record.id + ".xyz", ss.str());
            }

            json report;
            report["id"] = inst.record.id;
            json probs = json::array();
            for (std::size_t j = 0; j < t.val(res.probs).rows(); ++j)
                probs.push_back(t.val(res.probs)(j, 0));
            report["probs"] = std::move(probs);
            report["center"] = {t.val(res.center)(0, 0), t.val(res.center)(0, 1),
                                t.val(res.center)(0, 2)};
            report["radius_raw"] = t.val(res.radius_raw)[0];
            report["radius_final"] = res.radius_final;
            report["selected"] = res.pocket;
            if (inst.labels.trainable) {
                report["labels"] = {{"y", inst.labels.y},
                                    {"true_center",
                                     {inst.labels.true_center.x, inst.labels.true_center.y,
                                      inst.labels.true_center.z}},
                                    {"true_radius", inst.labels.true_radius},
                                    {"positives", inst.labels.positives}};
            } else {
                report["labels"] = {{"untrainable", true}};
            }
            write_text_file(out_dir + "/" + inst.record.id + ".pocket.json",
                            json_g17(report, 1));
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    manifest.stage_done("dock");
    manifest.write(out_dir + "/manifest.json");
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw NumericError(insts[i].record.id + ": " + errors[i]);
    std::cout << "dock: " << insts.size() << " pose(s) -> " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& pose_paths,
             const std::vector<std::string>& truth_paths, const std::string& out_prefix,
             std::uint64_t seed) {
    Manifest manifest("eval", seed);
    std::map<std::string, Tensor> truths;
    for (const auto& p : expand_inputs(truth_paths)) {
        if (p.size() > 10 && p.substr(p.size() - 10) == ".pose.json") continue;
        manifest.add_input(p);
        const ComplexRecord rec = parse_complex_file(p);
        Tensor x(rec.ligand_atoms.size(), 3);
        for (std::size_t i = 0; i < rec.ligand_atoms.size(); ++i) {
            x(i, 0) = rec.ligand_atoms[i].xyz.x;
            x(i, 1) = rec.ligand_atoms[i].xyz.y;
            x(i, 2) = rec.ligand_atoms[i].xyz.z;
        }
        truths[rec.id] = std::move(x);
    }

    std::vector<std::string> ids;
    std::vector<double> lr, cd;
    json per = json::array();
    for (const auto& p : expand_inputs(pose_paths)) {
        if (p.size() <= 10 || p.substr(p.size() - 10) != ".pose.json") continue;
        manifest.add_input(p);
        const json pose = parse_json_file(p);
        const std::string id = pose.at("id").get<std::string>();
        auto it = truths.find(id);
        if (it == truths.end())
            throw ValidationError("eval: no truth complex for pose id '" + id + "'");
        const json& coords = pose.at("coords");
        Tensor x(coords.size(), 3);
        for (std::size_t i = 0; i < coords.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j) x(i, j) = coords.at(i).at(j).get<double>();
        const double l = lrmsd(x, it->second);
        const double c = centroid_distance(x, it->second);
        ids.push_back(id);
        lr.push_back(l);
        cd.push_back(c);
        per.push_back({{"id", id}, {"lrmsd", l}, {"cd", c}});
    }
    if (ids.empty()) throw ValidationError("eval: no poses found");
    const MetricReport report = build_metric_report(ids, lr, cd);
    write_text_file(out_prefix + ".tsv", metric_table_tsv(report));
    json out;
    out["per_complex"] = std::move(per);
    auto agg = [](const MetricAggregate& a) {
        return json{{"p25", a.p25},           {"p50", a.p50},
                    {"p75", a.p75},           {"mean", a.mean},
                    {"below_2A", a.frac_below_2}, {"below_5A", a.frac_below_5}};
    };
    out["lrmsd"] = agg(report.lrmsd_agg);
    out["cd"] = agg(report.cd_agg);
    write_text_file(out_prefix + ".json", json_g17(out, 1));
    manifest.stage_done("eval");
    manifest.write(out_prefix + ".manifest.json");
    std::cout << metric_table_tsv(report);
    return 0;
}

int cmd_synth(int count, const std::string& out_dir, int atoms, int pocket, int far,
              std::uint64_t seed) {
    Manifest manifest("synth", seed);
    fs::create_directories(out_dir);
    SyntheticSpec spec;
    spec.ligand_atoms = atoms;
    spec.pocket_residues = pocket;
    spec.far_residues = far;
    for (int i = 0; i < count; ++i) {
        const ComplexRecord rec =
            make_synthetic_complex(Rng::mix(seed, static_cast<std::uint64_t>(i)), spec);
        write_text_file(out_dir + "/" + rec.id + ".json", serialize_complex(rec));
    }
    manifest.stage_done("synth");
    manifest.write(out_dir + ".manifest.json");
    std::cout << "synth: " << count << " complex document(s) -> " << out_dir << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path, const std::string& term_name, int instances,
                  int min_coords, const std::string& out_path, std::uint64_t seed) {
    Manifest manifest("gradcheck", seed);
    ConfigFile cfg = load_config(config_path);
    if (config_path.empty()) {
        // desk-sized default keeps the run quick
        cfg.model.d_node = 8;
        cfg.model.d_pair = 4;
        cfg.model.d_opm = 2;
        cfg.model.heads = 2;
        cfg.model.pocket_layers = 1;
        cfg.model.dock_layers = 1;
        cfg.model.refine_iterations = 1;
    } else {
        manifest.add_input(config_path);
    }
    manifest.set_config_hash(json_g17(cfg.model.to_json()));

    std::vector<LossTerm> terms;
    if (term_name == "all")
        terms = {LossTerm::Focal, LossTerm::Center, LossTerm::Radius, LossTerm::Coord,
                 LossTerm::DistMap, LossTerm::Total};
    else
        terms = {loss_term_from_name(term_name)};

    SyntheticSpec spec;
    spec.pocket_residues = 5;
    spec.far_residues = 2;
    spec.ligand_atoms = 3;

    json out;
    out["tolerance"] = 1e-4;
    out["terms"] = json::array();
    bool all_pass = true;
    for (const LossTerm term : terms) {
        json term_doc;
        term_doc["term"] = loss_term_name(term);
        term_doc["instances"] = json::array();
        double worst = 0.0;
        for (int k = 0; k < instances; ++k) {
            const std::uint64_t s = Rng::mix(seed, static_cast<std::uint64_t>(k) + 1);
            ParamStore params = init_params(cfg.model, s);
            randomize_params(params, s);
            const ComplexInstance inst =
                prepare_instance(make_synthetic_complex(s, spec), nullptr, cfg.model);
            const GradCheckReport rep =
                gradcheck_model(inst, params, cfg.model, term, 1e-4, min_coords, s);
            worst = std::max(worst, rep.worst);
            json inst_doc;
            inst_doc["seed"] = s;
            inst_doc["worst_rel_err"] = rep.worst;
            inst_doc["pass"] = rep.pass(1e-4);
            json blocks = json::array();
            for (const auto& b : rep.blocks)
                if (b.max_rel_err > 1e-6)
                    blocks.push_back(
                        {{"name", b.name}, {"max_rel_err", b.max_rel_err}, {"checked", b.checked}});
            inst_doc["notable_blocks"] = std::move(blocks);
            term_doc["instances"].push_back(std::move(inst_doc));
        }
        term_doc["worst_rel_err"] = worst;
        term_doc["pass"] = worst < 1e-4;
        all_pass = all_pass && worst < 1e-4;
        std::cout << "gradcheck " << loss_term_name(term) << ": worst rel err "
                  << format_g17(worst) << (worst < 1e-4 ? "  PASS" : "  FAIL") << "\n";
        out["terms"].push_back(std::move(term_doc));
    }
    out["pass"] = all_pass;
    manifest.stage_done("gradcheck");
    if (!out_path.empty()) {
        write_text_file(out_path, json_g17(out, 1));
        manifest.write(out_path + ".manifest.json");
    }
    return all_pass ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvature-aware blind protein-ligand docking pipeline"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough(); // global flags may appear after the subcommand

    std::uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--seed", seed, "random seed (fallback: CURVEBIND_SEED env)")
        ->each([&](const std::string&) { seed_given = true; });

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse + filter complex documents");
    std::vector<std::string> ingest_inputs;
    std::string ingest_policy, ingest_out = "index.json";
    ingest->add_option("--inputs", ingest_inputs, "files or directories")->required();
    ingest->add_option("--filter-policy", ingest_policy, "filter policy JSON");
    ingest->add_option("--out", ingest_out, "index output path");

    // curvature
    auto* curv = app.add_subcommand("curvature", "per-edge ORC and per-node LCF tables");
    std::string curv_graph, curv_complex, curv_out = "curvature";
    curv->add_option("--graph", curv_graph, "graph JSON {n, edges}");
    curv->add_option("--complex", curv_complex, "complex document");
    curv->add_option("--out-prefix", curv_out, "output prefix");

    // dump-graph
    auto* dump = app.add_subcommand("dump-graph", "complex graph as JSON");
    std::string dump_complex, dump_out = "graph.json";
    dump->add_option("--complex", dump_complex, "complex document")->required();
    dump->add_option("--out", dump_out, "output path");

    // featurize
    auto* feat = app.add_subcommand("featurize", "node feature tables (base + LCF)");
    std::string feat_complex, feat_emb, feat_atoms, feat_config, feat_out = "features";
    feat->add_option("--complex", feat_complex, "complex document")->required();
    feat->add_option("--embeddings", feat_emb, "residue embedding table (TSV or .bin)");
    feat->add_option("--atom-features", feat_atoms, "52-wide per-atom override TSV");
    feat->add_option("--config", feat_config, "config JSON");
    feat->add_option("--out-prefix", feat_out, "output prefix");

    // train
    auto* tr = app.add_subcommand("train", "optimize the model on a dataset");
    std::string tr_config, tr_emb, tr_out = "checkpoint.json", tr_log;
    std::vector<std::string> tr_data;
    AblationCli tr_abl;
    tr->add_option("--config", tr_config, "config JSON with model/train sections");
    tr->add_option("--data", tr_data, "complex files, directories, or an ingest index")
        ->required();
    tr->add_option("--embeddings", tr_emb, "residue embedding table");
    tr->add_option("--out", tr_out, "checkpoint output path");
    tr->add_option("--log", tr_log, "JSON-lines training log");
    tr_abl.attach(tr);

    // dock
    auto* dk = app.add_subcommand("dock", "predict pocket and pose");
    std::string dk_ckpt, dk_emb, dk_out = "poses";
    std::vector<std::string> dk_complexes;
    bool dk_trace = false, dk_xyz = false, dk_det = false;
    int dk_jobs = 1;
    dk->add_option("--checkpoint", dk_ckpt, "model checkpoint")->required();
    dk->add_option("--complexes", dk_complexes, "complex files or directories")->required();
    dk->add_option("--embeddings", dk_emb, "residue embedding table");
    dk->add_option("--out-dir", dk_out, "output directory");
    dk->add_flag("--trace", dk_trace, "keep per-iteration snapshots");
    dk->add_flag("--xyz", dk_xyz, "also write XYZ blocks");
    dk->add_option("--jobs", dk_jobs, "parallel complexes");
    dk->add_flag("--deterministic", dk_det, "force serial execution");

    // eval
    auto* ev = app.add_subcommand("eval", "LRMSD / centroid-distance tables");
    std::vector<std::string> ev_poses, ev_truth;
    std::string ev_out = "metrics";
    ev->add_option("--poses", ev_poses, "pose JSONs or directories")->required();
    ev->add_option("--truth", ev_truth, "truth complex documents")->required();
    ev->add_option("--out-prefix", ev_out, "output prefix");

    // synth
    auto* sy = app.add_subcommand("synth", "generate synthetic micro-complex documents");
    int sy_count = 5, sy_atoms = 5, sy_pocket = 8, sy_far = 4;
    std::string sy_out = "synthetic";
    sy->add_option("--count", sy_count, "number of complexes");
    sy->add_option("--out-dir", sy_out, "output directory");
    sy->add_option("--atoms", sy_atoms, "ligand atoms per complex");
    sy->add_option("--pocket", sy_pocket, "pocket residues per complex");
    sy->add_option("--far", sy_far, "distant residues per complex");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_config, gc_term = "all", gc_out;
    int gc_instances = 3, gc_coords = 50;
    gc->add_option("--config", gc_config, "config JSON");
    gc->add_option("--term", gc_term, "loss term (focal|center|radius|coord|distmap|total|all)");
    gc->add_option("--instances", gc_instances, "random instances per term");
    gc->add_option("--min-coords", gc_coords, "sampled coordinates per parameter block");
    gc->add_option("--out", gc_out, "report JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::uint64_t s = resolve_seed(seed, seed_given);
        if (ingest->parsed()) return cmd_ingest(ingest_inputs, ingest_policy, ingest_out, s);
        if (curv->parsed()) {
            if (curv_graph.empty() == curv_complex.empty())
                throw ValidationError("curvature: pass exactly one of --graph / --complex");
            return cmd_curvature(curv_graph, curv_complex, curv_out, s);
        }
        if (dump->parsed()) return cmd_dump_graph(dump_complex, dump_out, s);
        if (feat->parsed())
            return cmd_featurize(feat_complex, feat_emb, feat_atoms, feat_config, feat_out, s);
        if (tr->parsed())
            return cmd_train(tr_config, tr_data, tr_emb, tr_out, tr_log, tr_abl, s, seed_given);
        if (dk->parsed())
            return cmd_dock(dk_ckpt, dk_complexes, dk_emb, dk_out, dk_trace, dk_xyz, dk_jobs,
                            dk_det, s);
        if (ev->parsed()) return cmd_eval(ev_poses, ev_truth, ev_out, s);
        if (sy->parsed()) return cmd_synth(sy_count, sy_out, sy_atoms, sy_pocket, sy_far, s);
        if (gc->parsed())
            return cmd_gradcheck(gc_config, gc_term, gc_instances, gc_coords, gc_out, s);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
