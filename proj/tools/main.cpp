#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sguda/config_json.hpp"
#include "sguda/gradcheck.hpp"
#include "sguda/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct CommonArgs {
    std::string config_file;
    std::string out_dir;
    std::string data_dir;
};

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::size_t sweep_threads() {
    const char* env = std::getenv("SGUDA_THREADS");
    if (!env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v > 1 ? static_cast<std::size_t>(v) : 1;
}

// Flags override config-file values, which override defaults.
sguda::PipelineConfig resolve_config(const CLI::App* cmd, const sguda::PipelineConfig& flag_cfg,
                                     const std::string& config_file) {
    if (config_file.empty()) return flag_cfg;
    sguda::PipelineConfig cfg = sguda::load_config_file(config_file);

    const ordered_json flags = sguda::config_to_json(flag_cfg);
    json overlay = json::object();
    auto set_if_passed = [&](const char* flag, std::initializer_list<const char*> path) {
        if (cmd->count(flag) == 0) return;
        const json* src = &static_cast<const json&>(flags);
        json* dst = &overlay;
        for (auto it = path.begin(); it != path.end(); ++it) {
            src = &src->at(*it);
            if (it + 1 == path.end()) {
                (*dst)[*it] = *src;
            } else {
                dst = &(*dst)[*it];
            }
        }
    };

    set_if_passed("--seed", {"seed"});
    set_if_passed("--mode", {"mode"});
    set_if_passed("--clusterer", {"clusterer"});
    set_if_passed("--source-identities", {"synth", "source_identities"});
    set_if_passed("--target-identities", {"synth", "target_identities"});
    set_if_passed("--samples-per-identity", {"synth", "samples_per_identity"});
    set_if_passed("--query-per-identity", {"synth", "query_per_identity"});
    set_if_passed("--gallery-per-identity", {"synth", "gallery_per_identity"});
    set_if_passed("--cameras", {"synth", "num_cameras"});
    set_if_passed("--latent-dim", {"synth", "latent_dim"});
    set_if_passed("--input-dim", {"synth", "input_dim"});
    set_if_passed("--domain-shift", {"synth", "domain_shift"});
    set_if_passed("--camera-noise", {"synth", "camera_noise_std"});
    set_if_passed("--sample-noise", {"synth", "sample_noise_std"});
    set_if_passed("--input-dim", {"encoder", "input_dim"});
    set_if_passed("--blocks", {"encoder", "block_dims"});
    set_if_passed("--embed-dim", {"encoder", "embed_dim"});
    set_if_passed("--shared-depth", {"encoder", "shared_depth"});
    set_if_passed("--shared-bn", {"encoder", "shared_batchnorm"});
    set_if_passed("--margin", {"triplet", "margin"});
    set_if_passed("--mean-reduction", {"triplet", "reduction"});
    set_if_passed("--P", {"pk", "P"});
    set_if_passed("--K", {"pk", "K"});
    set_if_passed("--k1", {"rerank", "k1"});
    set_if_passed("--k2", {"rerank", "k2"});
    set_if_passed("--lambda", {"rerank", "lambda"});
    set_if_passed("--p", {"dbscan", "p"});
    set_if_passed("--min-samples", {"dbscan", "min_samples"});
    set_if_passed("--k", {"kmeans_k"});
    set_if_passed("--init-epochs", {"train", "init_epochs"});
    set_if_passed("--n-iter", {"train", "n_iter"});
    set_if_passed("--n-epoch", {"train", "n_epoch"});
    set_if_passed("--steps-per-epoch", {"train", "steps_per_epoch"});
    set_if_passed("--lr", {"train", "lr"});
    set_if_passed("--weight-decay", {"train", "weight_decay"});
    set_if_passed("--lr-decay-epochs", {"train", "lr_decay_epochs"});
    set_if_passed("--lr-decay-factor", {"train", "lr_decay_factor"});
    if (cmd->count("--seed")) overlay["synth"]["seed"] = flags["synth"]["seed"];

    return sguda::config_from_json(overlay, std::move(cfg));
}

// Flags shared by the training-style subcommands; writes into `cfg`.
void add_config_flags(CLI::App* cmd, sguda::PipelineConfig& cfg, bool with_seed_coupling = true) {
    (void)with_seed_coupling;
    cmd->add_option("--seed", cfg.seed, "master seed; all randomness flows from it")
        ->default_val(cfg.seed);
    cmd->add_option("--source-identities", cfg.synth.source_identities)->default_val(cfg.synth.source_identities);
    cmd->add_option("--target-identities", cfg.synth.target_identities)->default_val(cfg.synth.target_identities);
    cmd->add_option("--samples-per-identity", cfg.synth.samples_per_identity)->default_val(cfg.synth.samples_per_identity);
    cmd->add_option("--query-per-identity", cfg.synth.query_per_identity)->default_val(cfg.synth.query_per_identity);
    cmd->add_option("--gallery-per-identity", cfg.synth.gallery_per_identity)->default_val(cfg.synth.gallery_per_identity);
    cmd->add_option("--cameras", cfg.synth.num_cameras)->default_val(cfg.synth.num_cameras);
    cmd->add_option("--latent-dim", cfg.synth.latent_dim)->default_val(cfg.synth.latent_dim);
    cmd->add_option("--input-dim", cfg.synth.input_dim, "feature dimension (synthetic data and encoder input)")
        ->default_val(cfg.synth.input_dim);
    cmd->add_option("--domain-shift", cfg.synth.domain_shift)->default_val(cfg.synth.domain_shift);
    cmd->add_option("--camera-noise", cfg.synth.camera_noise_std)->default_val(cfg.synth.camera_noise_std);
    cmd->add_option("--sample-noise", cfg.synth.sample_noise_std)->default_val(cfg.synth.sample_noise_std);

    cmd->add_option("--blocks", cfg.encoder.block_dims, "hidden block widths")->delimiter(',');
    cmd->add_option("--embed-dim", cfg.encoder.embed_dim)->default_val(cfg.encoder.embed_dim);
    cmd->add_option("--shared-depth", cfg.encoder.shared_depth, "shared trunk blocks s in [0, L]")
        ->default_val(cfg.encoder.shared_depth);
    cmd->add_flag("--shared-bn", cfg.encoder.shared_batchnorm,
                  "share batch-norm statistics across domains (ablation)");

    cmd->add_option("--margin", cfg.triplet.margin)->default_val(cfg.triplet.margin);
    cmd->add_flag_callback(
        "--mean-reduction", [&cfg] { cfg.triplet.reduction = sguda::Reduction::Mean; },
        "mean instead of sum reduction in the losses");
    cmd->add_option("--P", cfg.pk.P, "identities per batch")->default_val(cfg.pk.P);
    cmd->add_option("--K", cfg.pk.K, "samples per identity per batch")->default_val(cfg.pk.K);
    cmd->add_option("--k1", cfg.rerank.k1)->default_val(cfg.rerank.k1);
    cmd->add_option("--k2", cfg.rerank.k2)->default_val(cfg.rerank.k2);
    cmd->add_option("--lambda", cfg.rerank.lambda)->default_val(cfg.rerank.lambda);
    cmd->add_option("--p", cfg.dbscan.p, "fraction of smallest pair distances defining DBSCAN eps")
        ->default_val(cfg.dbscan.p);
    cmd->add_option("--min-samples", cfg.dbscan.min_samples)->default_val(cfg.dbscan.min_samples);
    cmd->add_option("--k", cfg.kmeans_k, "k-means cluster count")->default_val(cfg.kmeans_k);

    cmd->add_option("--init-epochs", cfg.init_epochs)->default_val(cfg.init_epochs);
    cmd->add_option("--n-iter", cfg.n_iter, "pseudo-labeling iterations")->default_val(cfg.n_iter);
    cmd->add_option("--n-epoch", cfg.n_epoch, "epochs per iteration")->default_val(cfg.n_epoch);
    cmd->add_option("--steps-per-epoch", cfg.steps_per_epoch)->default_val(cfg.steps_per_epoch);
    cmd->add_option("--lr", cfg.adam.lr)->default_val(cfg.adam.lr);
    cmd->add_option("--weight-decay", cfg.adam.weight_decay)->default_val(cfg.adam.weight_decay);
    cmd->add_option("--lr-decay-epochs", cfg.lr_decay_epochs)->delimiter(',');
    cmd->add_option("--lr-decay-factor", cfg.lr_decay_factor)->default_val(cfg.lr_decay_factor);
}

void write_resolved(const sguda::PipelineConfig& cfg, const std::string& command,
                    const std::string& out_dir, const ordered_json& extra = {}) {
    fs::create_directories(out_dir);
    ordered_json j;
    j["command"] = command;
    for (auto& [k, v] : sguda::config_to_json(cfg).items()) j[k] = v;
    for (auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream out(fs::path(out_dir) / "config_resolved.json");
    if (!out) throw std::runtime_error("cannot write config_resolved.json under " + out_dir);
    out << j.dump(2) << "\n";
}

sguda::DomainDataset load_part(const std::string& dir, const char* name) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".csv");
    if (!fs::exists(p)) throw std::runtime_error("missing dataset file: " + p.string());
    return sguda::load_csv(p.string());
}

sguda::TwoDomainData obtain_data(const CommonArgs& args, sguda::PipelineConfig& cfg) {
    if (args.data_dir.empty()) {
        cfg.synth.seed = cfg.synth.seed;  // already coupled to --seed at parse time
        return sguda::generate(cfg.synth);
    }
    sguda::TwoDomainData data;
    data.source_train = load_part(args.data_dir, "source_train");
    data.source_query = load_part(args.data_dir, "source_query");
    data.source_gallery = load_part(args.data_dir, "source_gallery");
    data.target_train = load_part(args.data_dir, "target_train");
    data.target_query = load_part(args.data_dir, "target_query");
    data.target_gallery = load_part(args.data_dir, "target_gallery");
    const std::size_t dim = data.source_train.feature_dim();
    cfg.encoder.input_dim = dim;
    cfg.synth.input_dim = dim;
    return data;
}

int cmd_generate(const CommonArgs& args, sguda::PipelineConfig cfg) {
    cfg.synth.validate();
    const sguda::TwoDomainData data = sguda::generate(cfg.synth);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    sguda::save_csv(data.source_train, (out / "source_train.csv").string());
    sguda::save_csv(data.source_query, (out / "source_query.csv").string());
    sguda::save_csv(data.source_gallery, (out / "source_gallery.csv").string());
    sguda::save_csv(data.target_train, (out / "target_train.csv").string());
    sguda::save_csv(data.target_query, (out / "target_query.csv").string());
    sguda::save_csv(data.target_gallery, (out / "target_gallery.csv").string());
    write_resolved(cfg, "generate", args.out_dir);
    std::cout << "wrote 6 datasets under " << args.out_dir << "\n";
    return 0;
}

int cmd_init_train(const CommonArgs& args, sguda::PipelineConfig cfg) {
    sguda::TwoDomainData data = obtain_data(args, cfg);
    cfg.validate();
    write_resolved(cfg, "init-train", args.out_dir);

    sguda::Rng rng(cfg.seed);
    sguda::Rng rng_init = rng.fork();
    std::vector<sguda::LossCurvePoint> curve;
    sguda::TrainInitResult init = sguda::train_init(data.source_train, cfg, rng_init, &curve);

    const fs::path out(args.out_dir);
    sguda::save_encoder_file(init.encoder, (out / "checkpoint.bin").string());

    std::ofstream csv(out / "loss_curve.csv");
    csv << "phase,iteration,epoch,step,loss_total,loss_source,loss_target\n";
    for (const auto& p : curve)
        csv << p.phase << ',' << p.iteration << ',' << p.epoch << ',' << p.step << ','
            << fmt17(p.total) << ',' << fmt17(p.source) << ',' << fmt17(p.target) << "\n";

    sguda::EvalReport rep = sguda::evaluate(data.source_query, data.source_gallery, init.encoder,
                                            sguda::Domain::Source, cfg.protocol);
    rep.config_fingerprint = sguda::config_fingerprint(cfg);
    rep.seed = cfg.seed;
    sguda::save_report_json(rep, (out / "report_source.json").string());
    std::cout << "init-train done; source mAP " << rep.map << "\n";
    return 0;
}

int cmd_uda_run(const CommonArgs& args, sguda::PipelineConfig cfg) {
    sguda::TwoDomainData data = obtain_data(args, cfg);
    cfg.validate();
    write_resolved(cfg, "uda-run", args.out_dir,
                   ordered_json{{"data", args.data_dir.empty() ? ordered_json(nullptr)
                                                               : ordered_json(args.data_dir)}});
    const sguda::RunArtifacts artifacts = sguda::run(cfg, data);
    sguda::write_artifacts(artifacts, args.out_dir);
    std::cout << "mode " << sguda::run_mode_name(cfg.mode) << ": direct-transfer mAP "
              << artifacts.init_report.map;
    if (!artifacts.iterations.empty())
        std::cout << ", final mAP " << artifacts.final_report().map << " after "
                  << artifacts.iterations.size() << " iterations";
    std::cout << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args, sguda::PipelineConfig cfg, std::string axis_name,
              std::vector<double> values) {
    if (!args.config_file.empty() && (axis_name.empty() || values.empty())) {
        std::ifstream in(args.config_file);
        json j;
        in >> j;
        if (axis_name.empty() && j.contains("axis")) axis_name = j.at("axis").get<std::string>();
        if (values.empty() && j.contains("values")) values = j.at("values").get<std::vector<double>>();
    }
    if (axis_name.empty()) throw std::invalid_argument("sweep: --axis is required");
    if (values.empty()) throw std::invalid_argument("sweep: --values is required");
    const sguda::SweepAxis axis = sguda::sweep_axis_from_name(axis_name);

    sguda::TwoDomainData data = obtain_data(args, cfg);
    cfg.validate();
    write_resolved(cfg, "sweep", args.out_dir,
                   ordered_json{{"axis", axis_name}, {"values", values}});

    const sguda::SweepResult result = sguda::sweep(cfg, axis, values, data, sweep_threads());
    sguda::write_sweep_csv(result, (fs::path(args.out_dir) / "sweep.csv").string());
    for (const auto& cell : result.cells) {
        std::cout << axis_name << "=" << cell.value << ": ";
        if (cell.ok)
            std::cout << "mAP " << cell.final_report.map << "\n";
        else
            std::cout << "error: " << cell.error << "\n";
    }
    std::cout << "mAP std over values: " << result.map_std << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args, sguda::PipelineConfig cfg, const std::string& checkpoint) {
    if (args.data_dir.empty())
        throw std::invalid_argument("evaluate: --data is required (target_query/target_gallery CSVs)");
    sguda::DomainDataset query = load_part(args.data_dir, "target_query");
    sguda::DomainDataset gallery = load_part(args.data_dir, "target_gallery");
    sguda::TwoBranchEncoder enc = sguda::load_encoder_file_as_two_branch(checkpoint);

    write_resolved(cfg, "evaluate", args.out_dir,
                   ordered_json{{"checkpoint", checkpoint}, {"data", args.data_dir}});
    sguda::EvalReport rep =
        sguda::evaluate(query, gallery, enc, sguda::Domain::Target, cfg.protocol);
    rep.config_fingerprint = sguda::config_fingerprint(cfg);
    rep.seed = cfg.seed;
    sguda::save_report_json(rep, (fs::path(args.out_dir) / "report.json").string());
    std::cout << "mAP " << rep.map << " cmc1 " << rep.cmc_at(1) << " over " << rep.num_queries
              << " queries\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& out_dir) {
    const sguda::GradCheckReport report = sguda::run_full_gradcheck(seed);
    for (const auto& c : report.cases)
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  max rel err "
                  << fmt17(c.max_rel_err) << " (tol " << c.tolerance << ")\n";
    std::cout << (report.all_pass ? "gradcheck passed" : "gradcheck FAILED") << " in "
              << report.seconds << " s\n";
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        ordered_json j;
        j["seed"] = seed;
        j["all_pass"] = report.all_pass;
        ordered_json cases = ordered_json::array();
        for (const auto& c : report.cases)
            cases.push_back({{"name", c.name},
                             {"max_rel_err", c.max_rel_err},
                             {"tolerance", c.tolerance},
                             {"pass", c.pass}});
        j["cases"] = cases;
        std::ofstream out(fs::path(out_dir) / "gradcheck_report.json");
        out << j.dump(2) << "\n";
    }
    return report.all_pass ? 0 : 1;
}

int cmd_plot_data(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const fs::path sweep_csv = dir / "sweep.csv";
    const fs::path out_path = dir / "map_vs_axis.csv";

    if (fs::exists(sweep_csv)) {
        std::ifstream in(sweep_csv);
        std::string line;
        std::getline(in, line);  // header
        std::ofstream out(out_path);
        out << "value,map,cmc1,map_std\n";
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> tok;
            std::size_t start = 0;
            while (true) {
                const auto pos = line.find(',', start);
                if (pos == std::string::npos) {
                    tok.push_back(line.substr(start));
                    break;
                }
                tok.push_back(line.substr(start, pos - start));
                start = pos + 1;
            }
            if (tok.size() < 7 || tok[2] != "ok") continue;
            out << tok[1] << ',' << tok[3] << ',' << tok[4] << ',' << tok[5] << "\n";
        }
        std::cout << "wrote " << out_path.string() << "\n";
        return 0;
    }

    if (fs::exists(dir / "report_iter1.json")) {
        std::ofstream out(out_path);
        out << "value,map,cmc1,map_std\n";
        for (std::size_t t = 1;; ++t) {
            const fs::path rp = dir / ("report_iter" + std::to_string(t) + ".json");
            if (!fs::exists(rp)) break;
            std::ifstream in(rp);
            json j;
            in >> j;
            out << t << ',' << fmt17(j.at("map").get<double>()) << ','
                << fmt17(j.at("cmc").at("top1").get<double>()) << ",\n";
        }
        std::cout << "wrote " << out_path.string() << " (mAP per iteration)\n";
        return 0;
    }

    throw std::runtime_error("no artifacts in " + run_dir +
                             ": expected sweep.csv or report_iter1.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"source-guided pseudo-labeling domain adaptation on synthetic re-ID data"};
    app.require_subcommand(1);

    sguda::PipelineConfig defaults;

    CommonArgs args;
    sguda::PipelineConfig cfg_gen = defaults, cfg_init = defaults, cfg_run = defaults,
                          cfg_sweep = defaults, cfg_eval = defaults;

    auto* generate = app.add_subcommand("generate", "write a synthetic two-domain dataset as CSV");
    generate->add_option("--out", args.out_dir, "output directory")->required();
    generate->add_option("--config", args.config_file, "JSON config file (flags override)");
    add_config_flags(generate, cfg_gen);

    auto* init_train = app.add_subcommand("init-train", "supervised initialization on the source domain");
    init_train->add_option("--out", args.out_dir)->required();
    init_train->add_option("--config", args.config_file);
    init_train->add_option("--data", args.data_dir, "dataset directory from `generate` (default: synthesize)");
    add_config_flags(init_train, cfg_init);

    auto* uda_run = app.add_subcommand("uda-run", "full pseudo-labeling adaptation run");
    uda_run->add_option("--out", args.out_dir)->required();
    uda_run->add_option("--config", args.config_file);
    uda_run->add_option("--data", args.data_dir);
    std::string mode_name = "source_guided", clusterer_name_arg = "dbscan";
    uda_run->add_option("--mode", mode_name, "source_guided|target_only|source_only")
        ->check(CLI::IsMember({"source_guided", "target_only", "source_only"}))
        ->default_val(mode_name);
    uda_run->add_option("--clusterer", clusterer_name_arg, "dbscan|kmeans")
        ->check(CLI::IsMember({"dbscan", "kmeans"}))
        ->default_val(clusterer_name_arg);
    add_config_flags(uda_run, cfg_run);

    auto* sweep_cmd = app.add_subcommand("sweep", "run once per axis value and tabulate mAP");
    sweep_cmd->add_option("--out", args.out_dir)->required();
    sweep_cmd->add_option("--config", args.config_file);
    sweep_cmd->add_option("--data", args.data_dir);
    std::string sweep_axis, sweep_mode = "source_guided", sweep_clusterer = "dbscan";
    std::vector<double> sweep_values;
    sweep_cmd->add_option("--axis", sweep_axis, "p|k|shared_depth")
        ->check(CLI::IsMember({"p", "k", "shared_depth"}));
    sweep_cmd->add_option("--values", sweep_values, "comma-separated axis values")->delimiter(',');
    sweep_cmd->add_option("--mode", sweep_mode)
        ->check(CLI::IsMember({"source_guided", "target_only", "source_only"}))
        ->default_val(sweep_mode);
    sweep_cmd->add_option("--clusterer", sweep_clusterer)
        ->check(CLI::IsMember({"dbscan", "kmeans"}))
        ->default_val(sweep_clusterer);
    add_config_flags(sweep_cmd, cfg_sweep);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on target query/gallery");
    evaluate_cmd->add_option("--out", args.out_dir)->required();
    evaluate_cmd->add_option("--config", args.config_file);
    evaluate_cmd->add_option("--data", args.data_dir)->required();
    std::string checkpoint;
    evaluate_cmd->add_option("--checkpoint", checkpoint)->required();
    evaluate_cmd->add_option("--seed", cfg_eval.seed)->default_val(cfg_eval.seed);

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::uint64_t gc_seed = 42;
    std::string gc_out;
    gradcheck_cmd->add_option("--seed", gc_seed)->default_val(gc_seed);
    gradcheck_cmd->add_option("--out", gc_out, "optional report directory");

    auto* plot_cmd = app.add_subcommand("plot-data", "emit map_vs_axis.csv from run artifacts");
    std::string run_dir;
    plot_cmd->add_option("--run", run_dir, "run or sweep output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) {
            sguda::PipelineConfig cfg = resolve_config(generate, cfg_gen, args.config_file);
            if (generate->count("--seed")) cfg.synth.seed = cfg.seed;
            else if (args.config_file.empty()) cfg.synth.seed = cfg.seed;
            return cmd_generate(args, cfg);
        }
        if (init_train->parsed()) {
            sguda::PipelineConfig cfg = resolve_config(init_train, cfg_init, args.config_file);
            if (init_train->count("--seed") || args.config_file.empty()) cfg.synth.seed = cfg.seed;
            return cmd_init_train(args, cfg);
        }
        if (uda_run->parsed()) {
            cfg_run.mode = sguda::run_mode_from_name(mode_name);
            cfg_run.clusterer = sguda::clusterer_from_name(clusterer_name_arg);
            sguda::PipelineConfig cfg = resolve_config(uda_run, cfg_run, args.config_file);
            if (uda_run->count("--mode")) cfg.mode = sguda::run_mode_from_name(mode_name);
            if (uda_run->count("--clusterer"))
                cfg.clusterer = sguda::clusterer_from_name(clusterer_name_arg);
            if (uda_run->count("--seed") || args.config_file.empty()) cfg.synth.seed = cfg.seed;
            return cmd_uda_run(args, cfg);
        }
        if (sweep_cmd->parsed()) {
            cfg_sweep.mode = sguda::run_mode_from_name(sweep_mode);
            cfg_sweep.clusterer = sguda::clusterer_from_name(sweep_clusterer);
            sguda::PipelineConfig cfg = resolve_config(sweep_cmd, cfg_sweep, args.config_file);
            if (sweep_cmd->count("--mode")) cfg.mode = sguda::run_mode_from_name(sweep_mode);
            if (sweep_cmd->count("--clusterer"))
                cfg.clusterer = sguda::clusterer_from_name(sweep_clusterer);
            if (sweep_cmd->count("--seed") || args.config_file.empty()) cfg.synth.seed = cfg.seed;
            return cmd_sweep(args, cfg, sweep_axis, sweep_values);
        }
        if (evaluate_cmd->parsed()) {
            sguda::PipelineConfig cfg = resolve_config(evaluate_cmd, cfg_eval, args.config_file);
            return cmd_evaluate(args, cfg, checkpoint);
        }
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc_seed, gc_out);
        if (plot_cmd->parsed()) return cmd_plot_data(run_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
