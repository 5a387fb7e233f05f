#include "sguda/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "sguda/config_json.hpp"

namespace sguda {

const char* clusterer_name(Clusterer c) { return c == Clusterer::Dbscan ? "dbscan" : "kmeans"; }

const char* run_mode_name(RunMode m) {
    switch (m) {
        case RunMode::SourceGuided: return "source_guided";
        case RunMode::TargetOnly: return "target_only";
        default: return "source_only";
    }
}

Clusterer clusterer_from_name(const std::string& name) {
    if (name == "dbscan") return Clusterer::Dbscan;
    if (name == "kmeans") return Clusterer::Kmeans;
    throw std::invalid_argument("unknown clusterer '" + name + "'");
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "source_guided") return RunMode::SourceGuided;
    if (name == "target_only") return RunMode::TargetOnly;
    if (name == "source_only") return RunMode::SourceOnly;
    throw std::invalid_argument("unknown mode '" + name + "'");
}

const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::P: return "p";
        case SweepAxis::K: return "k";
        default: return "shared_depth";
    }
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "p") return SweepAxis::P;
    if (name == "k") return SweepAxis::K;
    if (name == "shared_depth") return SweepAxis::SharedDepth;
    throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

void PipelineConfig::validate() const {
    synth.validate();
    encoder.validate();
    rerank.validate();
    dbscan.validate();
    if (triplet.margin < 0.0) throw std::invalid_argument("triplet margin must be >= 0");
    if (pk.P < 2 || pk.K < 2) throw std::invalid_argument("PK sampler needs P >= 2 and K >= 2");
    if (n_iter < 1 || n_epoch < 1 || init_epochs < 1 || steps_per_epoch < 1)
        throw std::invalid_argument("epoch/iteration counts must be >= 1");
    if (clusterer == Clusterer::Kmeans && kmeans_k < 2)
        throw std::invalid_argument("kmeans_k must be >= 2");
}

std::pair<std::vector<int>, std::size_t> compact_labels(const std::vector<int>& labels) {
    std::vector<int> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), labels[i]);
        out[i] = static_cast<int>(it - sorted.begin());
    }
    return {out, sorted.size()};
}

namespace {

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

void check_finite_loss(double loss, const std::string& context) {
    if (!std::isfinite(loss))
        throw std::runtime_error("non-finite loss (" + std::to_string(loss) + ") during " + context);
}

}  // namespace

TrainInitResult train_init(const DomainDataset& source_train, const PipelineConfig& cfg, Rng& rng,
                           std::vector<LossCurvePoint>* curve) {
    if (source_train.labels_hidden())
        throw std::invalid_argument("train_init: source train labels must be visible");

    TrainInitResult res;
    auto [labels, num_ids] = compact_labels(source_train.identities());
    res.compacted_source_labels = labels;

    Rng rng_weights = rng.fork();
    Rng rng_head = rng.fork();
    Rng rng_sampler = rng.fork();

    res.encoder = SingleEncoder(cfg.encoder, rng_weights);
    res.source_head = make_classifier_head(cfg.encoder.embed_dim, num_ids, rng_head);

    PkBatchSampler sampler(labels, cfg.pk, rng_sampler);
    Adam opt(cfg.adam);
    opt.add_params(res.encoder.parameters());
    opt.add_params({&res.source_head.weight});

    const LrSchedule schedule = cfg.init_schedule();
    for (std::size_t epoch = 0; epoch < cfg.init_epochs; ++epoch) {
        opt.set_lr(lr_at(schedule, epoch));
        for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
            const auto batch = sampler.next_batch();
            const Matrix x = gather_rows(source_train.features(), batch);
            const std::vector<int> y = gather_labels(labels, batch);

            opt.zero_grad();
            const Matrix emb = res.encoder.forward(x, Domain::Source, Mode::Train);
            DomainLossResult loss = domain_loss(emb, y, res.source_head, cfg.triplet);
            check_finite_loss(loss.loss, "init epoch " + std::to_string(epoch) + " step " +
                                             std::to_string(step));
            res.encoder.backward(loss.grad_embeddings);
            add_inplace(res.source_head.weight.grad, loss.grad_head);
            opt.step();

            if (curve)
                curve->push_back({"init", 0, epoch, step, loss.loss, loss.loss, 0.0});
        }
    }
    return res;
}

RunArtifacts run(const PipelineConfig& cfg, const TwoDomainData& data) {
    cfg.validate();

    RunArtifacts artifacts;
    artifacts.mode = cfg.mode;
    artifacts.config_fingerprint = config_fingerprint(cfg);

    Rng root(cfg.seed);
    Rng rng_init = root.fork();
    Rng rng_src_sampler = root.fork();
    Rng rng_tgt_sampler = root.fork();
    Rng rng_cluster = root.fork();
    Rng rng_head = root.fork();

    TrainInitResult init = train_init(data.source_train, cfg, rng_init, &artifacts.loss_curve);

    auto stamp = [&](EvalReport& r) {
        r.config_fingerprint = artifacts.config_fingerprint;
        r.seed = cfg.seed;
    };

    // direct-transfer reference: the initial encoder applied to the target
    artifacts.init_report =
        evaluate(data.target_query, data.target_gallery, init.encoder, Domain::Source, cfg.protocol);
    stamp(artifacts.init_report);

    if (cfg.mode == RunMode::SourceOnly) {
        EncoderConfig wrap_cfg = cfg.encoder;
        wrap_cfg.shared_depth = wrap_cfg.num_blocks();
        artifacts.final_encoder = init_two_branch(init.encoder, wrap_cfg);
        return artifacts;
    }

    TwoBranchEncoder encoder = init_two_branch(init.encoder, cfg.encoder);
    ClassifierHead source_head = std::move(init.source_head);
    source_head.weight.adam = AdamState{};
    source_head.weight.zero_grad();

    const Matrix& target_features = data.target_train.features();

    for (std::size_t t = 1; t <= cfg.n_iter; ++t) {
        const std::string iter_ctx = "iteration " + std::to_string(t);

        // one clustering per iteration
        const Matrix target_emb = encoder.forward(target_features, Domain::Target, Mode::Eval);
        PseudoLabelSet pseudo;
        if (cfg.frozen_target_labels) {
            pseudo.labels = *cfg.frozen_target_labels;
            auto [compacted, m] = compact_labels(pseudo.labels);
            pseudo.labels = compacted;
            pseudo.num_clusters = m;
        } else if (cfg.clusterer == Clusterer::Dbscan) {
            const Matrix reranked = k_reciprocal_distances(target_emb, cfg.rerank);
            const double eps = eps_from_p(reranked, cfg.dbscan.p);
            pseudo = dbscan(reranked, eps, cfg.dbscan.min_samples);
        } else {
            pseudo = kmeans(target_emb, cfg.kmeans_k, rng_cluster);
        }

        PseudoAssignment assignment;
        try {
            assignment = assign_pseudo_labels(pseudo);
        } catch (const std::exception& e) {
            throw std::runtime_error(iter_ctx + ": " + e.what());
        }

        ClassifierHead target_head =
            make_classifier_head(cfg.encoder.embed_dim, assignment.num_clusters, rng_head);

        Adam opt(cfg.adam);
        std::vector<int> source_labels;
        std::optional<PkBatchSampler> src_sampler;
        if (cfg.mode == RunMode::SourceGuided) {
            opt.add_params(encoder.all_parameters());
            opt.add_params({&source_head.weight, &target_head.weight});
            source_labels = init.compacted_source_labels;
            src_sampler.emplace(source_labels, cfg.pk, rng_src_sampler.fork());
        } else {
            opt.add_params(encoder.parameters(Domain::Target));
            opt.add_params({&target_head.weight});
        }
        PkBatchSampler tgt_sampler(assignment.labels, cfg.pk, rng_tgt_sampler.fork());

        for (std::size_t epoch = 0; epoch < cfg.n_epoch; ++epoch) {
            for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
                const auto tb = tgt_sampler.next_batch();
                std::vector<std::size_t> tgt_rows(tb.size());
                for (std::size_t i = 0; i < tb.size(); ++i)
                    tgt_rows[i] = assignment.sample_indices[tb[i]];
                const Matrix xt = gather_rows(target_features, tgt_rows);
                const std::vector<int> yt = gather_labels(assignment.labels, tb);

                opt.zero_grad();
                double total = 0.0, ls = 0.0, lt = 0.0;
                if (cfg.mode == RunMode::SourceGuided) {
                    const auto sb = src_sampler->next_batch();
                    const Matrix xs = gather_rows(data.source_train.features(), sb);
                    const std::vector<int> ys = gather_labels(source_labels, sb);
                    const JointLossResult joint =
                        joint_loss(encoder, xs, ys, source_head, xt, yt, target_head, cfg.triplet,
                                   cfg.source_term_scale);
                    total = joint.total;
                    ls = joint.source_loss;
                    lt = joint.target_loss;
                } else {
                    const Matrix emb = encoder.forward(xt, Domain::Target, Mode::Train);
                    DomainLossResult loss = domain_loss(emb, yt, target_head, cfg.triplet);
                    encoder.backward(Domain::Target, loss.grad_embeddings);
                    add_inplace(target_head.weight.grad, loss.grad_head);
                    total = lt = loss.loss;
                }
                check_finite_loss(total, iter_ctx + " epoch " + std::to_string(epoch) + " step " +
                                             std::to_string(step));
                opt.step();
                artifacts.loss_curve.push_back({"uda", t, epoch, step, total, ls, lt});
            }
        }

        IterationRecord record;
        record.iteration = t;
        record.report = evaluate(data.target_query, data.target_gallery, encoder, Domain::Target,
                                 cfg.protocol);
        record.report.has_diagnostics = true;
        record.report.diagnostics = cluster_diagnostics(pseudo, data.target_train);
        stamp(record.report);
        record.pseudo = std::move(pseudo);
        record.surviving_clusters = assignment.num_clusters;
        record.head_classes = target_head.num_classes();
        artifacts.iterations.push_back(std::move(record));
    }

    artifacts.final_encoder = std::move(encoder);
    return artifacts;
}

void write_artifacts(const RunArtifacts& artifacts, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);

    save_report_json(artifacts.init_report, (root / "report_init.json").string());
    for (const auto& rec : artifacts.iterations) {
        const std::string t = std::to_string(rec.iteration);
        save_report_json(rec.report, (root / ("report_iter" + t + ".json")).string());
        save_pseudo_csv(rec.pseudo, (root / ("pseudo_iter" + t + ".csv")).string());
    }

    std::ofstream curve((root / "loss_curve.csv").string());
    if (!curve) throw std::runtime_error("cannot write loss_curve.csv under " + dir);
    curve << "phase,iteration,epoch,step,loss_total,loss_source,loss_target\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& p : artifacts.loss_curve)
        curve << p.phase << ',' << p.iteration << ',' << p.epoch << ',' << p.step << ','
              << fmt(p.total) << ',' << fmt(p.source) << ',' << fmt(p.target) << "\n";
    curve.close();

    save_encoder_file(artifacts.final_encoder, (root / "checkpoint.bin").string());
}

namespace {

double population_std(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

void apply_axis(PipelineConfig& cfg, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::P:
            cfg.dbscan.p = value;
            break;
        case SweepAxis::K:
            cfg.kmeans_k = static_cast<std::size_t>(std::llround(value));
            break;
        case SweepAxis::SharedDepth:
            cfg.encoder.shared_depth = static_cast<std::size_t>(std::llround(value));
            break;
    }
}

}  // namespace

SweepResult sweep(const PipelineConfig& base, SweepAxis axis, const std::vector<double>& values,
                  const TwoDomainData& data, std::size_t max_threads) {
    if (values.empty()) throw std::invalid_argument("sweep: no values given");

    SweepResult result;
    result.axis = axis;
    result.cells.resize(values.size());

    auto run_cell = [&](std::size_t i) {
        SweepCell& cell = result.cells[i];
        cell.value = values[i];
        try {
            PipelineConfig cfg = base;
            apply_axis(cfg, axis, values[i]);
            cfg.validate();
            const RunArtifacts artifacts = run(cfg, data);
            cell.final_report = artifacts.final_report();
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    };

    if (max_threads <= 1 || values.size() == 1) {
        for (std::size_t i = 0; i < values.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t workers = std::min(max_threads, values.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < values.size(); i = next.fetch_add(1))
                    run_cell(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<double> maps, cmc1s;
    for (const auto& cell : result.cells) {
        if (!cell.ok) continue;
        maps.push_back(cell.final_report.map);
        cmc1s.push_back(cell.final_report.cmc_at(1));
    }
    result.map_std = population_std(maps);
    result.cmc1_std = population_std(cmc1s);
    return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "axis,value,status,map,cmc1,map_std,cmc1_std,error\n";
    for (const auto& cell : result.cells) {
        out << sweep_axis_name(result.axis) << ',' << fmt(cell.value) << ','
            << (cell.ok ? "ok" : "error") << ',';
        if (cell.ok)
            out << fmt(cell.final_report.map) << ',' << fmt(cell.final_report.cmc_at(1));
        else
            out << ',';
        out << ',' << fmt(result.map_std) << ',' << fmt(result.cmc1_std) << ',';
        // commas in error messages would break the row
        std::string err = cell.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        out << err << "\n";
    }
}

}  // namespace sguda
