#include "sguda/config_json.hpp"

#include <fstream>
#include <stdexcept>

namespace sguda {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
}

}  // namespace

ordered_json config_to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["mode"] = run_mode_name(cfg.mode);
    j["clusterer"] = clusterer_name(cfg.clusterer);

    ordered_json synth;
    synth["source_identities"] = cfg.synth.source_identities;
    synth["target_identities"] = cfg.synth.target_identities;
    synth["samples_per_identity"] = cfg.synth.samples_per_identity;
    synth["query_per_identity"] = cfg.synth.query_per_identity;
    synth["gallery_per_identity"] = cfg.synth.gallery_per_identity;
    synth["num_cameras"] = cfg.synth.num_cameras;
    synth["latent_dim"] = cfg.synth.latent_dim;
    synth["input_dim"] = cfg.synth.input_dim;
    synth["domain_shift"] = cfg.synth.domain_shift;
    synth["camera_noise_std"] = cfg.synth.camera_noise_std;
    synth["sample_noise_std"] = cfg.synth.sample_noise_std;
    synth["seed"] = cfg.synth.seed;
    j["synth"] = synth;

    ordered_json enc;
    enc["input_dim"] = cfg.encoder.input_dim;
    enc["block_dims"] = cfg.encoder.block_dims;
    enc["embed_dim"] = cfg.encoder.embed_dim;
    enc["shared_depth"] = cfg.encoder.shared_depth;
    enc["shared_batchnorm"] = cfg.encoder.shared_batchnorm;
    j["encoder"] = enc;

    ordered_json tri;
    tri["margin"] = cfg.triplet.margin;
    tri["reduction"] = cfg.triplet.reduction == Reduction::Mean ? "mean" : "sum";
    j["triplet"] = tri;

    ordered_json pk;
    pk["P"] = cfg.pk.P;
    pk["K"] = cfg.pk.K;
    j["pk"] = pk;

    ordered_json rr;
    rr["k1"] = cfg.rerank.k1;
    rr["k2"] = cfg.rerank.k2;
    rr["lambda"] = cfg.rerank.lambda;
    j["rerank"] = rr;

    ordered_json db;
    db["p"] = cfg.dbscan.p;
    db["min_samples"] = cfg.dbscan.min_samples;
    j["dbscan"] = db;

    j["kmeans_k"] = cfg.kmeans_k;

    ordered_json train;
    train["init_epochs"] = cfg.init_epochs;
    train["n_iter"] = cfg.n_iter;
    train["n_epoch"] = cfg.n_epoch;
    train["steps_per_epoch"] = cfg.steps_per_epoch;
    train["lr"] = cfg.adam.lr;
    train["weight_decay"] = cfg.adam.weight_decay;
    train["beta1"] = cfg.adam.beta1;
    train["beta2"] = cfg.adam.beta2;
    train["epsilon"] = cfg.adam.epsilon;
    train["lr_decay_epochs"] = cfg.lr_decay_epochs;
    train["lr_decay_factor"] = cfg.lr_decay_factor;
    j["train"] = train;

    ordered_json ev;
    ev["exclude_same_camera_same_id"] = cfg.protocol.exclude_same_camera_same_id;
    ev["cmc_ranks"] = cfg.protocol.cmc_ranks;
    j["eval"] = ev;

    j["source_term_scale"] = cfg.source_term_scale;
    return j;
}

PipelineConfig config_from_json(const json& j, PipelineConfig base) {
    check_keys(j,
               {"seed", "mode", "clusterer", "synth", "encoder", "triplet", "pk", "rerank", "dbscan",
                "kmeans_k", "train", "eval", "source_term_scale", "command"},
               "top level");
    PipelineConfig cfg = std::move(base);
    take(j, "seed", cfg.seed);
    if (j.contains("mode")) cfg.mode = run_mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("clusterer"))
        cfg.clusterer = clusterer_from_name(j.at("clusterer").get<std::string>());

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        check_keys(s,
                   {"source_identities", "target_identities", "samples_per_identity",
                    "query_per_identity", "gallery_per_identity", "num_cameras", "latent_dim",
                    "input_dim", "domain_shift", "camera_noise_std", "sample_noise_std", "seed"},
                   "synth");
        take(s, "source_identities", cfg.synth.source_identities);
        take(s, "target_identities", cfg.synth.target_identities);
        take(s, "samples_per_identity", cfg.synth.samples_per_identity);
        take(s, "query_per_identity", cfg.synth.query_per_identity);
        take(s, "gallery_per_identity", cfg.synth.gallery_per_identity);
        take(s, "num_cameras", cfg.synth.num_cameras);
        take(s, "latent_dim", cfg.synth.latent_dim);
        take(s, "input_dim", cfg.synth.input_dim);
        take(s, "domain_shift", cfg.synth.domain_shift);
        take(s, "camera_noise_std", cfg.synth.camera_noise_std);
        take(s, "sample_noise_std", cfg.synth.sample_noise_std);
        take(s, "seed", cfg.synth.seed);
    }
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        check_keys(e, {"input_dim", "block_dims", "embed_dim", "shared_depth", "shared_batchnorm"},
                   "encoder");
        take(e, "input_dim", cfg.encoder.input_dim);
        take(e, "block_dims", cfg.encoder.block_dims);
        take(e, "embed_dim", cfg.encoder.embed_dim);
        take(e, "shared_depth", cfg.encoder.shared_depth);
        take(e, "shared_batchnorm", cfg.encoder.shared_batchnorm);
    }
    if (j.contains("triplet")) {
        const json& t = j.at("triplet");
        check_keys(t, {"margin", "reduction"}, "triplet");
        take(t, "margin", cfg.triplet.margin);
        if (t.contains("reduction")) {
            const auto r = t.at("reduction").get<std::string>();
            if (r == "sum") cfg.triplet.reduction = Reduction::Sum;
            else if (r == "mean") cfg.triplet.reduction = Reduction::Mean;
            else throw std::invalid_argument("config: unknown reduction '" + r + "'");
        }
    }
    if (j.contains("pk")) {
        const json& p = j.at("pk");
        check_keys(p, {"P", "K"}, "pk");
        take(p, "P", cfg.pk.P);
        take(p, "K", cfg.pk.K);
    }
    if (j.contains("rerank")) {
        const json& r = j.at("rerank");
        check_keys(r, {"k1", "k2", "lambda"}, "rerank");
        take(r, "k1", cfg.rerank.k1);
        take(r, "k2", cfg.rerank.k2);
        take(r, "lambda", cfg.rerank.lambda);
    }
    if (j.contains("dbscan")) {
        const json& d = j.at("dbscan");
        check_keys(d, {"p", "min_samples"}, "dbscan");
        take(d, "p", cfg.dbscan.p);
        take(d, "min_samples", cfg.dbscan.min_samples);
    }
    take(j, "kmeans_k", cfg.kmeans_k);
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t,
                   {"init_epochs", "n_iter", "n_epoch", "steps_per_epoch", "lr", "weight_decay",
                    "beta1", "beta2", "epsilon", "lr_decay_epochs", "lr_decay_factor"},
                   "train");
        take(t, "init_epochs", cfg.init_epochs);
        take(t, "n_iter", cfg.n_iter);
        take(t, "n_epoch", cfg.n_epoch);
        take(t, "steps_per_epoch", cfg.steps_per_epoch);
        take(t, "lr", cfg.adam.lr);
        take(t, "weight_decay", cfg.adam.weight_decay);
        take(t, "beta1", cfg.adam.beta1);
        take(t, "beta2", cfg.adam.beta2);
        take(t, "epsilon", cfg.adam.epsilon);
        take(t, "lr_decay_epochs", cfg.lr_decay_epochs);
        take(t, "lr_decay_factor", cfg.lr_decay_factor);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"exclude_same_camera_same_id", "cmc_ranks"}, "eval");
        take(e, "exclude_same_camera_same_id", cfg.protocol.exclude_same_camera_same_id);
        take(e, "cmc_ranks", cfg.protocol.cmc_ranks);
    }
    take(j, "source_term_scale", cfg.source_term_scale);
    return cfg;
}

PipelineConfig load_config_file(const std::string& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config file " + path + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

std::string config_fingerprint(const PipelineConfig& cfg) {
    const std::string doc = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : doc) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace sguda
