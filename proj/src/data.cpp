#include "sguda/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sguda {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Query: return "query";
        default: return "gallery";
    }
}

DomainDataset::DomainDataset(Matrix features, std::vector<int> identities, std::vector<int> cameras,
                             Domain domain, Split split, bool hide_labels, bool truth_present)
    : features_(std::move(features)),
      identities_(std::move(identities)),
      cameras_(std::move(cameras)),
      domain_(domain),
      split_(split),
      labels_hidden_(hide_labels),
      truth_present_(truth_present) {
    if (identities_.size() != features_.rows || cameras_.size() != features_.rows)
        throw std::invalid_argument("DomainDataset: metadata length does not match feature rows");
}

const std::vector<int>& DomainDataset::identities() const {
    if (labels_hidden_)
        throw std::logic_error("identities of the " + std::string(domain_name(domain_)) + "-" +
                               split_name(split_) +
                               " set are hidden; only the evaluation diagnostics may read them");
    return identities_;
}

void SynthConfig::validate() const {
    if (source_identities < 1 || target_identities < 1 || samples_per_identity < 1 ||
        query_per_identity < 1)
        throw std::invalid_argument("synth config: counts must be >= 1");
    if (gallery_per_identity < 2)
        throw std::invalid_argument(
            "synth config: gallery_per_identity must be >= 2 so every query has a cross-camera match");
    if (num_cameras < 2) throw std::invalid_argument("synth config: num_cameras must be >= 2");
    if (latent_dim < 1 || input_dim < 1)
        throw std::invalid_argument("synth config: dims must be >= 1");
    if (domain_shift < 0 || camera_noise_std < 0 || sample_noise_std < 0)
        throw std::invalid_argument("synth config: magnitudes must be >= 0");
}

namespace {

struct SynthWorld {
    Matrix centroids;     // num_ids x latent
    Matrix embed_map;     // latent x input
    Matrix shift_map;     // input x input, I + shift*R
    Matrix shift_offset;  // 1 x input
    std::vector<Matrix> camera_offsets[kNumDomains];
};

DomainDataset make_split(const SynthConfig& cfg, const SynthWorld& world, Domain domain, Split split,
                         std::size_t per_identity, std::size_t camera_phase, Rng& rng) {
    const std::size_t num_ids =
        domain == Domain::Source ? cfg.source_identities : cfg.target_identities;
    const std::size_t n = num_ids * per_identity;
    Matrix features(n, cfg.input_dim);
    std::vector<int> ids(n), cams(n);

    std::size_t row = 0;
    for (std::size_t id = 0; id < num_ids; ++id) {
        Matrix centroid(1, cfg.latent_dim);
        std::copy(world.centroids.row(id), world.centroids.row(id) + cfg.latent_dim,
                  centroid.row(0));
        const Matrix base = matmul(centroid, world.embed_map);
        for (std::size_t j = 0; j < per_identity; ++j, ++row) {
            const std::size_t cam = (id + camera_phase + j) % cfg.num_cameras;
            const Matrix& cam_off = world.camera_offsets[static_cast<std::size_t>(domain)][cam];
            Matrix x = base;
            add_inplace(x, cam_off);
            for (std::size_t c = 0; c < cfg.input_dim; ++c)
                x.at(0, c) += rng.normal() * cfg.sample_noise_std;
            if (domain == Domain::Target) {
                Matrix y = matmul(x, world.shift_map);
                add_inplace(y, world.shift_offset);
                x = std::move(y);
            }
            std::copy(x.row(0), x.row(0) + cfg.input_dim, features.row(row));
            ids[row] = static_cast<int>(id);
            cams[row] = static_cast<int>(cam);
        }
    }
    const bool hide = domain == Domain::Target && split == Split::Train;
    return DomainDataset(std::move(features), std::move(ids), std::move(cams), domain, split, hide);
}

}  // namespace

TwoDomainData generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng rng_centroids = root.fork();
    Rng rng_embed = root.fork();
    Rng rng_shift = root.fork();
    Rng rng_cam = root.fork();
    Rng rng_source = root.fork();
    Rng rng_target = root.fork();

    SynthWorld world;
    const std::size_t num_ids = std::max(cfg.source_identities, cfg.target_identities);
    world.centroids = rng_centroids.normal_matrix(num_ids, cfg.latent_dim, 1.0);
    world.embed_map = rng_embed.normal_matrix(cfg.latent_dim, cfg.input_dim,
                                              1.0 / std::sqrt(static_cast<double>(cfg.latent_dim)));

    world.shift_map = rng_shift.normal_matrix(cfg.input_dim, cfg.input_dim,
                                              cfg.domain_shift / std::sqrt(static_cast<double>(cfg.input_dim)));
    for (std::size_t i = 0; i < cfg.input_dim; ++i) world.shift_map.at(i, i) += 1.0;
    world.shift_offset = rng_shift.normal_matrix(1, cfg.input_dim, cfg.domain_shift);

    for (std::size_t d = 0; d < kNumDomains; ++d)
        for (std::size_t c = 0; c < cfg.num_cameras; ++c)
            world.camera_offsets[d].push_back(rng_cam.normal_matrix(1, cfg.input_dim, cfg.camera_noise_std));

    TwoDomainData out;
    out.source_train = make_split(cfg, world, Domain::Source, Split::Train, cfg.samples_per_identity, 0, rng_source);
    out.source_query = make_split(cfg, world, Domain::Source, Split::Query, cfg.query_per_identity, 0, rng_source);
    out.source_gallery = make_split(cfg, world, Domain::Source, Split::Gallery, cfg.gallery_per_identity, 1, rng_source);
    out.target_train = make_split(cfg, world, Domain::Target, Split::Train, cfg.samples_per_identity, 0, rng_target);
    out.target_query = make_split(cfg, world, Domain::Target, Split::Query, cfg.query_per_identity, 0, rng_target);
    out.target_gallery = make_split(cfg, world, Domain::Target, Split::Gallery, cfg.gallery_per_identity, 1, rng_target);
    return out;
}

// ---------------------------------------------------------------------------
// CSV io

void save_csv(const DomainDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "domain,split,identity,camera";
    for (std::size_t c = 0; c < dataset.feature_dim(); ++c) out << ",f" << c;
    out << "\n";

    char buf[64];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const int id = dataset.labels_hidden() ? -1 : dataset.identities()[i];
        out << domain_name(dataset.domain()) << ',' << split_name(dataset.split()) << ',' << id << ','
            << dataset.cameras()[i];
        for (std::size_t c = 0; c < dataset.feature_dim(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", dataset.features().at(i, c));
            out << ',' << buf;
        }
        out << "\n";
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void line_error(const std::string& path, std::size_t lineno, const std::string& what) {
    throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + what);
}

long parse_int(const std::string& tok, const std::string& path, std::size_t lineno) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (errno != 0 || end == tok.c_str() || *end != '\0')
        line_error(path, lineno, "malformed integer '" + tok + "'");
    return v;
}

double parse_double(const std::string& tok, const std::string& path, std::size_t lineno) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (errno != 0 || end == tok.c_str() || *end != '\0')
        line_error(path, lineno, "malformed number '" + tok + "'");
    return v;
}

}  // namespace

DomainDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);
    if (header.size() < 5 || header[0] != "domain" || header[1] != "split" ||
        header[2] != "identity" || header[3] != "camera")
        throw std::runtime_error(path + ": schema error: expected header domain,split,identity,camera,f0..");
    const std::size_t dim = header.size() - 4;
    for (std::size_t c = 0; c < dim; ++c)
        if (header[4 + c] != "f" + std::to_string(c))
            throw std::runtime_error(path + ": schema error: expected column f" + std::to_string(c) +
                                     ", got " + header[4 + c]);

    std::vector<double> values;
    std::vector<int> ids, cams;
    std::string domain_str, split_str;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto toks = split_line(line);
        if (toks.size() != header.size())
            line_error(path, lineno,
                       "expected " + std::to_string(header.size()) + " columns, got " +
                           std::to_string(toks.size()));
        if (domain_str.empty()) {
            domain_str = toks[0];
            split_str = toks[1];
        } else if (toks[0] != domain_str || toks[1] != split_str) {
            line_error(path, lineno, "mixed domain/split values in one file");
        }
        ids.push_back(static_cast<int>(parse_int(toks[2], path, lineno)));
        cams.push_back(static_cast<int>(parse_int(toks[3], path, lineno)));
        for (std::size_t c = 0; c < dim; ++c)
            values.push_back(parse_double(toks[4 + c], path, lineno));
    }
    if (ids.empty()) throw std::runtime_error(path + ": no data rows");

    Domain domain;
    if (domain_str == "source") domain = Domain::Source;
    else if (domain_str == "target") domain = Domain::Target;
    else throw std::runtime_error(path + ": unknown domain '" + domain_str + "'");
    Split split;
    if (split_str == "train") split = Split::Train;
    else if (split_str == "query") split = Split::Query;
    else if (split_str == "gallery") split = Split::Gallery;
    else throw std::runtime_error(path + ": unknown split '" + split_str + "'");

    const bool any_hidden = std::any_of(ids.begin(), ids.end(), [](int v) { return v < 0; });
    if (any_hidden && !std::all_of(ids.begin(), ids.end(), [](int v) { return v == -1; }))
        throw std::runtime_error(path + ": identity -1 (hidden) must apply to every row or none");

    Matrix features(ids.size(), dim);
    features.data = std::move(values);

    // hidden exports carry no usable ground truth once loaded back
    return DomainDataset(std::move(features), std::move(ids), std::move(cams), domain, split,
                         any_hidden, !any_hidden);
}

// ---------------------------------------------------------------------------
// PK sampler

PkBatchSampler::PkBatchSampler(std::vector<int> labels, PkSamplerConfig cfg, Rng rng)
    : cfg_(cfg), rng_(rng) {
    if (cfg_.P < 2 || cfg_.K < 2)
        throw std::invalid_argument("pk sampler: P and K must both be >= 2");
    std::vector<int> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < cfg_.P)
        throw std::invalid_argument("pk sampler: need at least P=" + std::to_string(cfg_.P) +
                                    " distinct labels, got " + std::to_string(sorted.size()));
    label_ids_ = std::move(sorted);
    indices_by_label_.resize(label_ids_.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(label_ids_.begin(), label_ids_.end(), labels[i]);
        indices_by_label_[static_cast<std::size_t>(it - label_ids_.begin())].push_back(i);
    }
    order_ = rng_.permutation(label_ids_.size());
    in_batch_.assign(label_ids_.size(), 0);
}

int PkBatchSampler::next_label() {
    if (cursor_ == order_.size()) {
        order_ = rng_.permutation(label_ids_.size());
        cursor_ = 0;
    }
    // skip labels already in this batch; swap keeps the permutation contents
    std::size_t probe = cursor_;
    while (in_batch_[order_[probe]]) {
        ++probe;
        if (probe == order_.size())
            throw std::logic_error("pk sampler: exhausted permutation while filling a batch");
    }
    std::swap(order_[cursor_], order_[probe]);
    return static_cast<int>(order_[cursor_++]);
}

std::vector<std::size_t> PkBatchSampler::next_batch() {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size());
    std::vector<std::size_t> chosen;
    chosen.reserve(cfg_.P);

    for (std::size_t p = 0; p < cfg_.P; ++p) {
        const std::size_t li = static_cast<std::size_t>(next_label());
        in_batch_[li] = 1;
        chosen.push_back(li);
        const auto& pool = indices_by_label_[li];
        if (pool.size() >= cfg_.K) {
            // partial Fisher-Yates draw of K distinct indices
            std::vector<std::size_t> scratch = pool;
            for (std::size_t k = 0; k < cfg_.K; ++k) {
                const std::size_t j = k + static_cast<std::size_t>(rng_.uniform_int(scratch.size() - k));
                std::swap(scratch[k], scratch[j]);
                batch.push_back(scratch[k]);
            }
        } else {
            // with replacement: every available sample at least once
            for (std::size_t s : pool) batch.push_back(s);
            for (std::size_t k = pool.size(); k < cfg_.K; ++k)
                batch.push_back(pool[static_cast<std::size_t>(rng_.uniform_int(pool.size()))]);
        }
    }
    for (std::size_t li : chosen) in_batch_[li] = 0;
    return batch;
}

}  // namespace sguda
