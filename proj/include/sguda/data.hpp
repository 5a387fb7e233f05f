#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sguda/nn.hpp"
#include "sguda/rng.hpp"
#include "sguda/tensor.hpp"

namespace sguda {

class HiddenLabelAccess;  // defined by the eval module, the sole reader of hidden labels

enum class Split { Train, Query, Gallery };

const char* split_name(Split s);

// Samples of one domain and split. Target-train identities are generated with
// ground truth but kept behind an eval-only accessor; the public identities()
// raises for them so the training path cannot read them.
class DomainDataset {
  public:
    DomainDataset() = default;
    DomainDataset(Matrix features, std::vector<int> identities, std::vector<int> cameras,
                  Domain domain, Split split, bool hide_labels, bool truth_present = true);

    std::size_t size() const { return features_.rows; }
    std::size_t feature_dim() const { return features_.cols; }
    const Matrix& features() const { return features_; }
    const std::vector<int>& cameras() const { return cameras_; }
    Domain domain() const { return domain_; }
    Split split() const { return split_; }

    bool labels_hidden() const { return labels_hidden_; }
    // Throws std::logic_error when labels are hidden (target-train).
    const std::vector<int>& identities() const;

  private:
    friend class HiddenLabelAccess;

    Matrix features_;
    std::vector<int> identities_;
    std::vector<int> cameras_;
    Domain domain_ = Domain::Source;
    Split split_ = Split::Train;
    bool labels_hidden_ = false;
    bool truth_present_ = true;  // false for hidden sets loaded from CSV (identity -1)
};

struct SynthConfig {
    std::size_t source_identities = 100;
    std::size_t target_identities = 80;
    std::size_t samples_per_identity = 20;
    std::size_t query_per_identity = 2;
    std::size_t gallery_per_identity = 8;
    std::size_t num_cameras = 4;
    std::size_t latent_dim = 16;
    std::size_t input_dim = 32;
    double domain_shift = 0.5;      // magnitude of the target-domain affine map perturbation
    double camera_noise_std = 0.1;  // std of the per-(domain,camera) additive offset
    double sample_noise_std = 0.1;  // std of per-sample isotropic noise
    std::uint64_t seed = 42;

    void validate() const;
};

struct TwoDomainData {
    DomainDataset source_train, source_query, source_gallery;
    DomainDataset target_train, target_query, target_gallery;
};

// Each identity index owns a latent Gaussian centroid shared across domains;
// a sample is affine_embed(centroid) + camera offset + sample noise, and
// target samples additionally pass through the domain-shift affine map
// x -> (I + shift*R) x + shift*r. Deterministic given the seed.
TwoDomainData generate(const SynthConfig& cfg);

// CSV schema: header `domain,split,identity,camera,f0..f{D-1}`; identity -1
// denotes hidden labels (target-train exports); floats printed with 17
// significant digits so values round-trip exactly.
void save_csv(const DomainDataset& dataset, const std::string& path);
DomainDataset load_csv(const std::string& path);

struct PkSamplerConfig {
    std::size_t P = 16;  // identities per batch
    std::size_t K = 4;   // samples per identity
};

// Identity-balanced batches of exactly P distinct labels x K indices. Labels
// with fewer than K samples are completed by sampling with replacement (every
// available sample appears at least once). Within an epoch every label is
// visited at least once before any label is visited a third time.
class PkBatchSampler {
  public:
    PkBatchSampler(std::vector<int> labels, PkSamplerConfig cfg, Rng rng);

    std::vector<std::size_t> next_batch();
    std::size_t batch_size() const { return cfg_.P * cfg_.K; }
    std::size_t num_labels() const { return label_ids_.size(); }

  private:
    int next_label();

    PkSamplerConfig cfg_;
    Rng rng_;
    std::vector<int> label_ids_;
    std::vector<std::vector<std::size_t>> indices_by_label_;  // aligned with label_ids_
    std::vector<std::size_t> order_;  // permutation over label_ids_ positions
    std::size_t cursor_ = 0;
    std::vector<char> in_batch_;  // scratch, aligned with label_ids_
};

}  // namespace sguda
