#pragma once

#include <string>
#include <vector>

#include "sguda/rng.hpp"
#include "sguda/tensor.hpp"

namespace sguda {

inline constexpr int kOutlier = -1;

struct RerankConfig {
    std::size_t k1 = 20;
    std::size_t k2 = 6;
    double lambda = 0.3;

    void validate() const;
};

struct DbscanConfig {
    double p = 0.01;              // fraction of the smallest pair distances defining eps
    std::size_t min_samples = 4;  // >= K of the PK sampler by default

    void validate() const;
};

struct PseudoLabelSet {
    std::vector<int> labels;  // cluster id or kOutlier per sample
    std::size_t num_clusters = 0;

    std::size_t num_outliers() const;
    double outlier_fraction() const;
};

// k-reciprocal re-ranked distances over one feature set, following the
// k-reciprocal encoding method:
//   1. Dn = squared Euclidean distances, each row divided by its max.
//   2. R(i) = k-reciprocal neighbors at k1 (self included), expanded with the
//      half-k1 reciprocal sets of its members when they overlap R(i) by more
//      than 2/3.
//   3. V[i][c] = exp(-Dn[i][c]) on R(i), L1-normalized; local query expansion
//      averages the V rows of the k2 nearest neighbors.
//   4. dist = (1-lambda) * (1 - sum_min/sum_max Jaccard on V) + lambda * Dn,
//      then symmetrized.
// Requires n > k1.
Matrix k_reciprocal_distances(const Matrix& features, const RerankConfig& cfg);

// eps = mean of the smallest ceil(p * n_pairs) upper-triangle distances.
double eps_from_p(const Matrix& dist, double p);

// Density clustering on a precomputed distance matrix. A core point has at
// least min_samples points (itself included) within eps; clusters are the
// connected components of core points plus border points. Points are
// processed in index order and border points attach to the first core
// cluster that reaches them, making runs reproducible.
PseudoLabelSet dbscan(const Matrix& dist, double eps, std::size_t min_samples);

// Lloyd's algorithm with k-means++ seeding; runs to an assignment fixpoint or
// max_iters. Empty clusters are re-seeded at the point farthest from its
// assigned centroid. Every sample gets a label.
PseudoLabelSet kmeans(const Matrix& features, std::size_t k, Rng& rng, std::size_t max_iters = 100);

// Per-iteration within-cluster sum of squares after each assignment phase.
std::vector<double> kmeans_objective_trace(const Matrix& features, std::size_t k, Rng& rng,
                                           std::size_t max_iters = 100);

struct PseudoAssignment {
    std::vector<std::size_t> sample_indices;  // rows of the dataset kept for training
    std::vector<int> labels;                  // compacted cluster ids, aligned with sample_indices
    std::size_t num_clusters = 0;
};

// Drops outliers and clusters with fewer than two members (they cannot fill
// PK slots or form triplets), then re-compacts cluster ids to 0..M-1.
// Throws when fewer than two clusters survive.
PseudoAssignment assign_pseudo_labels(const PseudoLabelSet& labels);

// CSV export `index,cluster` with outliers as -1.
void save_pseudo_csv(const PseudoLabelSet& labels, const std::string& path);

}  // namespace sguda
