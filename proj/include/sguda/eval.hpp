#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sguda/cluster.hpp"
#include "sguda/data.hpp"
#include "sguda/encoder.hpp"

namespace sguda {

struct EvalProtocol {
    // standard re-ID protocol: same-identity same-camera gallery rows are
    // removed from a query's ranking
    bool exclude_same_camera_same_id = true;
    std::vector<std::size_t> cmc_ranks = {1, 5, 10};
};

struct ClusterDiagnostics {
    bool nmi_available = false;
    double nmi = 0.0;
    std::size_t num_clusters = 0;
    double outlier_fraction = 0.0;
};

struct EvalReport {
    double map = 0.0;
    std::vector<std::pair<std::size_t, double>> cmc;  // (rank, rate), ascending ranks
    std::size_t num_queries = 0;
    bool has_diagnostics = false;
    ClusterDiagnostics diagnostics;
    std::string config_fingerprint;
    std::uint64_t seed = 0;

    double cmc_at(std::size_t rank) const;
};

// Deterministic ranking of one query row: ascending distance, ties broken by
// gallery index.
std::vector<std::size_t> rank_with_ties(const std::vector<double>& distances);

// Retrieval metrics over a precomputed query x gallery distance matrix.
// AP is the mean of precision at each relevant position (not interpolated).
// Throws when a query has no valid same-identity match after exclusion.
EvalReport evaluate_distances(const Matrix& query_gallery_dist, const std::vector<int>& query_ids,
                              const std::vector<int>& query_cams, const std::vector<int>& gallery_ids,
                              const std::vector<int>& gallery_cams, const EvalProtocol& protocol);

// Embeds both sets through the given path in eval mode (L2-normalized) and
// ranks by squared Euclidean distance.
EvalReport evaluate(const DomainDataset& query, const DomainDataset& gallery, TwoBranchEncoder& encoder,
                    Domain path, const EvalProtocol& protocol);
EvalReport evaluate(const DomainDataset& query, const DomainDataset& gallery, SingleEncoder& encoder,
                    Domain domain, const EvalProtocol& protocol);

// Normalized mutual information with arithmetic-mean normalization. Inputs
// must be equal-length label vectors with outliers already excluded.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

// Pseudo-label quality against the hidden target-train ground truth. This is
// the only path allowed to read hidden identities; when the truth is absent
// (datasets loaded from hidden CSV exports) nmi_available stays false.
ClusterDiagnostics cluster_diagnostics(const PseudoLabelSet& pseudo, const DomainDataset& target_train);

// Sole reader of hidden target-train identities.
class HiddenLabelAccess {
  private:
    friend ClusterDiagnostics cluster_diagnostics(const PseudoLabelSet& pseudo,
                                                  const DomainDataset& target_train);
    static const std::vector<int>& truth(const DomainDataset& dataset);
};

// Stable-key-order JSON document / one-row CSV for sweep tables.
std::string report_to_json(const EvalReport& report);
void save_report_json(const EvalReport& report, const std::string& path);
std::string report_csv_header(const EvalProtocol& protocol);
std::string report_csv_row(const EvalReport& report);

}  // namespace sguda
