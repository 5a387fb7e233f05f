#include "sguda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace sguda {

double EvalReport::cmc_at(std::size_t rank) const {
    for (const auto& [r, v] : cmc)
        if (r == rank) return v;
    throw std::out_of_range("EvalReport: rank " + std::to_string(rank) + " not recorded");
}

std::vector<std::size_t> rank_with_ties(const std::vector<double>& distances) {
    std::vector<std::size_t> order(distances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
    return order;
}

EvalReport evaluate_distances(const Matrix& query_gallery_dist, const std::vector<int>& query_ids,
                              const std::vector<int>& query_cams, const std::vector<int>& gallery_ids,
                              const std::vector<int>& gallery_cams, const EvalProtocol& protocol) {
    const std::size_t nq = query_gallery_dist.rows;
    const std::size_t ng = query_gallery_dist.cols;
    if (query_ids.size() != nq || query_cams.size() != nq)
        throw std::invalid_argument("evaluate_distances: query metadata size mismatch");
    if (gallery_ids.size() != ng || gallery_cams.size() != ng)
        throw std::invalid_argument("evaluate_distances: gallery metadata size mismatch");
    if (!std::is_sorted(protocol.cmc_ranks.begin(), protocol.cmc_ranks.end()))
        throw std::invalid_argument("evaluate_distances: cmc_ranks must be ascending");
    if (nq == 0) throw std::invalid_argument("evaluate_distances: no queries");

    double ap_sum = 0.0;
    std::vector<std::size_t> cmc_hits(protocol.cmc_ranks.size(), 0);

    std::vector<double> dist;
    std::vector<std::size_t> kept;
    for (std::size_t q = 0; q < nq; ++q) {
        dist.clear();
        kept.clear();
        for (std::size_t g = 0; g < ng; ++g) {
            if (protocol.exclude_same_camera_same_id && gallery_ids[g] == query_ids[q] &&
                gallery_cams[g] == query_cams[q])
                continue;
            kept.push_back(g);
            dist.push_back(query_gallery_dist.at(q, g));
        }
        const auto order = rank_with_ties(dist);

        std::size_t num_relevant = 0, hits = 0, first_hit = 0;
        double precision_sum = 0.0;
        bool found = false;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            if (gallery_ids[kept[order[pos]]] == query_ids[q]) {
                ++hits;
                precision_sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
                if (!found) {
                    first_hit = pos;
                    found = true;
                }
                ++num_relevant;
            }
        }
        if (num_relevant == 0)
            throw std::runtime_error("evaluate_distances: query " + std::to_string(q) +
                                     " has no valid gallery match after exclusion");
        ap_sum += precision_sum / static_cast<double>(num_relevant);
        for (std::size_t r = 0; r < protocol.cmc_ranks.size(); ++r)
            if (first_hit < protocol.cmc_ranks[r]) ++cmc_hits[r];
    }

    EvalReport report;
    report.num_queries = nq;
    report.map = ap_sum / static_cast<double>(nq);
    for (std::size_t r = 0; r < protocol.cmc_ranks.size(); ++r)
        report.cmc.emplace_back(protocol.cmc_ranks[r],
                                static_cast<double>(cmc_hits[r]) / static_cast<double>(nq));
    return report;
}

EvalReport evaluate(const DomainDataset& query, const DomainDataset& gallery, TwoBranchEncoder& encoder,
                    Domain path, const EvalProtocol& protocol) {
    const Matrix eq = encoder.forward(query.features(), path, Mode::Eval);
    const Matrix eg = encoder.forward(gallery.features(), path, Mode::Eval);
    const Matrix d = pairwise_sqeuclidean(eq, eg);
    return evaluate_distances(d, query.identities(), query.cameras(), gallery.identities(),
                              gallery.cameras(), protocol);
}

EvalReport evaluate(const DomainDataset& query, const DomainDataset& gallery, SingleEncoder& encoder,
                    Domain domain, const EvalProtocol& protocol) {
    const Matrix eq = encoder.forward(query.features(), domain, Mode::Eval);
    const Matrix eg = encoder.forward(gallery.features(), domain, Mode::Eval);
    const Matrix d = pairwise_sqeuclidean(eq, eg);
    return evaluate_distances(d, query.identities(), query.cameras(), gallery.identities(),
                              gallery.cameras(), protocol);
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("nmi: label vectors differ in length");
    if (a.empty()) throw std::invalid_argument("nmi: empty overlap");
    const std::size_t n = a.size();

    std::map<int, std::size_t> ca, cb;
    std::map<std::pair<int, int>, std::size_t> joint;
    for (std::size_t i = 0; i < n; ++i) {
        ca[a[i]]++;
        cb[b[i]]++;
        joint[{a[i], b[i]}]++;
    }

    const double dn = static_cast<double>(n);
    auto entropy = [dn](const std::map<int, std::size_t>& counts) {
        double h = 0.0;
        for (const auto& [_, c] : counts) {
            const double p = static_cast<double>(c) / dn;
            h -= p * std::log(p);
        }
        return h;
    };
    const double ha = entropy(ca);
    const double hb = entropy(cb);

    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        const double pxy = static_cast<double>(c) / dn;
        const double px = static_cast<double>(ca[key.first]) / dn;
        const double py = static_cast<double>(cb[key.second]) / dn;
        mi += pxy * std::log(pxy / (px * py));
    }
    mi = std::max(0.0, mi);

    // identical trivial partitions count as perfect agreement
    if (ha == 0.0 && hb == 0.0) return 1.0;
    const double denom = 0.5 * (ha + hb);
    if (denom == 0.0) return 0.0;
    return mi / denom;
}

const std::vector<int>& HiddenLabelAccess::truth(const DomainDataset& dataset) {
    if (!dataset.truth_present_)
        throw std::logic_error("hidden ground truth is not available for this dataset");
    return dataset.identities_;
}

ClusterDiagnostics cluster_diagnostics(const PseudoLabelSet& pseudo, const DomainDataset& target_train) {
    ClusterDiagnostics diag;
    diag.num_clusters = pseudo.num_clusters;
    diag.outlier_fraction = pseudo.outlier_fraction();
    if (pseudo.labels.size() != target_train.size())
        throw std::invalid_argument("cluster_diagnostics: label count does not match dataset");
    try {
        const std::vector<int>& truth = HiddenLabelAccess::truth(target_train);
        std::vector<int> p, t;
        for (std::size_t i = 0; i < pseudo.labels.size(); ++i) {
            if (pseudo.labels[i] == kOutlier) continue;
            p.push_back(pseudo.labels[i]);
            t.push_back(truth[i]);
        }
        if (!p.empty()) {
            diag.nmi = nmi(p, t);
            diag.nmi_available = true;
        }
    } catch (const std::logic_error&) {
        diag.nmi_available = false;
    }
    return diag;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["map"] = r.map;
    nlohmann::ordered_json cmc;
    for (const auto& [rank, v] : r.cmc) cmc["top" + std::to_string(rank)] = v;
    j["cmc"] = cmc;
    j["num_queries"] = r.num_queries;
    if (r.has_diagnostics) {
        nlohmann::ordered_json d;
        d["nmi"] = r.diagnostics.nmi_available ? nlohmann::ordered_json(r.diagnostics.nmi)
                                               : nlohmann::ordered_json(nullptr);
        d["num_clusters"] = r.diagnostics.num_clusters;
        d["outlier_fraction"] = r.diagnostics.outlier_fraction;
        j["cluster_diagnostics"] = d;
    }
    j["config_fingerprint"] = r.config_fingerprint;
    j["seed"] = r.seed;
    return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

void save_report_json(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << report_to_json(report);
}

std::string report_csv_header(const EvalProtocol& protocol) {
    std::string h = "map";
    for (std::size_t r : protocol.cmc_ranks) h += ",cmc" + std::to_string(r);
    h += ",num_queries,nmi,num_clusters,outlier_fraction,seed,config_fingerprint";
    return h;
}

std::string report_csv_row(const EvalReport& report) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string row = fmt(report.map);
    for (const auto& [_, v] : report.cmc) row += "," + fmt(v);
    row += "," + std::to_string(report.num_queries);
    row += ",";
    if (report.has_diagnostics && report.diagnostics.nmi_available) row += fmt(report.diagnostics.nmi);
    row += "," + std::to_string(report.has_diagnostics ? report.diagnostics.num_clusters : 0);
    row += "," + (report.has_diagnostics ? fmt(report.diagnostics.outlier_fraction) : std::string("0"));
    row += "," + std::to_string(report.seed);
    row += "," + report.config_fingerprint;
    return row;
}

}  // namespace sguda
