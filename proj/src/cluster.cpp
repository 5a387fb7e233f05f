#include "sguda/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sguda {

void RerankConfig::validate() const {
    if (k1 < 1 || k2 < 1) throw std::invalid_argument("rerank config: k1 and k2 must be >= 1");
    if (k2 > k1) throw std::invalid_argument("rerank config: k2 must be <= k1");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("rerank config: lambda must be in [0, 1]");
}

void DbscanConfig::validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("dbscan config: p must be in (0, 1]");
    if (min_samples < 2) throw std::invalid_argument("dbscan config: min_samples must be >= 2");
}

std::size_t PseudoLabelSet::num_outliers() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOutlier));
}

double PseudoLabelSet::outlier_fraction() const {
    return labels.empty() ? 0.0 : static_cast<double>(num_outliers()) / static_cast<double>(labels.size());
}

namespace {

// rank of neighbors by (distance, index), self included
std::vector<std::vector<std::size_t>> rank_rows(const Matrix& d) {
    const std::size_t n = d.rows;
    std::vector<std::vector<std::size_t>> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        rank[i].resize(n);
        std::iota(rank[i].begin(), rank[i].end(), std::size_t{0});
        const double* row = d.row(i);
        std::stable_sort(rank[i].begin(), rank[i].end(),
                         [row](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    }
    return rank;
}

std::vector<std::size_t> reciprocal_set(const std::vector<std::vector<std::size_t>>& rank,
                                        std::size_t i, std::size_t k) {
    std::vector<std::size_t> out;
    for (std::size_t pos = 0; pos <= k && pos < rank[i].size(); ++pos) {
        const std::size_t j = rank[i][pos];
        const auto& back = rank[j];
        for (std::size_t q = 0; q <= k && q < back.size(); ++q) {
            if (back[q] == i) {
                out.push_back(j);
                break;
            }
        }
    }
    return out;
}

}  // namespace

Matrix k_reciprocal_distances(const Matrix& features, const RerankConfig& cfg) {
    cfg.validate();
    const std::size_t n = features.rows;
    if (n <= cfg.k1)
        throw std::invalid_argument("k_reciprocal_distances: need more than k1=" +
                                    std::to_string(cfg.k1) + " samples, got " + std::to_string(n));

    Matrix dn = pairwise_sqeuclidean(features, features);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = 0.0;
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, dn.at(i, j));
        if (mx > 0.0)
            for (std::size_t j = 0; j < n; ++j) dn.at(i, j) /= mx;
    }

    const auto rank = rank_rows(dn);
    const std::size_t half_k1 = static_cast<std::size_t>(std::llround(cfg.k1 / 2.0));

    // membership weights over the expanded reciprocal sets
    Matrix v(n, n);
    std::vector<char> in_set(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> recip = reciprocal_set(rank, i, cfg.k1);
        std::vector<std::size_t> expanded = recip;
        for (char& f : in_set) f = 0;
        for (std::size_t j : recip) in_set[j] = 1;
        for (std::size_t cand : recip) {
            const std::vector<std::size_t> cand_set = reciprocal_set(rank, cand, half_k1);
            std::size_t overlap = 0;
            for (std::size_t j : cand_set)
                if (in_set[j]) ++overlap;
            if (3 * overlap > 2 * cand_set.size())
                for (std::size_t j : cand_set)
                    if (!in_set[j]) {
                        in_set[j] = 1;
                        expanded.push_back(j);
                    }
        }
        double sum = 0.0;
        for (std::size_t j : expanded) sum += std::exp(-dn.at(i, j));
        for (std::size_t j : expanded) v.at(i, j) = std::exp(-dn.at(i, j)) / sum;
    }

    if (cfg.k2 > 1) {
        Matrix vq(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t pos = 0; pos < cfg.k2; ++pos) {
                const double* row = v.row(rank[i][pos]);
                double* out = vq.row(i);
                for (std::size_t c = 0; c < n; ++c) out[c] += row[c];
            }
            for (std::size_t c = 0; c < n; ++c) vq.at(i, c) /= static_cast<double>(cfg.k2);
        }
        v = std::move(vq);
    }

    // sparse support per row for the Jaccard pass
    std::vector<std::vector<std::size_t>> support(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < n; ++c)
            if (v.at(i, c) > 0.0) support[i].push_back(c);

    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double min_sum = 0.0;
            // rows are L1-normalized, so sum_max = 2 - sum_min
            const auto& sup = support[i].size() <= support[j].size() ? support[i] : support[j];
            for (std::size_t c : sup) min_sum += std::min(v.at(i, c), v.at(j, c));
            const double jaccard = 1.0 - min_sum / (2.0 - min_sum);
            out.at(i, j) = (1.0 - cfg.lambda) * jaccard + cfg.lambda * dn.at(i, j);
        }
    }

    // symmetrize and clean the diagonal
    for (std::size_t i = 0; i < n; ++i) {
        out.at(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = 0.5 * (out.at(i, j) + out.at(j, i));
            out.at(i, j) = s;
            out.at(j, i) = s;
        }
    }
    return out;
}

double eps_from_p(const Matrix& dist, double p) {
    if (dist.rows != dist.cols || dist.rows < 2)
        throw std::invalid_argument("eps_from_p: need a square distance matrix with n >= 2");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("eps_from_p: p must be in (0, 1]");
    const std::size_t n = dist.rows;
    std::vector<double> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.push_back(dist.at(i, j));
    const std::size_t take =
        std::min(pairs.size(),
                 static_cast<std::size_t>(std::ceil(p * static_cast<double>(pairs.size()))));
    std::partial_sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(take), pairs.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += pairs[i];
    return sum / static_cast<double>(take);
}

PseudoLabelSet dbscan(const Matrix& dist, double eps, std::size_t min_samples) {
    if (dist.rows != dist.cols) throw std::invalid_argument("dbscan: distance matrix must be square");
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
    const std::size_t n = dist.rows;

    std::vector<std::vector<std::size_t>> neighbors(n);
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (dist.at(i, j) <= eps) neighbors[i].push_back(j);  // self included
        core[i] = neighbors[i].size() >= min_samples;
    }

    PseudoLabelSet out;
    out.labels.assign(n, kOutlier);
    int next_cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || out.labels[i] != kOutlier) continue;
        const int cid = next_cluster++;
        std::deque<std::size_t> queue;
        out.labels[i] = cid;
        queue.push_back(i);
        while (!queue.empty()) {
            const std::size_t cur = queue.front();
            queue.pop_front();
            for (std::size_t nb : neighbors[cur]) {
                if (out.labels[nb] != kOutlier) continue;
                out.labels[nb] = cid;  // border points keep the first cluster that reaches them
                if (core[nb]) queue.push_back(nb);
            }
        }
    }
    out.num_clusters = static_cast<std::size_t>(next_cluster);
    return out;
}

namespace {

std::vector<std::size_t> kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.rows;
    std::vector<std::size_t> centers;
    centers.push_back(static_cast<std::size_t>(rng.uniform_int(n)));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double diff = x.at(i, c) - x.at(centers[0], c);
            s += diff * diff;
        }
        d2[i] = s;
    }
    while (centers.size() < k) {
        double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.uniform_int(n));
        } else {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double diff = x.at(i, c) - x.at(pick, c);
                s += diff * diff;
            }
            d2[i] = std::min(d2[i], s);
        }
    }
    return centers;
}

struct KmeansRun {
    std::vector<int> labels;
    std::vector<double> objective_trace;
};

KmeansRun kmeans_run(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iters) {
    const std::size_t n = x.rows;
    const std::size_t d = x.cols;
    if (k == 0 || k > n)
        throw std::invalid_argument("kmeans: k must be in [1, n]; got k=" + std::to_string(k) +
                                    " with n=" + std::to_string(n));

    Matrix centroids(k, d);
    const auto seeds = kmeanspp_seed(x, k, rng);
    for (std::size_t c = 0; c < k; ++c)
        std::copy(x.row(seeds[c]), x.row(seeds[c]) + d, centroids.row(c));

    KmeansRun run;
    run.labels.assign(n, 0);
    std::vector<double> point_d2(n, 0.0);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = iter == 0;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = -1.0;
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double s = 0.0;
                const double* xi = x.row(i);
                const double* cc = centroids.row(c);
                for (std::size_t f = 0; f < d; ++f) {
                    const double diff = xi[f] - cc[f];
                    s += diff * diff;
                }
                if (best < 0.0 || s < best) {
                    best = s;
                    best_c = c;
                }
            }
            if (run.labels[i] != static_cast<int>(best_c)) changed = true;
            run.labels[i] = static_cast<int>(best_c);
            point_d2[i] = best;
            objective += best;
        }
        run.objective_trace.push_back(objective);
        if (!changed) break;

        centroids.fill(0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(run.labels[i]);
            counts[c]++;
            double* cc = centroids.row(c);
            const double* xi = x.row(i);
            for (std::size_t f = 0; f < d; ++f) cc[f] += xi[f];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                double* cc = centroids.row(c);
                for (std::size_t f = 0; f < d; ++f) cc[f] /= static_cast<double>(counts[c]);
            } else {
                // re-seed at the point farthest from its assigned centroid
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i)
                    if (point_d2[i] > point_d2[far]) far = i;
                std::copy(x.row(far), x.row(far) + d, centroids.row(c));
                point_d2[far] = 0.0;
            }
        }
    }
    return run;
}

}  // namespace

PseudoLabelSet kmeans(const Matrix& features, std::size_t k, Rng& rng, std::size_t max_iters) {
    KmeansRun run = kmeans_run(features, k, rng, max_iters);
    PseudoLabelSet out;
    out.labels = std::move(run.labels);
    out.num_clusters = k;
    return out;
}

std::vector<double> kmeans_objective_trace(const Matrix& features, std::size_t k, Rng& rng,
                                           std::size_t max_iters) {
    return kmeans_run(features, k, rng, max_iters).objective_trace;
}

PseudoAssignment assign_pseudo_labels(const PseudoLabelSet& labels) {
    std::vector<std::size_t> counts(labels.num_clusters, 0);
    for (int l : labels.labels)
        if (l >= 0) counts[static_cast<std::size_t>(l)]++;

    std::vector<int> remap(labels.num_clusters, kOutlier);
    int next = 0;
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] >= 2) remap[c] = next++;

    if (next < 2)
        throw std::runtime_error("pseudo-labeling collapsed: only " + std::to_string(next) +
                                 " clusters with >= 2 members survive");

    PseudoAssignment out;
    out.num_clusters = static_cast<std::size_t>(next);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const int l = labels.labels[i];
        if (l < 0 || remap[static_cast<std::size_t>(l)] == kOutlier) continue;
        out.sample_indices.push_back(i);
        out.labels.push_back(remap[static_cast<std::size_t>(l)]);
    }
    return out;
}

void save_pseudo_csv(const PseudoLabelSet& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "index,cluster\n";
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        out << i << ',' << labels.labels[i] << "\n";
}

}  // namespace sguda
