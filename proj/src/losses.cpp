#include "sguda/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace sguda {

TripletResult triplet_batch_hard(const Matrix& embeddings, const std::vector<int>& labels,
                                 const TripletConfig& cfg) {
    const std::size_t n = embeddings.rows;
    if (labels.size() != n)
        throw std::invalid_argument("triplet_batch_hard: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(n) + " embeddings");
    if (cfg.margin < 0.0) throw std::invalid_argument("triplet_batch_hard: margin must be >= 0");

    Matrix sq = pairwise_sqeuclidean(embeddings, embeddings);
    Matrix dist(n, n);
    for (std::size_t i = 0; i < n * n; ++i) dist.data[i] = std::sqrt(std::max(0.0, sq.data[i]));

    TripletResult res;
    res.grad_embeddings = Matrix(n, embeddings.cols);
    res.hardest_positive.resize(n);
    res.hardest_negative.resize(n);

    const double scale = cfg.reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t p = n, q = n;
        double dp = -1.0, dq = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = dist.at(i, j);
            if (labels[j] == labels[i]) {
                if (d > dp) {
                    dp = d;
                    p = j;
                }
            } else {
                if (q == n || d < dq) {
                    dq = d;
                    q = j;
                }
            }
        }
        if (p == n)
            throw std::invalid_argument("triplet_batch_hard: anchor with label " +
                                        std::to_string(labels[i]) + " has no positive in the batch");
        if (q == n)
            throw std::invalid_argument("triplet_batch_hard: anchor with label " +
                                        std::to_string(labels[i]) + " has no negative in the batch");
        res.hardest_positive[i] = p;
        res.hardest_negative[i] = q;

        const double hinge = dp - dq + cfg.margin;
        if (hinge <= 0.0) continue;  // inactive anchor, subgradient 0 at the hinge point
        total += hinge;

        const std::size_t d = embeddings.cols;
        if (dp > 0.0) {
            const double inv = scale / dp;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = (embeddings.at(i, c) - embeddings.at(p, c)) * inv;
                res.grad_embeddings.at(i, c) += diff;
                res.grad_embeddings.at(p, c) -= diff;
            }
        }
        if (dq > 0.0) {
            const double inv = scale / dq;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = (embeddings.at(i, c) - embeddings.at(q, c)) * inv;
                res.grad_embeddings.at(i, c) -= diff;
                res.grad_embeddings.at(q, c) += diff;
            }
        }
    }
    res.loss = total * scale;
    return res;
}

CeResult softmax_ce(const Matrix& embeddings, const std::vector<int>& labels,
                    const ClassifierHead& head, Reduction reduction) {
    const std::size_t n = embeddings.rows;
    const std::size_t m = head.num_classes();
    if (labels.size() != n)
        throw std::invalid_argument("softmax_ce: label count does not match batch size");
    if (embeddings.cols != head.embed_dim())
        throw std::invalid_argument("softmax_ce: embedding dim " + std::to_string(embeddings.cols) +
                                    " does not match head " + head.weight.value.shape_str());
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= m)
            throw std::invalid_argument("softmax_ce: label " + std::to_string(labels[i]) +
                                        " out of range for " + std::to_string(m) + " classes");

    Matrix logits = matmul(embeddings, head.weight.value);
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;

    double total = 0.0;
    Matrix dlogits(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits.at(i, 0);
        for (std::size_t k = 1; k < m; ++k) mx = std::max(mx, logits.at(i, k));
        double z = 0.0;
        for (std::size_t k = 0; k < m; ++k) z += std::exp(logits.at(i, k) - mx);
        const double log_z = std::log(z);
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        total += log_z - (logits.at(i, y) - mx);
        for (std::size_t k = 0; k < m; ++k)
            dlogits.at(i, k) = std::exp(logits.at(i, k) - mx) / z * scale;
        dlogits.at(i, y) -= scale;
    }

    CeResult res;
    res.loss = total * scale;
    res.grad_embeddings = matmul(dlogits, transpose(head.weight.value));
    res.grad_head = matmul(transpose(embeddings), dlogits);
    return res;
}

DomainLossResult domain_loss(const Matrix& embeddings, const std::vector<int>& labels,
                             const ClassifierHead& head, const TripletConfig& cfg) {
    CeResult ce = softmax_ce(embeddings, labels, head, cfg.reduction);
    TripletResult tri = triplet_batch_hard(embeddings, labels, cfg);

    DomainLossResult res;
    res.ce = ce.loss;
    res.triplet = tri.loss;
    res.loss = ce.loss + tri.loss;
    res.grad_embeddings = std::move(ce.grad_embeddings);
    add_inplace(res.grad_embeddings, tri.grad_embeddings);
    res.grad_head = std::move(ce.grad_head);
    return res;
}

JointLossResult joint_loss(TwoBranchEncoder& encoder, const Matrix& source_x,
                           const std::vector<int>& source_labels, ClassifierHead& source_head,
                           const Matrix& target_x, const std::vector<int>& target_labels,
                           ClassifierHead& target_head, const TripletConfig& cfg,
                           double source_term_scale) {
    if (source_x.rows == 0 || source_labels.empty())
        throw std::invalid_argument("joint_loss: empty source batch");
    if (target_x.rows == 0 || target_labels.empty())
        throw std::invalid_argument("joint_loss: empty target pseudo-label batch");

    JointLossResult res;

    Matrix emb_s = encoder.forward(source_x, Domain::Source, Mode::Train);
    DomainLossResult ls = domain_loss(emb_s, source_labels, source_head, cfg);
    res.source_loss = ls.loss;
    if (source_term_scale != 1.0) {
        scale_inplace(ls.grad_embeddings, source_term_scale);
        scale_inplace(ls.grad_head, source_term_scale);
    }
    encoder.backward(Domain::Source, ls.grad_embeddings);
    add_inplace(source_head.weight.grad, ls.grad_head);

    Matrix emb_t = encoder.forward(target_x, Domain::Target, Mode::Train);
    DomainLossResult lt = domain_loss(emb_t, target_labels, target_head, cfg);
    res.target_loss = lt.loss;
    encoder.backward(Domain::Target, lt.grad_embeddings);
    add_inplace(target_head.weight.grad, lt.grad_head);

    res.total = res.source_loss + res.target_loss;
    return res;
}

}  // namespace sguda
