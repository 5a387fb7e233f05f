#pragma once

#include <vector>

#include "sguda/encoder.hpp"
#include "sguda/tensor.hpp"

namespace sguda {

enum class Reduction { Sum, Mean };

struct TripletConfig {
    double margin = 0.3;
    Reduction reduction = Reduction::Sum;
};

struct TripletResult {
    double loss = 0.0;
    Matrix grad_embeddings;
    // mined hardest positive/negative per anchor, for diagnostics and tests
    std::vector<std::size_t> hardest_positive;
    std::vector<std::size_t> hardest_negative;
};

// Batch-hard mining: per anchor, the farthest same-label sample and the
// closest different-label sample (L2 distance), hinge at the margin. Ties are
// broken by lowest index. The gradient is the exact subgradient: zero for
// inactive anchors and at zero distances.
// Every label in the batch must appear at least twice and at least two
// distinct labels must be present.
TripletResult triplet_batch_hard(const Matrix& embeddings, const std::vector<int>& labels,
                                 const TripletConfig& cfg);

struct CeResult {
    double loss = 0.0;
    Matrix grad_embeddings;
    Matrix grad_head;  // embed_dim x num_classes
};

// Softmax cross-entropy over logits = embeddings * W (no bias), max-logit
// subtraction for stability, summed over the batch (or averaged).
CeResult softmax_ce(const Matrix& embeddings, const std::vector<int>& labels,
                    const ClassifierHead& head, Reduction reduction = Reduction::Sum);

struct DomainLossResult {
    double loss = 0.0;
    double ce = 0.0;
    double triplet = 0.0;
    Matrix grad_embeddings;
    Matrix grad_head;
};

// L = L_cls + L_tri, unweighted.
DomainLossResult domain_loss(const Matrix& embeddings, const std::vector<int>& labels,
                             const ClassifierHead& head, const TripletConfig& cfg);

struct JointLossResult {
    double total = 0.0;
    double source_loss = 0.0;
    double target_loss = 0.0;
};

// The joint criterion L = L^S + L^T, coefficient exactly 1 on each term.
// Routes the source batch through the source path and the target batch
// through the target path, accumulating gradients into the encoder (shared
// trunk receives both terms) and into the heads. Caller zeroes gradients
// beforehand and steps afterwards.
// source_term_scale rescales the source GRADIENT contribution only; it exists
// as a testing seam for the shared-depth-0 equivalence check and is 1 in all
// shipped configurations.
JointLossResult joint_loss(TwoBranchEncoder& encoder, const Matrix& source_x,
                           const std::vector<int>& source_labels, ClassifierHead& source_head,
                           const Matrix& target_x, const std::vector<int>& target_labels,
                           ClassifierHead& target_head, const TripletConfig& cfg,
                           double source_term_scale = 1.0);

}  // namespace sguda
