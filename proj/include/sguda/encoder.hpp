#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sguda/nn.hpp"

namespace sguda {

struct EncoderConfig {
    std::size_t input_dim = 32;
    std::vector<std::size_t> block_dims = {64, 64, 64, 64};
    std::size_t embed_dim = 32;
    std::size_t shared_depth = 3;  // in [0, block_dims.size()]
    // Ablation knob: route every batch through the source statistics slot so
    // both domains share one set of running statistics.
    bool shared_batchnorm = false;

    std::size_t num_blocks() const { return block_dims.size(); }
    void validate() const;
};

// Linear -> BatchNorm(per-domain stats) -> ReLU
struct Block {
    LinearLayer linear;
    BatchNormLayer bn;
    ReluLayer relu;

    Block() = default;
    Block(std::size_t in_dim, std::size_t out_dim, Rng& rng, const std::string& name);

    Matrix forward(const Matrix& x, Domain bn_domain, Mode mode);
    Matrix backward(const Matrix& grad_out);
    std::vector<Param*> params();
};

// Single-path encoder used for the supervised initialization phase.
class SingleEncoder {
  public:
    SingleEncoder() = default;
    SingleEncoder(const EncoderConfig& cfg, Rng& rng);

    // Embeddings are L2-normalized in eval mode only; train mode returns raw
    // embeddings for the losses.
    Matrix forward(const Matrix& x, Domain domain, Mode mode);
    Matrix backward(const Matrix& grad_embedding);
    std::vector<Param*> parameters();

    const EncoderConfig& config() const { return cfg_; }
    std::vector<Block>& blocks() { return blocks_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    LinearLayer& embed() { return embed_; }
    const LinearLayer& embed() const { return embed_; }

  private:
    EncoderConfig cfg_;  // shared_depth ignored here
    std::vector<Block> blocks_;
    LinearLayer embed_;
    Mode last_mode_ = Mode::Train;
    bool has_forward_ = false;
};

// Two-branch encoder: shared trunk of `shared_depth` blocks feeding a source
// branch and a target branch, each ending in its own embedding layer. With
// shared_depth == num_blocks the branches collapse onto the same parameter
// objects (fully shared model).
class TwoBranchEncoder {
  public:
    TwoBranchEncoder() = default;

    Matrix forward(const Matrix& x, Domain path, Mode mode);
    Matrix backward(Domain path, const Matrix& grad_embedding);

    // Shared + branch parameters reachable from the given path (heads are
    // owned by the training loop and appended there).
    std::vector<Param*> parameters(Domain path);
    // Union over both paths, aliases listed once.
    std::vector<Param*> all_parameters();

    const EncoderConfig& config() const { return cfg_; }

    TwoBranchEncoder clone() const;

    friend TwoBranchEncoder init_two_branch(const SingleEncoder& trained_init, const EncoderConfig& cfg);
    friend void save_encoder(const TwoBranchEncoder& enc, std::ostream& out);
    friend TwoBranchEncoder load_two_branch(std::istream& in);

    std::vector<std::shared_ptr<Block>>& shared_blocks() { return shared_; }
    std::vector<std::shared_ptr<Block>>& branch_blocks(Domain path) {
        return path == Domain::Source ? src_blocks_ : tgt_blocks_;
    }
    LinearLayer& embed(Domain path) { return path == Domain::Source ? *src_embed_ : *tgt_embed_; }

  private:
    Domain bn_domain(Domain path) const {
        return cfg_.shared_batchnorm ? Domain::Source : path;
    }

    EncoderConfig cfg_;
    std::vector<std::shared_ptr<Block>> shared_;
    std::vector<std::shared_ptr<Block>> src_blocks_;
    std::vector<std::shared_ptr<Block>> tgt_blocks_;
    std::shared_ptr<LinearLayer> src_embed_;
    std::shared_ptr<LinearLayer> tgt_embed_;
    Domain last_path_ = Domain::Source;
    Mode last_mode_ = Mode::Train;
    bool has_forward_ = false;
};

// Copies blocks [0, s) of the trained initial encoder into the shared trunk
// and blocks [s, L) plus the embedding into BOTH branches, so that at
// initialization both paths compute exactly the trained single-path function.
// Target-domain BN statistics slots are seeded from the source slots.
// Optimizer state starts fresh for the adaptation phase.
TwoBranchEncoder init_two_branch(const SingleEncoder& trained_init, const EncoderConfig& cfg);

struct ClassifierHead {
    Param weight;  // embed_dim x num_classes, no bias

    std::size_t num_classes() const { return weight.value.cols; }
    std::size_t embed_dim() const { return weight.value.rows; }
};

// Fresh head with columns drawn from N(0, 0.001^2). num_classes < 2 is a
// degenerate classification problem and rejected.
ClassifierHead make_classifier_head(std::size_t embed_dim, std::size_t num_classes, Rng& rng);

// Checkpoint format (little-endian binary, documented in the README):
// magic "SGUDAENC", u32 version, u8 kind, config fields, then parameter and
// running-statistics arrays in declaration order. Round-trips bit-exactly.
void save_encoder(const SingleEncoder& enc, std::ostream& out);
void save_encoder(const TwoBranchEncoder& enc, std::ostream& out);
void save_encoder_file(const SingleEncoder& enc, const std::string& path);
void save_encoder_file(const TwoBranchEncoder& enc, const std::string& path);
SingleEncoder load_single(std::istream& in);
TwoBranchEncoder load_two_branch(std::istream& in);
// Reads either kind; a single-path checkpoint is wrapped as a fully-shared
// two-branch model for evaluation.
TwoBranchEncoder load_encoder_file_as_two_branch(const std::string& path);
bool checkpoint_is_single(const std::string& path);
SingleEncoder load_single_file(const std::string& path);

}  // namespace sguda
