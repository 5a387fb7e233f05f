#include "sguda/encoder.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace sguda {

void EncoderConfig::validate() const {
    if (input_dim == 0 || embed_dim == 0)
        throw std::invalid_argument("encoder config: input_dim and embed_dim must be positive");
    if (block_dims.empty())
        throw std::invalid_argument("encoder config: at least one block required");
    for (std::size_t d : block_dims)
        if (d == 0) throw std::invalid_argument("encoder config: block dims must be positive");
    if (shared_depth > block_dims.size())
        throw std::invalid_argument("encoder config: shared_depth " + std::to_string(shared_depth) +
                                    " exceeds number of blocks " + std::to_string(block_dims.size()));
}

Block::Block(std::size_t in_dim, std::size_t out_dim, Rng& rng, const std::string& name)
    : linear(in_dim, out_dim, rng, name), bn(out_dim, name) {}

Matrix Block::forward(const Matrix& x, Domain bn_domain, Mode mode) {
    Matrix h = linear.forward(x);
    h = bn.forward(h, bn_domain, mode);
    return relu.forward(h);
}

Matrix Block::backward(const Matrix& grad_out) {
    Matrix g = relu.backward(grad_out);
    g = bn.backward(g);
    return linear.backward(g);
}

std::vector<Param*> Block::params() {
    return {&linear.weight, &linear.bias, &bn.gamma, &bn.beta};
}

SingleEncoder::SingleEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    std::size_t in = cfg.input_dim;
    for (std::size_t i = 0; i < cfg.block_dims.size(); ++i) {
        blocks_.emplace_back(in, cfg.block_dims[i], rng, "block" + std::to_string(i));
        in = cfg.block_dims[i];
    }
    embed_ = LinearLayer(in, cfg.embed_dim, rng, "embed");
}

Matrix SingleEncoder::forward(const Matrix& x, Domain domain, Mode mode) {
    Matrix h = x;
    for (auto& b : blocks_) h = b.forward(h, domain, mode);
    h = embed_.forward(h);
    if (mode == Mode::Eval) l2_normalize_rows(h);
    last_mode_ = mode;
    has_forward_ = true;
    return h;
}

Matrix SingleEncoder::backward(const Matrix& grad_embedding) {
    if (!has_forward_ || last_mode_ != Mode::Train)
        throw std::logic_error("SingleEncoder::backward requires a preceding train-mode forward");
    Matrix g = embed_.backward(grad_embedding);
    for (std::size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(g);
    return g;
}

std::vector<Param*> SingleEncoder::parameters() {
    std::vector<Param*> out;
    for (auto& b : blocks_)
        for (Param* p : b.params()) out.push_back(p);
    out.push_back(&embed_.weight);
    out.push_back(&embed_.bias);
    return out;
}

namespace {

void reset_optimizer_state(Param& p) {
    p.grad = Matrix(p.value.rows, p.value.cols);
    p.adam = AdamState{};
}

Block copy_block(const Block& src, const std::string& name) {
    Block b = src;
    b.linear.weight.name = name + ".weight";
    b.linear.bias.name = name + ".bias";
    b.bn.gamma.name = name + ".gamma";
    b.bn.beta.name = name + ".beta";
    for (Param* p : b.params()) reset_optimizer_state(*p);
    return b;
}

void seed_target_stats(BatchNormLayer& bn) {
    bn.running_mean[static_cast<std::size_t>(Domain::Target)] =
        bn.running_mean[static_cast<std::size_t>(Domain::Source)];
    bn.running_var[static_cast<std::size_t>(Domain::Target)] =
        bn.running_var[static_cast<std::size_t>(Domain::Source)];
}

}  // namespace

TwoBranchEncoder init_two_branch(const SingleEncoder& trained_init, const EncoderConfig& cfg) {
    cfg.validate();
    const auto& init_cfg = trained_init.config();
    if (init_cfg.input_dim != cfg.input_dim || init_cfg.block_dims != cfg.block_dims ||
        init_cfg.embed_dim != cfg.embed_dim)
        throw std::invalid_argument("init_two_branch: trained encoder shape does not match config");

    const std::size_t L = cfg.num_blocks();
    const std::size_t s = cfg.shared_depth;
    TwoBranchEncoder enc;
    enc.cfg_ = cfg;

    const auto& blocks = trained_init.blocks();
    for (std::size_t i = 0; i < s; ++i)
        enc.shared_.push_back(
            std::make_shared<Block>(copy_block(blocks[i], "shared" + std::to_string(i))));
    for (std::size_t i = s; i < L; ++i) {
        enc.src_blocks_.push_back(
            std::make_shared<Block>(copy_block(blocks[i], "src" + std::to_string(i))));
        enc.tgt_blocks_.push_back(
            std::make_shared<Block>(copy_block(blocks[i], "tgt" + std::to_string(i))));
    }

    auto make_embed = [&](const std::string& name) {
        auto e = std::make_shared<LinearLayer>(trained_init.embed());
        e->weight.name = name + ".weight";
        e->bias.name = name + ".bias";
        reset_optimizer_state(e->weight);
        reset_optimizer_state(e->bias);
        return e;
    };
    enc.src_embed_ = make_embed(s == L ? "embed" : "src_embed");
    enc.tgt_embed_ = s == L ? enc.src_embed_ : make_embed("tgt_embed");

    for (auto& b : enc.shared_) seed_target_stats(b->bn);
    for (auto& b : enc.src_blocks_) seed_target_stats(b->bn);
    for (auto& b : enc.tgt_blocks_) seed_target_stats(b->bn);
    return enc;
}

Matrix TwoBranchEncoder::forward(const Matrix& x, Domain path, Mode mode) {
    Matrix h = x;
    const Domain bnd = bn_domain(path);
    for (auto& b : shared_) h = b->forward(h, bnd, mode);
    auto& branch = path == Domain::Source ? src_blocks_ : tgt_blocks_;
    for (auto& b : branch) h = b->forward(h, bnd, mode);
    h = embed(path).forward(h);
    if (mode == Mode::Eval) l2_normalize_rows(h);
    last_path_ = path;
    last_mode_ = mode;
    has_forward_ = true;
    return h;
}

Matrix TwoBranchEncoder::backward(Domain path, const Matrix& grad_embedding) {
    if (!has_forward_ || last_mode_ != Mode::Train)
        throw std::logic_error("TwoBranchEncoder::backward requires a preceding train-mode forward");
    if (path != last_path_)
        throw std::logic_error("TwoBranchEncoder::backward path does not match the last forward");
    Matrix g = embed(path).backward(grad_embedding);
    auto& branch = path == Domain::Source ? src_blocks_ : tgt_blocks_;
    for (std::size_t i = branch.size(); i-- > 0;) g = branch[i]->backward(g);
    for (std::size_t i = shared_.size(); i-- > 0;) g = shared_[i]->backward(g);
    return g;
}

std::vector<Param*> TwoBranchEncoder::parameters(Domain path) {
    std::vector<Param*> out;
    for (auto& b : shared_)
        for (Param* p : b->params()) out.push_back(p);
    auto& branch = path == Domain::Source ? src_blocks_ : tgt_blocks_;
    for (auto& b : branch)
        for (Param* p : b->params()) out.push_back(p);
    out.push_back(&embed(path).weight);
    out.push_back(&embed(path).bias);
    return out;
}

std::vector<Param*> TwoBranchEncoder::all_parameters() {
    std::vector<Param*> out = parameters(Domain::Source);
    std::unordered_set<Param*> seen(out.begin(), out.end());
    for (Param* p : parameters(Domain::Target))
        if (seen.insert(p).second) out.push_back(p);
    return out;
}

TwoBranchEncoder TwoBranchEncoder::clone() const {
    TwoBranchEncoder c;
    c.cfg_ = cfg_;
    for (const auto& b : shared_) c.shared_.push_back(std::make_shared<Block>(*b));
    for (const auto& b : src_blocks_) c.src_blocks_.push_back(std::make_shared<Block>(*b));
    for (const auto& b : tgt_blocks_) c.tgt_blocks_.push_back(std::make_shared<Block>(*b));
    c.src_embed_ = std::make_shared<LinearLayer>(*src_embed_);
    c.tgt_embed_ = tgt_embed_ == src_embed_ ? c.src_embed_ : std::make_shared<LinearLayer>(*tgt_embed_);
    return c;
}

ClassifierHead make_classifier_head(std::size_t embed_dim, std::size_t num_classes, Rng& rng) {
    if (num_classes < 2)
        throw std::invalid_argument("classifier head needs at least 2 classes, got " +
                                    std::to_string(num_classes));
    ClassifierHead head;
    head.weight = Param("head.weight", rng.normal_matrix(embed_dim, num_classes, 0.001));
    return head;
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kMagic[8] = {'S', 'G', 'U', 'D', 'A', 'E', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u64(std::ostream& out, std::uint64_t v) { write_bytes(out, &v, 8); }
void write_u32(std::ostream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
void write_u8(std::ostream& out, std::uint8_t v) { write_bytes(out, &v, 1); }

void write_matrix(std::ostream& out, const Matrix& m) {
    write_u64(out, m.rows);
    write_u64(out, m.cols);
    write_bytes(out, m.data.data(), m.data.size() * sizeof(double));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint: truncated stream");
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v;
    read_bytes(in, &v, 8);
    return v;
}
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v;
    read_bytes(in, &v, 4);
    return v;
}
std::uint8_t read_u8(std::istream& in) {
    std::uint8_t v;
    read_bytes(in, &v, 1);
    return v;
}

Matrix read_matrix(std::istream& in) {
    Matrix m;
    m.rows = read_u64(in);
    m.cols = read_u64(in);
    m.data.resize(m.rows * m.cols);
    read_bytes(in, m.data.data(), m.data.size() * sizeof(double));
    return m;
}

void write_block(std::ostream& out, const Block& b) {
    write_matrix(out, b.linear.weight.value);
    write_matrix(out, b.linear.bias.value);
    write_matrix(out, b.bn.gamma.value);
    write_matrix(out, b.bn.beta.value);
    for (const auto& m : b.bn.running_mean) write_matrix(out, m);
    for (const auto& v : b.bn.running_var) write_matrix(out, v);
}

Block read_block(std::istream& in, const std::string& name) {
    Block b;
    b.linear.weight = Param(name + ".weight", read_matrix(in));
    b.linear.bias = Param(name + ".bias", read_matrix(in));
    b.bn.gamma = Param(name + ".gamma", read_matrix(in));
    b.bn.beta = Param(name + ".beta", read_matrix(in));
    for (auto& m : b.bn.running_mean) m = read_matrix(in);
    for (auto& v : b.bn.running_var) v = read_matrix(in);
    return b;
}

void write_linear(std::ostream& out, const LinearLayer& l) {
    write_matrix(out, l.weight.value);
    write_matrix(out, l.bias.value);
}

LinearLayer read_linear(std::istream& in, const std::string& name) {
    LinearLayer l;
    l.weight = Param(name + ".weight", read_matrix(in));
    l.bias = Param(name + ".bias", read_matrix(in));
    return l;
}

void write_header(std::ostream& out, std::uint8_t kind, const EncoderConfig& cfg) {
    write_bytes(out, kMagic, 8);
    write_u32(out, kVersion);
    write_u8(out, kind);
    write_u64(out, cfg.input_dim);
    write_u64(out, cfg.block_dims.size());
    for (std::size_t d : cfg.block_dims) write_u64(out, d);
    write_u64(out, cfg.embed_dim);
    write_u64(out, cfg.shared_depth);
    write_u8(out, cfg.shared_batchnorm ? 1 : 0);
}

EncoderConfig read_header(std::istream& in, std::uint8_t expected_kind) {
    char magic[8];
    read_bytes(in, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("checkpoint: bad magic");
    if (read_u32(in) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    const std::uint8_t kind = read_u8(in);
    if (kind != expected_kind) throw std::runtime_error("checkpoint: unexpected encoder kind");
    EncoderConfig cfg;
    cfg.input_dim = read_u64(in);
    cfg.block_dims.resize(read_u64(in));
    for (auto& d : cfg.block_dims) d = read_u64(in);
    cfg.embed_dim = read_u64(in);
    cfg.shared_depth = read_u64(in);
    cfg.shared_batchnorm = read_u8(in) != 0;
    return cfg;
}

std::uint8_t peek_kind(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    read_bytes(in, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("checkpoint: bad magic in " + path);
    read_u32(in);
    return read_u8(in);
}

}  // namespace

void save_encoder(const SingleEncoder& enc, std::ostream& out) {
    write_header(out, 0, enc.config());
    for (const auto& b : enc.blocks()) write_block(out, b);
    write_linear(out, enc.embed());
}

void save_encoder(const TwoBranchEncoder& enc, std::ostream& out) {
    write_header(out, 1, enc.cfg_);
    for (const auto& b : enc.shared_) write_block(out, *b);
    for (const auto& b : enc.src_blocks_) write_block(out, *b);
    write_linear(out, *enc.src_embed_);
    if (enc.cfg_.shared_depth < enc.cfg_.num_blocks()) {
        for (const auto& b : enc.tgt_blocks_) write_block(out, *b);
        write_linear(out, *enc.tgt_embed_);
    }
}

SingleEncoder load_single(std::istream& in) {
    const EncoderConfig cfg = read_header(in, 0);
    cfg.validate();
    SingleEncoder enc;
    Rng dummy(0);
    enc = SingleEncoder(cfg, dummy);
    for (std::size_t i = 0; i < enc.blocks().size(); ++i)
        enc.blocks()[i] = read_block(in, "block" + std::to_string(i));
    enc.embed() = read_linear(in, "embed");
    return enc;
}

TwoBranchEncoder load_two_branch(std::istream& in) {
    const EncoderConfig cfg = read_header(in, 1);
    cfg.validate();
    const std::size_t L = cfg.num_blocks();
    const std::size_t s = cfg.shared_depth;
    TwoBranchEncoder enc;
    enc.cfg_ = cfg;
    for (std::size_t i = 0; i < s; ++i)
        enc.shared_.push_back(std::make_shared<Block>(read_block(in, "shared" + std::to_string(i))));
    for (std::size_t i = s; i < L; ++i)
        enc.src_blocks_.push_back(std::make_shared<Block>(read_block(in, "src" + std::to_string(i))));
    enc.src_embed_ = std::make_shared<LinearLayer>(read_linear(in, s == L ? "embed" : "src_embed"));
    if (s < L) {
        for (std::size_t i = s; i < L; ++i)
            enc.tgt_blocks_.push_back(std::make_shared<Block>(read_block(in, "tgt" + std::to_string(i))));
        enc.tgt_embed_ = std::make_shared<LinearLayer>(read_linear(in, "tgt_embed"));
    } else {
        enc.tgt_embed_ = enc.src_embed_;
    }
    return enc;
}

void save_encoder_file(const SingleEncoder& enc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    save_encoder(enc, out);
}

void save_encoder_file(const TwoBranchEncoder& enc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    save_encoder(enc, out);
}

bool checkpoint_is_single(const std::string& path) { return peek_kind(path) == 0; }

SingleEncoder load_single_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_single(in);
}

TwoBranchEncoder load_encoder_file_as_two_branch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    if (peek_kind(path) == 0) {
        SingleEncoder single = load_single(in);
        EncoderConfig cfg = single.config();
        cfg.shared_depth = cfg.num_blocks();
        return init_two_branch(single, cfg);
    }
    return load_two_branch(in);
}

}  // namespace sguda
