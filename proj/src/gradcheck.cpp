#include "sguda/gradcheck.hpp"

#include <chrono>
#include <cmath>

#include "sguda/losses.hpp"
#include "sguda/rng.hpp"

namespace sguda {

double central_difference(const std::function<double()>& loss, double& slot, double h) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss();
    slot = saved - h;
    const double down = loss();
    slot = saved;
    return (up - down) / (2.0 * h);
}

double fd_max_rel_err(const std::function<double()>& loss, Matrix& value, const Matrix& analytic_grad,
                      double h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < value.data.size(); ++i) {
        const double fd = central_difference(loss, value.data[i], h);
        const double a = analytic_grad.data[i];
        const double denom = std::max({std::abs(a), std::abs(fd), 1e-4});
        worst = std::max(worst, std::abs(a - fd) / denom);
    }
    return worst;
}

namespace {

struct Harness {
    GradCheckReport report;

    void record(const std::string& name, double err, double tol) {
        report.cases.push_back({name, err, tol, err < tol});
        if (err >= tol) report.all_pass = false;
    }
};

std::vector<int> pk_labels(std::size_t p, std::size_t k) {
    std::vector<int> labels;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < k; ++j) labels.push_back(static_cast<int>(i));
    return labels;
}

void check_linear(Harness& h, Rng& rng) {
    LinearLayer layer(5, 4, rng, "lin");
    Matrix x = rng.normal_matrix(6, 5, 1.0);
    Matrix weights(4, 3, 0.0);  // downstream mixer so the loss touches all outputs
    weights = rng.normal_matrix(4, 3, 1.0);

    auto loss = [&]() {
        const Matrix out = layer.forward(x);
        const Matrix mixed = matmul(out, weights);
        double s = 0.0;
        for (double v : mixed.data) s += v * v;
        return 0.5 * s;
    };

    layer.weight.zero_grad();
    layer.bias.zero_grad();
    const Matrix out = layer.forward(x);
    const Matrix mixed = matmul(out, weights);
    Matrix grad_mixed = mixed;
    const Matrix grad_out = matmul(grad_mixed, transpose(weights));
    const Matrix grad_x = layer.backward(grad_out);

    h.record("linear.weight", fd_max_rel_err(loss, layer.weight.value, layer.weight.grad), 1e-6);
    h.record("linear.bias", fd_max_rel_err(loss, layer.bias.value, layer.bias.grad), 1e-6);
    h.record("linear.input", fd_max_rel_err(loss, x, grad_x), 1e-6);
}

void check_relu(Harness& h, Rng& rng) {
    Matrix x = rng.normal_matrix(6, 5, 1.0);
    for (double& v : x.data)  // keep away from the kink
        if (std::abs(v) < 1e-3) v = v < 0 ? v - 1e-2 : v + 1e-2;
    Matrix weights = rng.normal_matrix(5, 2, 1.0);

    ReluLayer relu;
    auto loss = [&]() {
        const Matrix out = relu.forward(x);
        const Matrix mixed = matmul(out, weights);
        double s = 0.0;
        for (double v : mixed.data) s += v * v;
        return 0.5 * s;
    };

    const Matrix out = relu.forward(x);
    Matrix grad_out = matmul(matmul(out, weights), transpose(weights));
    const Matrix grad_x = relu.backward(grad_out);
    h.record("relu.input", fd_max_rel_err(loss, x, grad_x), 1e-6);
}

void check_batchnorm(Harness& h, Rng& rng) {
    BatchNormLayer bn(4, "bn");
    bn.gamma.value = rng.normal_matrix(1, 4, 0.5);
    for (double& v : bn.gamma.value.data) v += 1.0;
    bn.beta.value = rng.normal_matrix(1, 4, 0.5);
    Matrix x = rng.normal_matrix(7, 4, 1.5);
    Matrix weights = rng.normal_matrix(4, 3, 1.0);

    auto loss = [&]() {
        const Matrix out = bn.forward(x, Domain::Source, Mode::Train);
        const Matrix mixed = matmul(out, weights);
        double s = 0.0;
        for (double v : mixed.data) s += v * v;
        return 0.5 * s;
    };

    bn.gamma.zero_grad();
    bn.beta.zero_grad();
    const Matrix out = bn.forward(x, Domain::Source, Mode::Train);
    Matrix grad_out = matmul(matmul(out, weights), transpose(weights));
    const Matrix grad_x = bn.backward(grad_out);

    h.record("batchnorm.input", fd_max_rel_err(loss, x, grad_x), 1e-5);
    h.record("batchnorm.gamma", fd_max_rel_err(loss, bn.gamma.value, bn.gamma.grad), 1e-5);
    h.record("batchnorm.beta", fd_max_rel_err(loss, bn.beta.value, bn.beta.grad), 1e-5);
}

void check_triplet(Harness& h, Rng& rng) {
    Matrix emb = rng.normal_matrix(8, 5, 1.0);
    const std::vector<int> labels = pk_labels(2, 4);
    TripletConfig cfg;
    cfg.margin = 0.3;

    auto loss = [&]() { return triplet_batch_hard(emb, labels, cfg).loss; };
    const TripletResult res = triplet_batch_hard(emb, labels, cfg);
    h.record("triplet.embeddings", fd_max_rel_err(loss, emb, res.grad_embeddings), 1e-5);
}

void check_softmax_ce(Harness& h, Rng& rng) {
    Matrix emb = rng.normal_matrix(6, 5, 1.0);
    const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
    ClassifierHead head = make_classifier_head(5, 3, rng);
    scale_inplace(head.weight.value, 500.0);  // spread the logits

    auto loss = [&]() { return softmax_ce(emb, labels, head).loss; };
    const CeResult res = softmax_ce(emb, labels, head);
    h.record("softmax_ce.embeddings", fd_max_rel_err(loss, emb, res.grad_embeddings), 1e-6);
    h.record("softmax_ce.head", fd_max_rel_err(loss, head.weight.value, res.grad_head), 1e-6);
}

void check_joint(Harness& h, Rng& rng) {
    EncoderConfig cfg;
    cfg.input_dim = 6;
    cfg.block_dims = {8, 7};
    cfg.embed_dim = 5;
    cfg.shared_depth = 1;

    Rng rng_init = rng.fork();
    SingleEncoder single(cfg, rng_init);
    TwoBranchEncoder enc = init_two_branch(single, cfg);

    ClassifierHead head_s = make_classifier_head(cfg.embed_dim, 2, rng);
    ClassifierHead head_t = make_classifier_head(cfg.embed_dim, 2, rng);
    scale_inplace(head_s.weight.value, 300.0);
    scale_inplace(head_t.weight.value, 300.0);

    Matrix xs = rng.normal_matrix(8, cfg.input_dim, 1.0);
    Matrix xt = rng.normal_matrix(8, cfg.input_dim, 1.0);
    const std::vector<int> ys = pk_labels(2, 4);
    const std::vector<int> yt = pk_labels(2, 4);
    TripletConfig tcfg;

    auto loss = [&]() {
        const Matrix es = enc.forward(xs, Domain::Source, Mode::Train);
        const double ls = domain_loss(es, ys, head_s, tcfg).loss;
        const Matrix et = enc.forward(xt, Domain::Target, Mode::Train);
        const double lt = domain_loss(et, yt, head_t, tcfg).loss;
        return ls + lt;
    };

    std::vector<Param*> params = enc.all_parameters();
    params.push_back(&head_s.weight);
    params.push_back(&head_t.weight);
    for (Param* p : params) p->zero_grad();
    joint_loss(enc, xs, ys, head_s, xt, yt, head_t, tcfg);

    for (Param* p : params) {
        const Matrix analytic = p->grad;  // FD evaluations do not touch grads
        h.record("joint." + p->name, fd_max_rel_err(loss, p->value, analytic), 1e-5);
    }
}

}  // namespace

GradCheckReport run_full_gradcheck(std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    Harness h;
    Rng rng(seed);
    check_linear(h, rng);
    check_relu(h, rng);
    check_batchnorm(h, rng);
    check_triplet(h, rng);
    check_softmax_ce(h, rng);
    check_joint(h, rng);
    h.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return h.report;
}

}  // namespace sguda
