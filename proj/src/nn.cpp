#include "sguda/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sguda {

const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

void adam_step(Param& p, const AdamConfig& cfg) {
    if (!p.grad.same_shape(p.value))
        throw std::invalid_argument("adam_step: grad shape " + p.grad.shape_str() +
                                    " does not match param '" + p.name + "' " + p.value.shape_str());
    if (!all_finite(p.grad))
        throw std::runtime_error("adam_step: non-finite gradient for parameter '" + p.name + "'");
    if (p.adam.step == 0) {
        p.adam.m = Matrix(p.value.rows, p.value.cols);
        p.adam.v = Matrix(p.value.rows, p.value.cols);
    }
    p.adam.step += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(p.adam.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(p.adam.step));
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
        const double g = p.grad.data[i] + cfg.weight_decay * p.value.data[i];
        p.adam.m.data[i] = b1 * p.adam.m.data[i] + (1.0 - b1) * g;
        p.adam.v.data[i] = b2 * p.adam.v.data[i] + (1.0 - b2) * g * g;
        const double m_hat = p.adam.m.data[i] / bc1;
        const double v_hat = p.adam.v.data[i] / bc2;
        p.value.data[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
    std::size_t decays = 0;
    for (std::size_t e : schedule.decay_epochs)
        if (e <= epoch) ++decays;
    return schedule.initial_lr * std::pow(schedule.decay_factor, static_cast<double>(decays));
}

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng, const std::string& name)
    : weight(name + ".weight", rng.normal_matrix(in_dim, out_dim, std::sqrt(2.0 / static_cast<double>(in_dim)))),
      bias(name + ".bias", Matrix(1, out_dim)) {}

Matrix LinearLayer::forward(const Matrix& x) {
    if (x.cols != in_dim())
        throw std::invalid_argument("linear_forward: input " + x.shape_str() + " does not match weight " +
                                    weight.value.shape_str());
    cached_input_ = x;
    has_cache_ = true;
    Matrix out = matmul(x, weight.value);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) += bias.value.at(0, j);
    return out;
}

Matrix LinearLayer::backward(const Matrix& grad_out) {
    if (!has_cache_) throw std::logic_error("linear backward called before forward");
    if (grad_out.rows != cached_input_.rows || grad_out.cols != out_dim())
        throw std::invalid_argument("linear backward: grad shape " + grad_out.shape_str() + " mismatch");
    add_inplace(weight.grad, matmul(transpose(cached_input_), grad_out));
    for (std::size_t i = 0; i < grad_out.rows; ++i)
        for (std::size_t j = 0; j < grad_out.cols; ++j) bias.grad.at(0, j) += grad_out.at(i, j);
    return matmul(grad_out, transpose(weight.value));
}

Matrix ReluLayer::forward(const Matrix& x) {
    cached_input_ = x;
    has_cache_ = true;
    Matrix out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix ReluLayer::backward(const Matrix& grad_out) {
    if (!has_cache_) throw std::logic_error("relu backward called before forward");
    if (!grad_out.same_shape(cached_input_))
        throw std::invalid_argument("relu backward: grad shape mismatch");
    Matrix out = grad_out;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (cached_input_.data[i] <= 0.0) out.data[i] = 0.0;
    return out;
}

BatchNormLayer::BatchNormLayer(std::size_t dim, const std::string& name)
    : gamma(name + ".gamma", Matrix(1, dim, 1.0)), beta(name + ".beta", Matrix(1, dim, 0.0)) {
    for (std::size_t d = 0; d < kNumDomains; ++d) {
        running_mean[d] = Matrix(1, dim, 0.0);
        running_var[d] = Matrix(1, dim, 1.0);
    }
}

Matrix BatchNormLayer::forward(const Matrix& x, Domain domain, Mode mode) {
    if (x.cols != dim())
        throw std::invalid_argument("batchnorm_forward: input " + x.shape_str() + " does not match dim " +
                                    std::to_string(dim()));
    const std::size_t slot = static_cast<std::size_t>(domain);
    const std::size_t n = x.rows;
    Matrix out(x.rows, x.cols);

    if (mode == Mode::Train) {
        if (n < 2)
            throw std::invalid_argument("batchnorm_forward: train mode requires batch size >= 2, got " +
                                        std::to_string(n));
        x_hat_ = Matrix(x.rows, x.cols);
        inv_std_.assign(x.cols, 0.0);
        for (std::size_t c = 0; c < x.cols; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += x.at(i, c);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = x.at(i, c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);  // biased, used for normalization
            const double inv = 1.0 / std::sqrt(var + epsilon);
            inv_std_[c] = inv;
            for (std::size_t i = 0; i < n; ++i) {
                const double xh = (x.at(i, c) - mean) * inv;
                x_hat_.at(i, c) = xh;
                out.at(i, c) = gamma.value.at(0, c) * xh + beta.value.at(0, c);
            }
            // running stats use the unbiased variance, touching only `domain`'s slot
            const double unbiased = var * static_cast<double>(n) / static_cast<double>(n - 1);
            running_mean[slot].at(0, c) = (1.0 - momentum) * running_mean[slot].at(0, c) + momentum * mean;
            running_var[slot].at(0, c) = (1.0 - momentum) * running_var[slot].at(0, c) + momentum * unbiased;
        }
        train_cache_ = true;
    } else {
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double mean = running_mean[slot].at(0, c);
            const double inv = 1.0 / std::sqrt(running_var[slot].at(0, c) + epsilon);
            for (std::size_t i = 0; i < n; ++i)
                out.at(i, c) = gamma.value.at(0, c) * (x.at(i, c) - mean) * inv + beta.value.at(0, c);
        }
        train_cache_ = false;
    }
    return out;
}

Matrix BatchNormLayer::backward(const Matrix& grad_out) {
    if (!train_cache_)
        throw std::logic_error("batchnorm_backward requires a preceding train-mode forward");
    if (!grad_out.same_shape(x_hat_))
        throw std::invalid_argument("batchnorm_backward: grad shape mismatch");
    const std::size_t n = grad_out.rows;
    const double dn = static_cast<double>(n);
    Matrix grad_in(grad_out.rows, grad_out.cols);
    for (std::size_t c = 0; c < grad_out.cols; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double gxh = grad_out.at(i, c);
            sum_g += gxh;
            sum_gx += gxh * x_hat_.at(i, c);
        }
        gamma.grad.at(0, c) += sum_gx;
        beta.grad.at(0, c) += sum_g;
        const double g = gamma.value.at(0, c);
        const double inv = inv_std_[c];
        for (std::size_t i = 0; i < n; ++i) {
            const double gxh = grad_out.at(i, c) * g;
            const double sum_gxh = sum_g * g;
            const double sum_gxh_xh = sum_gx * g;
            grad_in.at(i, c) = inv / dn * (dn * gxh - sum_gxh - x_hat_.at(i, c) * sum_gxh_xh);
        }
    }
    return grad_in;
}

}  // namespace sguda
