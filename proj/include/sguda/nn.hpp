#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sguda/rng.hpp"
#include "sguda/tensor.hpp"

namespace sguda {

enum class Domain : int { Source = 0, Target = 1 };
enum class Mode { Train, Eval };

constexpr std::size_t kNumDomains = 2;

const char* domain_name(Domain d);

// Adam first/second moments plus per-parameter step counter. Lives inside the
// parameter so a freshly created parameter (e.g. a re-initialized classifier
// head) starts with clean optimizer state.
struct AdamState {
    Matrix m;
    Matrix v;
    std::int64_t step = 0;
};

struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    AdamState adam;

    Param() = default;
    Param(std::string n, Matrix init)
        : name(std::move(n)), value(std::move(init)), grad(value.rows, value.cols) {}

    void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
    double lr = 0.00035;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Classic Adam with weight decay folded into the gradient as an L2 term.
// Throws if the gradient holds non-finite values, naming the parameter.
void adam_step(Param& p, const AdamConfig& cfg);

// Convenience wrapper stepping a registered parameter set.
class Adam {
  public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void add_params(const std::vector<Param*>& ps) {
        params_.insert(params_.end(), ps.begin(), ps.end());
    }
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    const AdamConfig& config() const { return cfg_; }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }
    void step() {
        for (Param* p : params_) adam_step(*p, cfg_);
    }

  private:
    AdamConfig cfg_;
    std::vector<Param*> params_;
};

struct LrSchedule {
    double initial_lr = 0.00035;
    std::vector<std::size_t> decay_epochs = {40, 70};
    double decay_factor = 0.1;
};

// initial_lr * decay_factor^(number of decay epochs <= epoch)
double lr_at(const LrSchedule& schedule, std::size_t epoch);

class LinearLayer {
  public:
    LinearLayer() = default;
    LinearLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng, const std::string& name);

    Matrix forward(const Matrix& x);
    // Accumulates into weight/bias grads, returns grad wrt input.
    Matrix backward(const Matrix& grad_out);

    std::size_t in_dim() const { return weight.value.rows; }
    std::size_t out_dim() const { return weight.value.cols; }
    std::vector<Param*> params() { return {&weight, &bias}; }

    Param weight;  // in_dim x out_dim
    Param bias;    // 1 x out_dim

  private:
    Matrix cached_input_;
    bool has_cache_ = false;
};

class ReluLayer {
  public:
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& grad_out);

  private:
    Matrix cached_input_;
    bool has_cache_ = false;
};

// Batch normalization with per-domain running statistics: affine parameters
// are shared across domains, only the mean/variance slots are separate.
class BatchNormLayer {
  public:
    BatchNormLayer() = default;
    BatchNormLayer(std::size_t dim, const std::string& name);

    Matrix forward(const Matrix& x, Domain domain, Mode mode);
    // Requires a preceding train-mode forward; accumulates gamma/beta grads.
    Matrix backward(const Matrix& grad_out);

    std::size_t dim() const { return gamma.value.cols; }
    std::vector<Param*> params() { return {&gamma, &beta}; }

    Param gamma;  // 1 x dim
    Param beta;   // 1 x dim
    std::array<Matrix, kNumDomains> running_mean;  // each 1 x dim
    std::array<Matrix, kNumDomains> running_var;   // each 1 x dim

    double epsilon = 1e-5;
    double momentum = 0.1;

  private:
    Matrix x_hat_;
    std::vector<double> inv_std_;
    bool train_cache_ = false;
};

}  // namespace sguda
