#include "metrosim/mlp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "metrosim/errors.hpp"
#include "metrosim/kernels.hpp"
#include "metrosim/rng.hpp"

namespace metrosim {

Mlp::Mlp(const std::vector<int>& sizes) : sizes_(sizes) {
    if (sizes_.size() < 3) {
        throw ValidationError("mlp: need input, >=1 hidden, output sizes");
    }
    for (int s : sizes_) {
        if (s <= 0) throw ValidationError("mlp: layer sizes must be positive");
    }
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        weights_.push_back(Tensor::matrix(sizes_[l + 1], sizes_[l]));
        biases_.push_back(Tensor::vector(sizes_[l + 1]));
    }
    activations_.resize(layers + 1);
    grads_.resize(layers + 1);
    for (std::size_t l = 0; l < activations_.size(); ++l) {
        activations_[l].assign(static_cast<std::size_t>(sizes_[l]), 0.0);
        grads_[l].assign(activations_[l].size(), 0.0);
    }
}

void Mlp::init(std::mt19937_64& rng, double head_scale) {
    const std::size_t layers = weights_.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Tensor& w = weights_[l];
        double scale =
            std::sqrt(2.0 / static_cast<double>(w.rows + w.cols));
        if (l + 1 == layers) scale *= head_scale;
        for (double& x : w.value) x = scale * standard_normal(rng);
        for (double& b : biases_[l].value) b = 0.0;
    }
}

const std::vector<double>& Mlp::forward(const double* input) {
    std::copy(input, input + sizes_.front(), activations_[0].begin());
    const std::size_t layers = weights_.size();
    for (std::size_t l = 0; l < layers; ++l) {
        const Tensor& w = weights_[l];
        kernels::matvec(w.value.data(), activations_[l].data(),
                        biases_[l].value.data(), activations_[l + 1].data(),
                        w.rows, w.cols);
        if (l + 1 < layers) {
            for (double& a : activations_[l + 1]) a = std::tanh(a);
        }
    }
    return activations_.back();
}

void Mlp::backward(const double* upstream) {
    const std::size_t layers = weights_.size();
    std::copy(upstream, upstream + sizes_.back(), grads_.back().begin());
    for (std::size_t l = layers; l-- > 0;) {
        Tensor& w = weights_[l];
        std::vector<double>& gout = grads_[l + 1];
        if (l + 1 < layers) {
            // Through tanh: activations_[l+1] already holds tanh(z).
            const std::vector<double>& a = activations_[l + 1];
            for (std::size_t i = 0; i < gout.size(); ++i) {
                gout[i] *= 1.0 - a[i] * a[i];
            }
        }
        kernels::ger(1.0, gout.data(), activations_[l].data(),
                     w.grad.data(), w.rows, w.cols);
        kernels::axpy(1.0, gout.data(), biases_[l].grad.data(), w.rows);
        if (l > 0) {
            std::fill(grads_[l].begin(), grads_[l].end(), 0.0);
            kernels::matvec_t(w.value.data(), gout.data(), grads_[l].data(),
                              w.rows, w.cols);
        }
    }
}

void Mlp::zero_grad() {
    for (Tensor& t : weights_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
    for (Tensor& t : biases_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

std::vector<Tensor*> Mlp::parameters() {
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const Tensor*> Mlp::parameters() const {
    std::vector<const Tensor*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr)
    : params_(std::move(params)), lr_(lr) {
    for (const Tensor* t : params_) {
        m_.emplace_back(t->size(), 0.0);
        v_.emplace_back(t->size(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        kernels::adam_update(p.value.data(), p.grad.data(), m_[i].data(),
                             v_[i].data(), p.size(), lr_, 0.9, 0.999, 1e-8,
                             t_);
    }
}

ActorCritic::ActorCritic(int obs_size, int action_size, int hidden)
    : policy({obs_size, hidden, hidden, action_size}),
      log_std(Tensor::vector(action_size)),
      value({obs_size, hidden, hidden, 1}) {}

void ActorCritic::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    policy.init(rng, 0.01);
    value.init(rng, 1.0);
    std::fill(log_std.value.begin(), log_std.value.end(), 0.0);
    zero_grad();
}

std::vector<Tensor*> ActorCritic::parameters() {
    std::vector<Tensor*> out = policy.parameters();
    out.push_back(&log_std);
    for (Tensor* t : value.parameters()) out.push_back(t);
    return out;
}

std::vector<const Tensor*> ActorCritic::parameters() const {
    std::vector<const Tensor*> out = policy.parameters();
    out.push_back(&log_std);
    for (const Tensor* t : value.parameters()) out.push_back(t);
    return out;
}

void ActorCritic::zero_grad() {
    policy.zero_grad();
    value.zero_grad();
    std::fill(log_std.grad.begin(), log_std.grad.end(), 0.0);
}

double ActorCritic::value_of(const double* obs) {
    return value.forward(obs)[0];
}

double gaussian_log_prob(const double* raw, const double* mean,
                         const double* log_std, int dim) {
    const double kLogTwoPi = std::log(2.0 * std::numbers::pi);
    double lp = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double sigma = std::exp(log_std[d]);
        const double z = (raw[d] - mean[d]) / sigma;
        lp += -0.5 * z * z - log_std[d] - 0.5 * kLogTwoPi;
    }
    return lp;
}

}  // namespace metrosim
