#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace metrosim {

/// A dense parameter block with its gradient accumulator.  Matrices are
/// row-major rows x cols; vectors use cols == 1.
struct Tensor {
    std::vector<double> value;
    std::vector<double> grad;
    int rows = 0;
    int cols = 1;

    static Tensor matrix(int rows, int cols) {
        Tensor t;
        t.rows = rows;
        t.cols = cols;
        t.value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        t.grad.assign(t.value.size(), 0.0);
        return t;
    }
    static Tensor vector(int rows) { return matrix(rows, 1); }
    std::size_t size() const { return value.size(); }
};

/**
 * @brief Fixed-topology multilayer perceptron with tanh hidden layers and a
 * linear head, carrying its own single-sample reverse-mode pass.
 *
 * forward() caches every activation; backward() must follow the matching
 * forward() and accumulates parameter gradients (it never zeroes them, so a
 * minibatch is a plain forward/backward loop; scale the upstream seed by
 * the batch weight).  All inner loops run on the runtime-dispatched kernel
 * backends.
 */
class Mlp {
public:
    /// sizes = {input, hidden..., output}; at least one hidden layer.
    explicit Mlp(const std::vector<int>& sizes);

    /// Xavier-style scaled normal draws; the head layer's scale can be
    /// shrunk (policy heads start near zero so early actions hug the
    /// nominal midpoint).
    void init(std::mt19937_64& rng, double head_scale = 1.0);

    const std::vector<double>& forward(const double* input);
    void backward(const double* upstream);

    void zero_grad();
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }

private:
    std::vector<int> sizes_;
    std::vector<Tensor> weights_;  // one per layer
    std::vector<Tensor> biases_;
    // forward caches: activations_[0] is the input copy, activations_[l+1]
    // the post-nonlinearity output of layer l (head stays linear).
    std::vector<std::vector<double>> activations_;
    std::vector<std::vector<double>> grads_;  // backward scratch
};

/// Adam with bias correction over a fixed tensor list; one shared step
/// counter, per-tensor moment vectors, elementwise updates.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor*> params, double lr);

    void step();
    std::int64_t steps_taken() const { return t_; }
    double learning_rate() const { return lr_; }

    // Checkpoint plumbing.
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    const std::vector<std::vector<double>>& first_moments() const {
        return m_;
    }
    const std::vector<std::vector<double>>& second_moments() const {
        return v_;
    }
    void set_steps_taken(std::int64_t t) { t_ = t; }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_;
    std::int64_t t_ = 0;
};

/// Actor + critic pair: policy MLP emitting action means, a learnable
/// state-independent log-std vector, and a scalar value MLP.
struct ActorCritic {
    Mlp policy;
    Tensor log_std;
    Mlp value;

    ActorCritic(int obs_size, int action_size, int hidden = 64);

    /// Fresh parameters from the seed (policy head scaled down 100x,
    /// log-std zeroed => unit exploration noise).
    void init(std::uint64_t seed);

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    void zero_grad();

    /// Value estimate for one observation.
    double value_of(const double* obs);
};

/// Diagonal-Gaussian log density at `raw`, parameterised by mean and
/// log-std arrays of length `dim`.
double gaussian_log_prob(const double* raw, const double* mean,
                         const double* log_std, int dim);

}  // namespace metrosim
