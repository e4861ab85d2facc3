#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace airtraj::diff {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // same size as value, zero until backward
    std::vector<std::shared_ptr<Node>> parents;
    // Pulls this node's grad into the parents' grads.
    std::function<void(Node&)> backprop;
    bool requires_grad = false;
};
} // namespace detail

// Handle to one node of the computation graph. Copies share the node. A fresh
// graph is built per forward pass; parameter leaves persist across passes.
class Array {
public:
    Array() = default;

    static Array zeros(Shape shape, bool requires_grad = false);
    static Array from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Array scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> values() const { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    double value_at(std::size_t i) const { return node_->value[i]; }
    double scalar_value() const;

    // Leaf mutation (parameters only).
    std::vector<double>& mutable_values() { return node_->value; }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Array(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Elementwise
Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array scale(const Array& a, double c);
Array exp(const Array& a);
Array relu(const Array& a);
Array leaky_relu(const Array& a, double negative_slope = 0.2);
Array tanh(const Array& a);

// Shape / structure
Array reshape(const Array& a, Shape shape);
Array concat(const std::vector<Array>& xs, int axis);
Array select(const Array& a, int axis, int index); // drops the axis
Array softmax(const Array& a, int axis);

// Linear algebra
Array linear(const Array& x, const Array& weight, const Array& bias); // [in] -> [out]
Array matmul(const Array& a, const Array& b);                         // [m,k]x[k,n] -> [m,n]

// Causal dilated 1-D convolution: x [C_in, T], kernels [C_out, C_in, K],
// bias [C_out] -> [C_out, T]. Output at t depends only on inputs <= t.
Array causal_conv1d(const Array& x, const Array& kernels, const Array& bias, int dilation);

// Reductions / losses
Array sum(const Array& a);                          // scalar
Array mse(const Array& pred, const Array& target);  // scalar, mean over all elements
Array gaussian_kl(const Array& mu, const Array& log_var); // scalar, KL(N(mu,sigma) || N(0,I))

// Verlet position rollout from the last two known positions:
//   p_1 = 2*x_last - x_prev + s_1*dt^2,  p_t = 2*p_{t-1} - p_{t-2} + s_t*dt^2.
// s is [T, D]; x_prev, x_last are [D]; result is [T, D].
Array verlet_rollout(const Array& s, const Array& x_prev, const Array& x_last, double dt);

// Plain-value twin of verlet_rollout, shared by the op and the baselines.
std::vector<double> verlet_rollout_values(std::span<const double> s, std::span<const double> x_prev,
                                          std::span<const double> x_last, int steps, int dims,
                                          double dt);

// Reverse-mode sweep from a scalar loss; accumulates into every reachable
// node's grad.
void backward(const Array& scalar_loss);

} // namespace airtraj::diff
