#include "airtraj/diff/array.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace airtraj::diff {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
}

NodePtr make_node(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                  const char* op) {
    check_finite(value, op);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->grad.assign(n->value.size(), 0.0);
    n->requires_grad = std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
    n->parents = std::move(parents);
    return n;
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::runtime_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
}

// outer/inner extents around an axis, for strided traversal.
void axis_extents(const Shape& shape, int axis, std::size_t* outer, std::size_t* len,
                  std::size_t* inner) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw std::runtime_error("axis " + std::to_string(axis) + " out of range for " +
                                 shape_str(shape));
    *outer = 1;
    *inner = 1;
    for (int i = 0; i < axis; ++i) *outer *= static_cast<std::size_t>(shape[i]);
    *len = static_cast<std::size_t>(shape[axis]);
    for (std::size_t i = axis + 1; i < shape.size(); ++i)
        *inner *= static_cast<std::size_t>(shape[i]);
}

Array unary(const Array& a, const char* op, const std::function<double(double)>& f,
            const std::function<double(double, double)>& dfdx /* (x, y) -> dy/dx */) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(a.value_at(i));
    auto n = make_node(a.shape(), std::move(v), {a.node()}, op);
    if (n->requires_grad) {
        n->backprop = [dfdx](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (std::size_t i = 0; i < self.value.size(); ++i)
                p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
        };
    }
    return Array(n);
}

} // namespace

Array Array::zeros(Shape shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value.assign(numel(shape), 0.0);
    n->grad.assign(n->value.size(), 0.0);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Array(n);
}

Array Array::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel(shape) != values.size())
        throw std::runtime_error("value count " + std::to_string(values.size()) +
                                 " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->grad.assign(n->value.size(), 0.0);
    n->requires_grad = requires_grad;
    return Array(n);
}

Array Array::scalar(double v) { return from({}, {v}); }

double Array::scalar_value() const {
    if (node_->value.size() != 1)
        throw std::runtime_error("scalar_value on non-scalar " + shape_str(node_->shape));
    return node_->value[0];
}

Array add(const Array& a, const Array& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value_at(i) + b.value_at(i);
    auto n = make_node(a.shape(), std::move(v), {a.node(), b.node()}, "add");
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            for (int p = 0; p < 2; ++p) {
                Node& par = *self.parents[p];
                if (!par.requires_grad) continue;
                for (std::size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
            }
        };
    }
    return Array(n);
}

Array sub(const Array& a, const Array& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value_at(i) - b.value_at(i);
    auto n = make_node(a.shape(), std::move(v), {a.node(), b.node()}, "sub");
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (pa.requires_grad) pa.grad[i] += self.grad[i];
                if (pb.requires_grad) pb.grad[i] -= self.grad[i];
            }
        };
    }
    return Array(n);
}

Array mul(const Array& a, const Array& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value_at(i) * b.value_at(i);
    auto n = make_node(a.shape(), std::move(v), {a.node(), b.node()}, "mul");
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
                if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
            }
        };
    }
    return Array(n);
}

Array scale(const Array& a, double c) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value_at(i) * c;
    auto n = make_node(a.shape(), std::move(v), {a.node()}, "scale");
    if (n->requires_grad) {
        n->backprop = [c](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
        };
    }
    return Array(n);
}

Array exp(const Array& a) {
    return unary(a, "exp", [](double x) { return std::exp(x); },
                 [](double, double y) { return y; });
}

Array relu(const Array& a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Array leaky_relu(const Array& a, double negative_slope) {
    return unary(a, "leaky_relu",
                 [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
                 [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

Array tanh(const Array& a) {
    return unary(a, "tanh", [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Array reshape(const Array& a, Shape shape) {
    if (numel(shape) != a.size())
        throw std::runtime_error("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                 shape_str(shape));
    auto n = make_node(std::move(shape), {a.values().begin(), a.values().end()}, {a.node()},
                       "reshape");
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        };
    }
    return Array(n);
}

Array concat(const std::vector<Array>& xs, int axis) {
    if (xs.empty()) throw std::runtime_error("concat of zero arrays");
    const Shape& first = xs[0].shape();
    if (axis < 0 || axis >= static_cast<int>(first.size()))
        throw std::runtime_error("concat: axis " + std::to_string(axis) + " out of range for " +
                                 shape_str(first));
    Shape out_shape = first;
    int total = 0;
    for (const auto& x : xs) {
        const Shape& s = x.shape();
        if (s.size() != first.size())
            throw std::runtime_error("concat: rank mismatch " + shape_str(first) + " vs " +
                                     shape_str(s));
        for (std::size_t i = 0; i < s.size(); ++i)
            if (static_cast<int>(i) != axis && s[i] != first[i])
                throw std::runtime_error("concat: shape mismatch " + shape_str(first) + " vs " +
                                         shape_str(s));
        total += s[static_cast<std::size_t>(axis)];
    }
    out_shape[static_cast<std::size_t>(axis)] = total;

    std::size_t outer, out_len, inner;
    axis_extents(out_shape, axis, &outer, &out_len, &inner);

    std::vector<double> v(numel(out_shape));
    std::vector<NodePtr> parents;
    std::size_t offset = 0; // along the axis
    for (const auto& x : xs) {
        const std::size_t len = static_cast<std::size_t>(x.shape()[static_cast<std::size_t>(axis)]);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < len; ++j)
                for (std::size_t k = 0; k < inner; ++k)
                    v[(o * out_len + offset + j) * inner + k] =
                        x.value_at((o * len + j) * inner + k);
        offset += len;
        parents.push_back(x.node());
    }

    auto n = make_node(out_shape, std::move(v), std::move(parents), "concat");
    if (n->requires_grad) {
        n->backprop = [axis](Node& self) {
            std::size_t outer, out_len, inner;
            axis_extents(self.shape, axis, &outer, &out_len, &inner);
            std::size_t offset = 0;
            for (auto& pp : self.parents) {
                Node& p = *pp;
                const std::size_t len =
                    static_cast<std::size_t>(p.shape[static_cast<std::size_t>(axis)]);
                if (p.requires_grad)
                    for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t j = 0; j < len; ++j)
                            for (std::size_t k = 0; k < inner; ++k)
                                p.grad[(o * len + j) * inner + k] +=
                                    self.grad[(o * out_len + offset + j) * inner + k];
                offset += len;
            }
        };
    }
    return Array(n);
}

Array select(const Array& a, int axis, int index) {
    std::size_t outer, len, inner;
    axis_extents(a.shape(), axis, &outer, &len, &inner);
    if (index < 0 || static_cast<std::size_t>(index) >= len)
        throw std::runtime_error("select: index " + std::to_string(index) + " out of range for " +
                                 shape_str(a.shape()));
    Shape out_shape;
    for (std::size_t i = 0; i < a.shape().size(); ++i)
        if (static_cast<int>(i) != axis) out_shape.push_back(a.shape()[i]);

    std::vector<double> v(outer * inner);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < inner; ++k)
            v[o * inner + k] = a.value_at((o * len + static_cast<std::size_t>(index)) * inner + k);

    auto n = make_node(std::move(out_shape), std::move(v), {a.node()}, "select");
    if (n->requires_grad) {
        const std::size_t len_c = len, inner_c = inner, outer_c = outer;
        const std::size_t idx = static_cast<std::size_t>(index);
        n->backprop = [outer_c, len_c, inner_c, idx](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (std::size_t o = 0; o < outer_c; ++o)
                for (std::size_t k = 0; k < inner_c; ++k)
                    p.grad[(o * len_c + idx) * inner_c + k] += self.grad[o * inner_c + k];
        };
    }
    return Array(n);
}

Array softmax(const Array& a, int axis) {
    std::size_t outer, len, inner;
    axis_extents(a.shape(), axis, &outer, &len, &inner);

    std::vector<double> v(a.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t k = 0; k < inner; ++k) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < len; ++j)
                mx = std::max(mx, a.value_at((o * len + j) * inner + k));
            double total = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const std::size_t at = (o * len + j) * inner + k;
                v[at] = std::exp(a.value_at(at) - mx);
                total += v[at];
            }
            for (std::size_t j = 0; j < len; ++j) v[(o * len + j) * inner + k] /= total;
        }
    }

    auto n = make_node(a.shape(), std::move(v), {a.node()}, "softmax");
    if (n->requires_grad) {
        const std::size_t outer_c = outer, len_c = len, inner_c = inner;
        n->backprop = [outer_c, len_c, inner_c](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (std::size_t o = 0; o < outer_c; ++o) {
                for (std::size_t k = 0; k < inner_c; ++k) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < len_c; ++j) {
                        const std::size_t at = (o * len_c + j) * inner_c + k;
                        dot += self.grad[at] * self.value[at];
                    }
                    for (std::size_t j = 0; j < len_c; ++j) {
                        const std::size_t at = (o * len_c + j) * inner_c + k;
                        p.grad[at] += self.value[at] * (self.grad[at] - dot);
                    }
                }
            }
        };
    }
    return Array(n);
}

Array linear(const Array& x, const Array& weight, const Array& bias) {
    if (x.shape().size() != 1 || weight.shape().size() != 2 || bias.shape().size() != 1)
        throw std::runtime_error("linear: expected x[in], W[out,in], b[out]; got " +
                                 shape_str(x.shape()) + ", " + shape_str(weight.shape()) + ", " +
                                 shape_str(bias.shape()));
    const int in = x.shape()[0];
    const int out = weight.shape()[0];
    if (weight.shape()[1] != in || bias.shape()[0] != out)
        throw std::runtime_error("linear: shape mismatch x" + shape_str(x.shape()) + " W" +
                                 shape_str(weight.shape()) + " b" + shape_str(bias.shape()));

    std::vector<double> v(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
        double acc = bias.value_at(static_cast<std::size_t>(o));
        const std::size_t row = static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += weight.value_at(row + i) * x.value_at(i);
        v[static_cast<std::size_t>(o)] = acc;
    }

    auto n = make_node({out}, std::move(v), {x.node(), weight.node(), bias.node()}, "linear");
    if (n->requires_grad) {
        n->backprop = [in, out](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            Node& pb = *self.parents[2];
            for (int o = 0; o < out; ++o) {
                const double g = self.grad[static_cast<std::size_t>(o)];
                const std::size_t row = static_cast<std::size_t>(o) * in;
                if (pb.requires_grad) pb.grad[static_cast<std::size_t>(o)] += g;
                for (int i = 0; i < in; ++i) {
                    if (px.requires_grad) px.grad[i] += g * pw.value[row + i];
                    if (pw.requires_grad) pw.grad[row + i] += g * px.value[i];
                }
            }
        };
    }
    return Array(n);
}

Array matmul(const Array& a, const Array& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::runtime_error("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                 shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1], nn = b.shape()[1];

    std::vector<double> v(static_cast<std::size_t>(m) * nn, 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a.value_at(static_cast<std::size_t>(i) * k + p);
            for (int j = 0; j < nn; ++j)
                v[static_cast<std::size_t>(i) * nn + j] +=
                    av * b.value_at(static_cast<std::size_t>(p) * nn + j);
        }

    auto n = make_node({m, nn}, std::move(v), {a.node(), b.node()}, "matmul");
    if (n->requires_grad) {
        n->backprop = [m, k, nn](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nn; ++j) {
                    const double g = self.grad[static_cast<std::size_t>(i) * nn + j];
                    for (int p = 0; p < k; ++p) {
                        if (pa.requires_grad)
                            pa.grad[static_cast<std::size_t>(i) * k + p] +=
                                g * pb.value[static_cast<std::size_t>(p) * nn + j];
                        if (pb.requires_grad)
                            pb.grad[static_cast<std::size_t>(p) * nn + j] +=
                                g * pa.value[static_cast<std::size_t>(i) * k + p];
                    }
                }
        };
    }
    return Array(n);
}

Array causal_conv1d(const Array& x, const Array& kernels, const Array& bias, int dilation) {
    if (x.shape().size() != 2 || kernels.shape().size() != 3 || bias.shape().size() != 1)
        throw std::runtime_error("causal_conv1d: expected x[C_in,T], k[C_out,C_in,K], b[C_out]; got " +
                                 shape_str(x.shape()) + ", " + shape_str(kernels.shape()) + ", " +
                                 shape_str(bias.shape()));
    const int c_in = x.shape()[0], T = x.shape()[1];
    const int c_out = kernels.shape()[0], K = kernels.shape()[2];
    if (kernels.shape()[1] != c_in || bias.shape()[0] != c_out)
        throw std::runtime_error("causal_conv1d: shape mismatch x" + shape_str(x.shape()) + " k" +
                                 shape_str(kernels.shape()) + " b" + shape_str(bias.shape()));
    if (dilation < 1) throw std::runtime_error("causal_conv1d: dilation must be >= 1");

    std::vector<double> v(static_cast<std::size_t>(c_out) * T);
    for (int o = 0; o < c_out; ++o)
        for (int t = 0; t < T; ++t) {
            double acc = bias.value_at(static_cast<std::size_t>(o));
            for (int i = 0; i < c_in; ++i)
                for (int k = 0; k < K; ++k) {
                    const int src = t - (K - 1 - k) * dilation; // left padding with zeros
                    if (src < 0) continue;
                    acc += kernels.value_at((static_cast<std::size_t>(o) * c_in + i) * K + k) *
                           x.value_at(static_cast<std::size_t>(i) * T + src);
                }
            v[static_cast<std::size_t>(o) * T + t] = acc;
        }

    auto n = make_node({c_out, T}, std::move(v), {x.node(), kernels.node(), bias.node()},
                       "causal_conv1d");
    if (n->requires_grad) {
        n->backprop = [c_in, T, c_out, K, dilation](Node& self) {
            Node& px = *self.parents[0];
            Node& pk = *self.parents[1];
            Node& pb = *self.parents[2];
            for (int o = 0; o < c_out; ++o)
                for (int t = 0; t < T; ++t) {
                    const double g = self.grad[static_cast<std::size_t>(o) * T + t];
                    if (g == 0.0) continue;
                    if (pb.requires_grad) pb.grad[static_cast<std::size_t>(o)] += g;
                    for (int i = 0; i < c_in; ++i)
                        for (int k = 0; k < K; ++k) {
                            const int src = t - (K - 1 - k) * dilation;
                            if (src < 0) continue;
                            const std::size_t kat = (static_cast<std::size_t>(o) * c_in + i) * K + k;
                            const std::size_t xat = static_cast<std::size_t>(i) * T + src;
                            if (px.requires_grad) px.grad[xat] += g * pk.value[kat];
                            if (pk.requires_grad) pk.grad[kat] += g * px.value[xat];
                        }
                }
        };
    }
    return Array(n);
}

Array sum(const Array& a) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += a.value_at(i);
    auto n = make_node({}, {total}, {a.node()}, "sum");
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (double& g : p.grad) g += self.grad[0];
        };
    }
    return Array(n);
}

Array mse(const Array& pred, const Array& target) {
    require_same_shape(pred, target, "mse");
    const std::size_t n_el = pred.size();
    if (n_el == 0) throw std::runtime_error("mse of empty arrays");
    double acc = 0.0;
    for (std::size_t i = 0; i < n_el; ++i) {
        const double d = pred.value_at(i) - target.value_at(i);
        acc += d * d;
    }
    auto n = make_node({}, {acc / static_cast<double>(n_el)}, {pred.node(), target.node()}, "mse");
    if (n->requires_grad) {
        n->backprop = [n_el](Node& self) {
            Node& pp = *self.parents[0];
            Node& pt = *self.parents[1];
            const double c = 2.0 / static_cast<double>(n_el) * self.grad[0];
            for (std::size_t i = 0; i < n_el; ++i) {
                const double d = pp.value[i] - pt.value[i];
                if (pp.requires_grad) pp.grad[i] += c * d;
                if (pt.requires_grad) pt.grad[i] -= c * d;
            }
        };
    }
    return Array(n);
}

Array gaussian_kl(const Array& mu, const Array& log_var) {
    require_same_shape(mu, log_var, "gaussian_kl");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double m = mu.value_at(i);
        const double lv = log_var.value_at(i);
        if (!std::isfinite(lv) || !std::isfinite(m))
            throw std::runtime_error("gaussian_kl: non-finite input");
        acc += 1.0 + lv - m * m - std::exp(lv);
    }
    auto n = make_node({}, {-0.5 * acc}, {mu.node(), log_var.node()}, "gaussian_kl");
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            Node& pm = *self.parents[0];
            Node& pl = *self.parents[1];
            const double g = self.grad[0];
            for (std::size_t i = 0; i < pm.value.size(); ++i) {
                if (pm.requires_grad) pm.grad[i] += g * pm.value[i];
                if (pl.requires_grad) pl.grad[i] += g * 0.5 * (std::exp(pl.value[i]) - 1.0);
            }
        };
    }
    return Array(n);
}

std::vector<double> verlet_rollout_values(std::span<const double> s, std::span<const double> x_prev,
                                          std::span<const double> x_last, int steps, int dims,
                                          double dt) {
    std::vector<double> pos(static_cast<std::size_t>(steps) * dims);
    const double dt2 = dt * dt;
    for (int d = 0; d < dims; ++d) {
        double pm1 = x_last[static_cast<std::size_t>(d)];
        double pm2 = x_prev[static_cast<std::size_t>(d)];
        for (int t = 0; t < steps; ++t) {
            const double p = 2.0 * pm1 - pm2 + s[static_cast<std::size_t>(t) * dims + d] * dt2;
            pos[static_cast<std::size_t>(t) * dims + d] = p;
            pm2 = pm1;
            pm1 = p;
        }
    }
    return pos;
}

Array verlet_rollout(const Array& s, const Array& x_prev, const Array& x_last, double dt) {
    if (s.shape().size() != 2 || x_prev.shape().size() != 1 || x_last.shape().size() != 1 ||
        s.shape()[1] != x_prev.shape()[0] || x_prev.shape() != x_last.shape())
        throw std::runtime_error("verlet_rollout: shape mismatch s" + shape_str(s.shape()) +
                                 " x_prev" + shape_str(x_prev.shape()) + " x_last" +
                                 shape_str(x_last.shape()));
    const int T = s.shape()[0], D = s.shape()[1];
    auto v = verlet_rollout_values(s.values(), x_prev.values(), x_last.values(), T, D, dt);
    auto n = make_node({T, D}, std::move(v), {s.node(), x_prev.node(), x_last.node()},
                       "verlet_rollout");
    if (n->requires_grad) {
        n->backprop = [T, D, dt](Node& self) {
            Node& ps = *self.parents[0];
            Node& pprev = *self.parents[1];
            Node& plast = *self.parents[2];
            const double dt2 = dt * dt;
            for (int d = 0; d < D; ++d) {
                // Adjoint recurrence: gh_t = g_t + 2*gh_{t+1} - gh_{t+2}.
                double gh1 = 0.0, gh2 = 0.0; // gh_{t+1}, gh_{t+2}
                double acc_last = 0.0, acc_prev = 0.0;
                for (int t = T - 1; t >= 0; --t) {
                    const double gh = self.grad[static_cast<std::size_t>(t) * D + d] + 2.0 * gh1 - gh2;
                    if (ps.requires_grad) ps.grad[static_cast<std::size_t>(t) * D + d] += gh * dt2;
                    acc_last += (t + 2.0) * self.grad[static_cast<std::size_t>(t) * D + d];
                    acc_prev -= (t + 1.0) * self.grad[static_cast<std::size_t>(t) * D + d];
                    gh2 = gh1;
                    gh1 = gh;
                }
                if (plast.requires_grad) plast.grad[static_cast<std::size_t>(d)] += acc_last;
                if (pprev.requires_grad) pprev.grad[static_cast<std::size_t>(d)] += acc_prev;
            }
        };
    }
    return Array(n);
}

void backward(const Array& scalar_loss) {
    if (scalar_loss.size() != 1)
        throw std::runtime_error("backward: loss must be scalar, got " +
                                 shape_str(scalar_loss.shape()));

    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    Node* root = scalar_loss.node().get();
    if (!root->requires_grad) return;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        Node* node = stack.back().first;
        const std::size_t next = stack.back().second;
        if (next < node->parents.size()) {
            ++stack.back().second; // before any push: emplace_back may reallocate
            Node* parent = node->parents[next].get();
            if (parent->requires_grad && visited.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    scalar_loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

} // namespace airtraj::diff
