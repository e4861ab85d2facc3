#include "airtraj/diff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace airtraj::diff {

void adam_init(AdamState& state, const std::vector<Array>& params) {
    state.step = 0;
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
        state.m.emplace_back(p.size(), 0.0);
        state.v.emplace_back(p.size(), 0.0);
    }
}

void adam_step(std::vector<Array>& params, AdamState& state) {
    if (state.m.size() != params.size())
        throw std::runtime_error("adam state not initialized for this parameter set");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& theta = params[i].mutable_values();
        const auto g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != theta.size())
            throw std::runtime_error("adam accumulator shape mismatch");
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

void zero_grads(std::vector<Array>& params) {
    for (auto& p : params) p.zero_grad();
}

} // namespace airtraj::diff
