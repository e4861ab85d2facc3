#pragma once

#include <vector>

#include "airtraj/diff/array.hpp"

namespace airtraj::diff {

struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m; // first moment, one block per parameter
    std::vector<std::vector<double>> v; // second moment
};

// Sizes the accumulators to match `params` and resets the step count.
void adam_init(AdamState& state, const std::vector<Array>& params);

// One Adam update from the gradients currently held by `params`.
void adam_step(std::vector<Array>& params, AdamState& state);

void zero_grads(std::vector<Array>& params);

} // namespace airtraj::diff
