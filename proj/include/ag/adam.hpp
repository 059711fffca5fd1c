#pragma once

#include <cstdint>
#include <vector>

#include "ag/matrix.hpp"

namespace ag {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment estimates, one matrix per parameter tensor.
struct AdamState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::int64_t step = 0;
};

AdamState adam_init(const std::vector<const Matrix*>& params);

// Standard bias-corrected Adam update, applied in place.
void adam_step(std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamConfig& config);

}  // namespace ag
