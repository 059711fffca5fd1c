#include "ag/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ag {

AdamState adam_init(const std::vector<const Matrix*>& params) {
    AdamState state;
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const Matrix* p : params) {
        state.first_moment.emplace_back(p->rows(), p->cols());
        state.second_moment.emplace_back(p->rows(), p->cols());
    }
    return state;
}

void adam_step(std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamConfig& config) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw std::invalid_argument("adam_step: tensor count mismatch");
    }
    if (!(config.lr > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 ||
        config.beta2 < 0.0 || config.beta2 >= 1.0) {
        throw std::invalid_argument("adam_step: invalid hyperparameters");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& p = *params[t];
        const Matrix& g = *grads[t];
        Matrix& m = state.first_moment[t];
        Matrix& v = state.second_moment[t];
        if (!p.same_shape(g) || !p.same_shape(m)) {
            throw std::invalid_argument("adam_step: shape mismatch");
        }
        double* pp = p.data();
        const double* pg = g.data();
        double* pm = m.data();
        double* pv = v.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            pm[i] = config.beta1 * pm[i] + (1.0 - config.beta1) * pg[i];
            pv[i] = config.beta2 * pv[i] + (1.0 - config.beta2) * pg[i] * pg[i];
            const double m_hat = pm[i] / bc1;
            const double v_hat = pv[i] / bc2;
            pp[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

}  // namespace ag
