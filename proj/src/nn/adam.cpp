#include "forchestra/nn/adam.hpp"

#include <cmath>

#include "forchestra/error.hpp"

namespace forchestra::nn {

void adam_step(const std::vector<Parameter*>& params, AdamState& state) {
    if (state.first_moment.empty()) {
        for (const Parameter* p : params) {
            state.first_moment.emplace_back(p->value.shape());
            state.second_moment.emplace_back(p->value.shape());
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ContractError("adam_step: optimizer state tracks " +
                            std::to_string(state.first_moment.size()) + " parameters, got " +
                            std::to_string(params.size()));
    }
    ++state.step;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
            v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p.value[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (const Parameter* p : params) {
        for (double g : p->grad.data()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (Parameter* p : params) {
            for (double& g : p->grad.data()) g *= f;
        }
    }
    return norm;
}

}  // namespace forchestra::nn
