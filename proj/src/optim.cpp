#include "powertrace/optim.hpp"

#include <cmath>

#include "powertrace/errors.hpp"

namespace powertrace {

void adam_step(ParamStore& store, const AdamConfig& cfg) {
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (!store[i].grad.all_finite()) {
            throw NumericError("non-finite gradient for parameter " + store[i].name);
        }
    }
    store.step += 1;
    const double t = static_cast<double>(store.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < store.size(); ++i) {
        Parameter& p = store[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            p.m[k] = cfg.beta1 * p.m[k] + (1.0 - cfg.beta1) * g;
            p.v[k] = cfg.beta2 * p.v[k] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = p.m[k] / bc1;
            const double v_hat = p.v[k] / bc2;
            p.value[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace powertrace
