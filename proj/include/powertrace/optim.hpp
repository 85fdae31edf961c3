#pragma once

#include "powertrace/tensor.hpp"

namespace powertrace {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update from the gradients held in the store.
// Non-finite gradients raise NumericError before anything is modified.
void adam_step(ParamStore& store, const AdamConfig& cfg = {});

}  // namespace powertrace
