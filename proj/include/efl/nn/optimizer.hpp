#pragma once

#include "efl/nn/network.hpp"

namespace efl::nn {

enum class OptimizerKind { SgdWithDecay, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::SgdWithDecay;
    double base_lr = 0.0001;
    double decay_factor = 0.97;
    int round_index = 1;  // q; effective sgd lr = base_lr * decay^(q-1)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    Gradients first_moment;   // lazily sized to the params
    Gradients second_moment;

    static OptimizerState sgd(double base_lr, int round_index = 1, double decay = 0.97);
    static OptimizerState adam(double base_lr);

    double effective_lr() const;
};

/// In-place parameter update; aborts on non-finite gradients.
void optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state);

}  // namespace efl::nn
