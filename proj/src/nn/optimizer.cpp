#include "efl/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace efl::nn {

OptimizerState OptimizerState::sgd(double base_lr, int round_index, double decay) {
    OptimizerState s;
    s.kind = OptimizerKind::SgdWithDecay;
    s.base_lr = base_lr;
    s.decay_factor = decay;
    s.round_index = round_index;
    return s;
}

OptimizerState OptimizerState::adam(double base_lr) {
    OptimizerState s;
    s.kind = OptimizerKind::Adam;
    s.base_lr = base_lr;
    return s;
}

double OptimizerState::effective_lr() const {
    if (kind == OptimizerKind::SgdWithDecay)
        return base_lr * std::pow(decay_factor, round_index - 1);
    return base_lr;
}

void optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state) {
    if (grads.size() != params.layers.size())
        throw std::invalid_argument("optimizer_step: gradient/params layer count mismatch");
    if (!gradients_finite(grads))
        throw std::runtime_error("optimizer_step: non-finite gradient, aborting update");

    if (state.kind == OptimizerKind::Adam && state.first_moment.empty()) {
        state.first_moment = zero_gradients(params);
        state.second_moment = zero_gradients(params);
    }

    const double lr = state.effective_lr();
    ++state.step_count;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        LayerParams& lp = params.layers[i];
        if (grads[i].size() != lp.weights.size())
            throw std::invalid_argument("optimizer_step: gradient/params block count mismatch");
        for (std::size_t j = 0; j < lp.weights.size(); ++j) {
            Vec& p = lp.weights[j].values;
            const Vec& g = grads[i][j];
            if (g.size() != p.size())
                throw std::invalid_argument("optimizer_step: gradient block shape mismatch");
            if (state.kind == OptimizerKind::SgdWithDecay) {
                p -= lr * g;
            } else {
                Vec& m = state.first_moment[i][j];
                Vec& v = state.second_moment[i][j];
                m = state.beta1 * m + (1.0 - state.beta1) * g;
                v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
                const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
                const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
                p.array() -=
                    lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
            }
        }
    }
    params.bump();
}

}  // namespace efl::nn
