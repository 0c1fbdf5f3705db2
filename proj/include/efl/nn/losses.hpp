#pragma once

#include "efl/types.hpp"

#include <vector>

namespace efl::nn {

enum class LabelMode { Binary, Multi };

/// Temperature-scaled softmax, computed row-wise in log space.
Mat softmax_temperature(const Mat& logits, double zeta);

struct LossResult {
    double value = 0.0;
    Mat grad_logits;  // mean-reduced, wrt the logits argument
};

/// Cross entropy over K output units; the binary case is 2-class CE over a
/// 2-unit head so both modes share one path.
LossResult loss_supervised(const Mat& logits, const std::vector<int>& labels, LabelMode mode);

/// Distillation loss: alpha * (1/n_samples) * sum_t zeta^2 KL(p_teacher || p_student).
/// Gradient is wrt the student logits; teacher logits are constants.
LossResult loss_kd(const Mat& teacher_logits, const Mat& student_logits, double zeta, int alpha,
                   Index n_samples);

}  // namespace efl::nn
