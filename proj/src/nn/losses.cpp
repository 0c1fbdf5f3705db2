#include "efl/nn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace efl::nn {

namespace {

/// Row-wise log-softmax of logits / zeta.
Mat log_softmax_scaled(const Mat& logits, double zeta) {
    Mat scaled = logits / zeta;
    Mat out(scaled.rows(), scaled.cols());
    for (Index r = 0; r < scaled.rows(); ++r) {
        const double mx = scaled.row(r).maxCoeff();
        const double lse = std::log((scaled.row(r).array() - mx).exp().sum()) + mx;
        out.row(r) = scaled.row(r).array() - lse;
    }
    return out;
}

}  // namespace

Mat softmax_temperature(const Mat& logits, double zeta) {
    if (zeta <= 0.0) throw std::invalid_argument("softmax_temperature: zeta must be > 0");
    if (!logits.allFinite())
        throw std::invalid_argument("softmax_temperature: non-finite logits");
    return log_softmax_scaled(logits, zeta).array().exp();
}

LossResult loss_supervised(const Mat& logits, const std::vector<int>& labels, LabelMode mode) {
    const Index B = logits.rows();
    const Index K = logits.cols();
    if (static_cast<Index>(labels.size()) != B)
        throw std::invalid_argument("loss_supervised: labels/batch size mismatch");
    if (mode == LabelMode::Binary && K != 2)
        throw std::invalid_argument("loss_supervised: binary mode requires 2 output units");
    for (int y : labels)
        if (y < 0 || y >= K)
            throw std::invalid_argument("loss_supervised: label out of range");

    Mat logp = log_softmax_scaled(logits, 1.0);
    LossResult res;
    res.grad_logits = logp.array().exp();
    for (Index r = 0; r < B; ++r) {
        res.value -= logp(r, labels[static_cast<std::size_t>(r)]);
        res.grad_logits(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
    }
    res.value /= static_cast<double>(B);
    res.grad_logits /= static_cast<double>(B);
    return res;
}

LossResult loss_kd(const Mat& teacher_logits, const Mat& student_logits, double zeta, int alpha,
                   Index n_samples) {
    if (teacher_logits.rows() != student_logits.rows() ||
        teacher_logits.cols() != student_logits.cols())
        throw std::invalid_argument("loss_kd: teacher/student logit shape mismatch");
    if (zeta <= 0.0) throw std::invalid_argument("loss_kd: zeta must be > 0");
    if (alpha != 0 && alpha != 1) throw std::invalid_argument("loss_kd: alpha must be 0 or 1");
    if (n_samples <= 0) throw std::invalid_argument("loss_kd: n_samples must be > 0");

    LossResult res;
    res.grad_logits = Mat::Zero(student_logits.rows(), student_logits.cols());
    if (alpha == 0) return res;

    Mat logp_t = log_softmax_scaled(teacher_logits, zeta);
    Mat logp_s = log_softmax_scaled(student_logits, zeta);
    Mat p_t = logp_t.array().exp();
    Mat p_s = logp_s.array().exp();

    const double scale = zeta * zeta / static_cast<double>(n_samples);
    res.value = scale * (p_t.array() * (logp_t - logp_s).array()).sum();
    // d/dz_s of zeta^2 KL(p_t || p_s) is zeta * (p_s - p_t).
    res.grad_logits = (zeta / static_cast<double>(n_samples)) * (p_s - p_t);
    return res;
}

}  // namespace efl::nn
