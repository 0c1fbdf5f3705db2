#include "efl/metrics/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace efl::metrics {

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          TaskMode mode, int normal_class, int n_classes) {
    if (pred.size() != truth.size()) throw std::invalid_argument("confusion: length mismatch");
    ConfusionMatrix cm;
    cm.mode = mode;
    if (mode == TaskMode::Multi) cm.table = MatT<long>::Zero(n_classes, n_classes);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i];
        const int t = truth[i];
        if (p < 0 || t < 0 || (mode == TaskMode::Multi && (p >= n_classes || t >= n_classes)) ||
            (mode == TaskMode::Binary && (p >= 2 || t >= 2)))
            throw std::invalid_argument("confusion: label out of range");
        if (mode == TaskMode::Multi) ++cm.table(t, p);
        const bool pred_anomaly = p != normal_class;
        const bool true_anomaly = t != normal_class;
        if (pred_anomaly && true_anomaly)
            ++cm.tp;
        else if (!pred_anomaly && !true_anomaly)
            ++cm.tn;
        else if (pred_anomaly)
            ++cm.fp;
        else
            ++cm.fn;
    }
    return cm;
}

namespace {

std::optional<double> ratio(long num, long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

BinaryMetrics binary_metrics(const ConfusionMatrix& cm) {
    BinaryMetrics m;
    m.accuracy = ratio(cm.tp + cm.tn, cm.total());
    m.precision = ratio(cm.tp, cm.tp + cm.fp);
    m.recall = ratio(cm.tp, cm.tp + cm.fn);
    m.far = ratio(cm.fp, cm.fp + cm.tn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

AveragedMetrics averaged_metrics(const std::vector<BinaryMetrics>& per_client,
                                 const std::vector<int>& alphas) {
    if (per_client.size() != alphas.size())
        throw std::invalid_argument("averaged_metrics: length mismatch");
    AveragedMetrics out;
    double sa = 0, sp = 0, sr = 0, sf = 0;
    int na = 0, np = 0, nr = 0, nf = 0;
    for (std::size_t i = 0; i < per_client.size(); ++i) {
        if (alphas[i] == 0) continue;
        ++out.participants;
        const auto& m = per_client[i];
        auto take = [&](const std::optional<double>& v, double& sum, int& n) {
            if (v) {
                sum += *v;
                ++n;
            } else {
                ++out.skipped_absent;
            }
        };
        take(m.accuracy, sa, na);
        take(m.precision, sp, np);
        take(m.recall, sr, nr);
        take(m.f1, sf, nf);
    }
    if (out.participants == 0)
        throw std::invalid_argument("averaged_metrics: no participating clients");
    if (na) out.aa = sa / na;
    if (np) out.ap = sp / np;
    if (nr) out.ar = sr / nr;
    if (nf) out.afs = sf / nf;
    return out;
}

double multiclass_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("multiclass_accuracy: length mismatch");
    if (pred.empty()) throw std::invalid_argument("multiclass_accuracy: empty input");
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

long odc(const std::vector<int>& pred, const std::vector<int>& truth, TaskMode mode,
         int normal_class) {
    if (pred.size() != truth.size()) throw std::invalid_argument("odc: length mismatch");
    long count = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool pred_anomaly = pred[i] != normal_class;
        const bool true_anomaly = truth[i] != normal_class;
        count += pred_anomaly == true_anomaly;
    }
    (void)mode;  // anomaly pooling makes both modes the same counting rule
    return count;
}

double boundary_distance(const Mat& malicious, const Mat& benign, DistanceMetric metric) {
    if (malicious.rows() == 0 || benign.rows() == 0)
        throw std::invalid_argument("boundary_distance: empty sample set");
    if (malicious.cols() != benign.cols())
        throw std::invalid_argument("boundary_distance: dimension mismatch");
    double sum = 0.0;
    for (Index i = 0; i < malicious.rows(); ++i)
        for (Index j = 0; j < benign.rows(); ++j) {
            const auto diff = malicious.row(i) - benign.row(j);
            sum += metric == DistanceMetric::L2 ? diff.norm() : diff.cwiseAbs().sum();
        }
    return sum / (static_cast<double>(malicious.rows()) * static_cast<double>(benign.rows()));
}

CostComparison cost_comparison(const CostModelInput& inp) {
    if (inp.n_malicious < 1 || inp.n_benign < 1 || inp.eps_dist < 1 || inp.n_servers < 1)
        throw std::invalid_argument("cost_comparison: all inputs must be >= 1");
    CostComparison out;
    out.cost_pairwise = static_cast<long long>(inp.n_servers) *
                   (static_cast<long long>(inp.n_malicious) * inp.n_benign * inp.eps_dist + 2);
    out.cost_prototype =
        static_cast<long long>(inp.n_servers) * (static_cast<long long>(inp.n_malicious) + inp.n_benign);
    out.prototype_cheaper = out.cost_prototype < out.cost_pairwise;
    return out;
}

}  // namespace efl::metrics
