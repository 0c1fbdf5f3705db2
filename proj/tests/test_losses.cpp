#include "doctest.h"

#include "efl/nn/losses.hpp"

#include <cmath>
#include <random>

using namespace efl;
using namespace efl::nn;

namespace {

Mat random_logits(Index B, Index K, std::uint64_t seed, double scale = 2.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    Mat m(B, K);
    for (Index r = 0; r < B; ++r)
        for (Index c = 0; c < K; ++c) m(r, c) = dist(rng);
    return m;
}

// plain scalar-loop softmax, independent of the log-space implementation
std::vector<double> naive_softmax(const std::vector<double>& z, double zeta) {
    std::vector<double> out(z.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) denom += std::exp(z[i] / zeta);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::exp(z[i] / zeta) / denom;
    return out;
}

}  // namespace

TEST_CASE("softmax_temperature: symmetry, direct evaluation, zeta=1 identity") {
    Mat z(1, 2);
    z << 0.0, 0.0;
    Mat p = softmax_temperature(z, 3.7);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(0, 1) == doctest::Approx(0.5));

    z << 2.0, 0.0;
    p = softmax_temperature(z, 2.0);
    const double e = std::exp(1.0);
    CHECK(p(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-6));
    CHECK(p(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-6));
    CHECK(p(0, 0) == doctest::Approx(0.73106).epsilon(1e-4));

    Mat logits = random_logits(5, 4, 101);
    Mat p1 = softmax_temperature(logits, 1.0);
    for (Index r = 0; r < 5; ++r) {
        std::vector<double> row(4);
        for (Index c = 0; c < 4; ++c) row[static_cast<std::size_t>(c)] = logits(r, c);
        auto ref = naive_softmax(row, 1.0);
        for (Index c = 0; c < 4; ++c)
            CHECK(std::abs(p1(r, c) - ref[static_cast<std::size_t>(c)]) < 1e-12);
    }

    CHECK_THROWS(softmax_temperature(logits, 0.0));
    CHECK_THROWS(softmax_temperature(logits, -1.0));
}

TEST_CASE("softmax_temperature rows form a probability simplex") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> zdist(std::log(1e-3), std::log(1e3));
    for (int rep = 0; rep < 50; ++rep) {
        double zeta = std::exp(zdist(rng));
        Mat logits = random_logits(4, 5, rng(), 20.0);
        Mat p = softmax_temperature(logits, zeta);
        CHECK((p.array() >= 0.0).all());
        for (Index r = 0; r < p.rows(); ++r)
            CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
    }
}

TEST_CASE("temperature never changes the argmax") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        Mat logits = random_logits(3, 6, rng());
        double zeta = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
        Mat p = softmax_temperature(logits, zeta);
        for (Index r = 0; r < 3; ++r) {
            Index a1, a2;
            logits.row(r).maxCoeff(&a1);
            p.row(r).maxCoeff(&a2);
            CHECK(a1 == a2);
        }
    }
}

TEST_CASE("loss_supervised: perfect, uniform, and random-batch oracle") {
    // near-one-hot prediction -> loss ~ 0
    Mat z(1, 3);
    z << 50.0, 0.0, 0.0;
    CHECK(loss_supervised(z, {0}, LabelMode::Multi).value < 1e-9);

    // uniform prediction over K classes -> ln K
    Mat zu = Mat::Zero(2, 5);
    CHECK(loss_supervised(zu, {1, 4}, LabelMode::Multi).value ==
          doctest::Approx(std::log(5.0)).epsilon(1e-12));

    // random batch vs a naive scalar-loop oracle
    std::mt19937_64 rng(55);
    Mat logits = random_logits(8, 4, 56);
    std::vector<int> labels(8);
    for (auto& y : labels) y = static_cast<int>(rng() % 4);
    auto res = loss_supervised(logits, labels, LabelMode::Multi);
    double ref = 0.0;
    for (Index r = 0; r < 8; ++r) {
        std::vector<double> row(4);
        for (Index c = 0; c < 4; ++c) row[static_cast<std::size_t>(c)] = logits(r, c);
        auto p = naive_softmax(row, 1.0);
        ref -= std::log(p[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])]);
    }
    ref /= 8.0;
    CHECK(std::abs(res.value - ref) < 1e-10);

    CHECK_THROWS(loss_supervised(logits, {0, 1, 2, 3, 0, 1, 2, 9}, LabelMode::Multi));
    CHECK_THROWS(loss_supervised(logits, labels, LabelMode::Binary));  // K != 2
}

TEST_CASE("loss_supervised gradient matches finite differences") {
    Mat logits = random_logits(4, 3, 77);
    std::vector<int> labels{0, 2, 1, 2};
    auto res = loss_supervised(logits, labels, LabelMode::Multi);
    const double h = 1e-6;
    for (Index r = 0; r < 4; ++r)
        for (Index c = 0; c < 3; ++c) {
            Mat zp = logits, zm = logits;
            zp(r, c) += h;
            zm(r, c) -= h;
            double num = (loss_supervised(zp, labels, LabelMode::Multi).value -
                          loss_supervised(zm, labels, LabelMode::Multi).value) /
                         (2 * h);
            CHECK(std::abs(num - res.grad_logits(r, c)) < 1e-7);
        }
}

TEST_CASE("loss_kd: zero cases and term-by-term oracle (seed 3)") {
    Mat t = random_logits(4, 3, 91);
    CHECK(loss_kd(t, t, 2.0, 1, 4).value == doctest::Approx(0.0).epsilon(1e-15));
    Mat s = random_logits(4, 3, 92);
    CHECK(loss_kd(t, s, 2.0, 0, 4).value == 0.0);
    CHECK(loss_kd(t, s, 2.0, 0, 4).grad_logits.cwiseAbs().maxCoeff() == 0.0);

    Mat teacher = random_logits(3, 4, 3);
    Mat student = random_logits(3, 4, 4);
    const double zeta = 1.7;
    auto res = loss_kd(teacher, student, zeta, 1, 3);
    double ref = 0.0;
    for (Index r = 0; r < 3; ++r) {
        std::vector<double> tr(4), sr(4);
        for (Index c = 0; c < 4; ++c) {
            tr[static_cast<std::size_t>(c)] = teacher(r, c);
            sr[static_cast<std::size_t>(c)] = student(r, c);
        }
        auto p = naive_softmax(tr, zeta);
        auto q = naive_softmax(sr, zeta);
        for (std::size_t k = 0; k < 4; ++k) ref += zeta * zeta * p[k] * std::log(p[k] / q[k]);
    }
    ref /= 3.0;
    CHECK(std::abs(res.value - ref) < 1e-10);
    CHECK(res.value >= 0.0);
}

TEST_CASE("loss_kd is nonnegative and zero only for equal distributions") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        Mat t = random_logits(2, 3, rng());
        Mat s = random_logits(2, 3, rng());
        double zeta = std::exp(std::uniform_real_distribution<double>(-2, 2)(rng));
        auto res = loss_kd(t, s, zeta, 1, 2);
        CHECK(res.value >= 0.0);
        if ((softmax_temperature(t, zeta) - softmax_temperature(s, zeta))
                .cwiseAbs()
                .maxCoeff() > 1e-6)
            CHECK(res.value > 0.0);
    }
}

TEST_CASE("loss_kd gradient matches finite differences") {
    Mat teacher = random_logits(3, 3, 11);
    Mat student = random_logits(3, 3, 12);
    auto res = loss_kd(teacher, student, 0.5, 1, 3);
    const double h = 1e-6;
    for (Index r = 0; r < 3; ++r)
        for (Index c = 0; c < 3; ++c) {
            Mat sp = student, sm = student;
            sp(r, c) += h;
            sm(r, c) -= h;
            double num = (loss_kd(teacher, sp, 0.5, 1, 3).value -
                          loss_kd(teacher, sm, 0.5, 1, 3).value) /
                         (2 * h);
            CHECK(std::abs(num - res.grad_logits(r, c)) < 1e-6);
        }
}
