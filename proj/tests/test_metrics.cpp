#include "doctest.h"

#include "efl/metrics/metrics.hpp"

#include <cmath>
#include <random>

using namespace efl;
using namespace efl::metrics;

TEST_CASE("confusion: perfect, hand tally, degenerate predictor") {
    std::vector<int> truth{0, 1, 0, 1};
    auto perfect = confusion(truth, truth, TaskMode::Binary);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);
    CHECK(perfect.total() == 4);

    // anomaly is class 0: pred [1,0,1,0] vs truth [1,1,0,0]
    // i=0 pred normal/true normal -> TN; i=1 pred anomaly/true normal -> FP;
    // i=2 pred normal/true anomaly -> FN; i=3 pred anomaly/true anomaly -> TP
    auto cm = confusion({1, 0, 1, 0}, {1, 1, 0, 0}, TaskMode::Binary);
    CHECK(cm.tp == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fp == 1);
    CHECK(cm.fn == 1);

    auto all_anomaly = confusion({0, 0, 0, 0}, {0, 0, 1, 1}, TaskMode::Binary);
    CHECK(all_anomaly.tn == 0);
    CHECK(*binary_metrics(all_anomaly).far == doctest::Approx(1.0));

    CHECK_THROWS(confusion({0, 1}, {0}, TaskMode::Binary));
    CHECK_THROWS(confusion({0, 3}, {0, 1}, TaskMode::Binary));
}

TEST_CASE("confusion: multi mode fills the KxK table and the binary collapse") {
    // classes: 0=dos, 1=normal, 2=probe (normal_class = 1)
    std::vector<int> truth{0, 1, 2, 0};
    std::vector<int> pred{2, 1, 2, 1};
    auto cm = confusion(pred, truth, TaskMode::Multi, 1, 3);
    CHECK(cm.table(0, 2) == 1);  // dos predicted probe
    CHECK(cm.table(1, 1) == 1);
    CHECK(cm.table(2, 2) == 1);
    CHECK(cm.table(0, 1) == 1);  // dos predicted normal
    CHECK(cm.table.sum() == 4);
    // collapse: dos->probe is anomaly->anomaly (TP)
    CHECK(cm.tp == 2);
    CHECK(cm.tn == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.fp == 0);
}

TEST_CASE("binary_metrics: worked example and zero-denominator rules") {
    ConfusionMatrix cm;
    cm.tp = 50;
    cm.tn = 40;
    cm.fp = 5;
    cm.fn = 5;
    auto m = binary_metrics(cm);
    CHECK(*m.accuracy == doctest::Approx(0.9));
    CHECK(*m.precision == doctest::Approx(0.9091).epsilon(1e-4));
    CHECK(*m.recall == doctest::Approx(0.9091).epsilon(1e-4));
    CHECK(*m.f1 == doctest::Approx(0.9091).epsilon(1e-4));
    CHECK(*m.far == doctest::Approx(0.1111).epsilon(1e-3));
    // f1 == 2TP / (2TP + FP + FN) exactly
    CHECK(*m.f1 == doctest::Approx(2.0 * 50 / (2.0 * 50 + 5 + 5)).epsilon(1e-12));

    ConfusionMatrix perfect;
    perfect.tp = 10;
    perfect.tn = 10;
    auto pm = binary_metrics(perfect);
    CHECK(*pm.accuracy == 1.0);
    CHECK(*pm.far == 0.0);

    ConfusionMatrix no_pos;  // TP = FP = 0
    no_pos.tn = 5;
    no_pos.fn = 2;
    auto nm = binary_metrics(no_pos);
    CHECK(!nm.precision.has_value());
    CHECK(nm.recall.has_value());
    CHECK(!nm.f1.has_value());
}

TEST_CASE("averaged_metrics: participation weighting and absent skipping") {
    BinaryMetrics a;
    a.accuracy = 0.6;
    a.precision = 0.5;
    BinaryMetrics b;
    b.accuracy = 0.8;  // precision absent
    BinaryMetrics c;
    c.accuracy = 0.2;
    c.precision = 0.1;

    auto one = averaged_metrics({a}, {1});
    CHECK(*one.aa == doctest::Approx(0.6));
    CHECK(*one.ap == doctest::Approx(0.5));

    auto two = averaged_metrics({a, b}, {1, 1});
    CHECK(*two.aa == doctest::Approx(0.7));
    CHECK(*two.ap == doctest::Approx(0.5));  // b's absent precision skipped
    CHECK(two.skipped_absent > 0);

    auto excl = averaged_metrics({a, c}, {1, 0});
    CHECK(*excl.aa == doctest::Approx(0.6));
    CHECK(excl.participants == 1);

    CHECK_THROWS(averaged_metrics({a, c}, {0, 0}));
    CHECK_THROWS(averaged_metrics({a}, {1, 1}));
}

TEST_CASE("multiclass_accuracy: exact-match fraction with a counting oracle") {
    std::vector<int> t{1, 2, 3, 4};
    CHECK(multiclass_accuracy(t, t) == 1.0);
    CHECK(multiclass_accuracy({1, 2, 3, 0}, t) == doctest::Approx(0.75));

    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<int> pred(50), truth(50);
        for (std::size_t i = 0; i < 50; ++i) {
            pred[i] = static_cast<int>(rng() % 5);
            truth[i] = static_cast<int>(rng() % 5);
        }
        long correct = 0;
        for (std::size_t i = 0; i < 50; ++i) correct += pred[i] == truth[i];
        CHECK(multiclass_accuracy(pred, truth) == static_cast<double>(correct) / 50.0);
    }
}

TEST_CASE("odc: counting rules and confusion-matrix identity") {
    std::vector<int> t{0, 0, 1, 1, 0};
    CHECK(odc(t, t, TaskMode::Binary) == 5);

    // multi: truth DoS(0), pred Probe(2), normal=1 -> both anomaly, counts
    CHECK(odc({2}, {0}, TaskMode::Multi, 1) == 1);
    CHECK(multiclass_accuracy({2}, {0}) == 0.0);

    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<int> pred(80), truth(80);
        for (std::size_t i = 0; i < 80; ++i) {
            pred[i] = static_cast<int>(rng() % 2);
            truth[i] = static_cast<int>(rng() % 2);
        }
        auto cm = confusion(pred, truth, TaskMode::Binary);
        const long o = odc(pred, truth, TaskMode::Binary);
        CHECK(o == cm.tp + cm.tn);
        CHECK(static_cast<double>(o) / 80.0 == *binary_metrics(cm).accuracy);
    }
}

TEST_CASE("multi-mode odc dominates exact-match count") {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<int> pred(60), truth(60);
        for (std::size_t i = 0; i < 60; ++i) {
            pred[i] = static_cast<int>(rng() % 4);
            truth[i] = static_cast<int>(rng() % 4);
        }
        long exact = std::lround(multiclass_accuracy(pred, truth) * 60.0);
        CHECK(odc(pred, truth, TaskMode::Multi, 1) >= exact);
    }
}

TEST_CASE("boundary_distance: closed forms and brute-force oracle") {
    Mat a(1, 2), b(1, 2);
    a << 0, 0;
    b << 3, 4;
    CHECK(boundary_distance(a, b, DistanceMetric::L2) == doctest::Approx(5.0));
    CHECK(boundary_distance(a, b, DistanceMetric::L1) == doctest::Approx(7.0));
    CHECK(boundary_distance(a, a, DistanceMetric::L2) == 0.0);

    std::mt19937_64 rng(23);
    std::normal_distribution<double> dist;
    Mat m(3, 2), n(4, 2);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 2; ++j) m(i, j) = dist(rng);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 2; ++j) n(i, j) = dist(rng);
    double ref = 0.0;
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 4; ++j)
            ref += std::sqrt(std::pow(m(i, 0) - n(j, 0), 2) + std::pow(m(i, 1) - n(j, 1), 2));
    ref /= 12.0;
    CHECK(std::abs(boundary_distance(m, n) - ref) < 1e-12);

    CHECK_THROWS(boundary_distance(Mat(0, 2), b));
    CHECK_THROWS(boundary_distance(a, Mat(0, 2)));
}

TEST_CASE("cost_comparison: anchors and the exhaustive grid") {
    CostComparison base = cost_comparison({1, 1, 1, 1});
    CHECK(base.cost_pairwise == 3);
    CHECK(base.cost_prototype == 2);
    CHECK(base.prototype_cheaper);

    // 3|S| vs 2|S| scaling in the unit case
    for (long s = 1; s <= 5; ++s) {
        auto r = cost_comparison({1, 1, 1, s});
        CHECK(r.cost_pairwise == 3 * s);
        CHECK(r.cost_prototype == 2 * s);
    }

    auto spot = cost_comparison({1, 5, 2, 3});
    CHECK(spot.cost_pairwise == 36);
    CHECK(spot.cost_prototype == 18);

    for (long nm = 1; nm <= 20; ++nm)
        for (long nb = 1; nb <= 20; ++nb)
            for (long eps = 1; eps <= 5; ++eps)
                for (long s = 1; s <= 5; ++s) CHECK(cost_comparison({nm, nb, eps, s}).prototype_cheaper);

    CHECK_THROWS(cost_comparison({0, 1, 1, 1}));
}
