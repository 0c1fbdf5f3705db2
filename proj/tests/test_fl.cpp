#include "doctest.h"

#include "efl/data/synthetic.hpp"
#include "efl/fl/engine.hpp"
#include "efl/metrics/metrics.hpp"
#include "efl/nn/losses.hpp"

#include <cmath>
#include <numeric>

using namespace efl;
using namespace efl::fl;

namespace {

data::SyntheticData toy_data(Index n_train = 240, Index n_test = 60, int classes = 2,
                             std::uint64_t seed = 3) {
    data::SyntheticConfig cfg;
    cfg.n_train = n_train;
    cfg.n_test = n_test;
    cfg.n_features = 6;
    cfg.n_classes = classes;
    cfg.overlap = 0.08;  // well separated
    cfg.seed = seed;
    return data::make_synthetic(cfg);
}

RoundConfig desk_config() {
    RoundConfig cfg;
    cfg.teacher_conv = {4, 8};
    cfg.teacher_fc = 8;
    cfg.student_conv = {3, 4};
    cfg.student_fc = 6;
    cfg.local_epochs = 2;
    cfg.teacher_epochs = 2;
    cfg.batch_size = 32;
    cfg.rounds = 2;
    cfg.student_lr = 0.05;
    cfg.availability_probability = 1.0;
    cfg.seed = 11;
    return cfg;
}

ClientState make_client(const data::EncodedDataset& ds, std::vector<Index> shard, int id = 0,
                        std::uint64_t seed = 5) {
    ClientState c;
    c.id = id;
    c.shard = std::move(shard);
    c.teacher_spec = nn::NetworkSpec::teacher(static_cast<int>(ds.d()), ds.n_classes(), {4, 8}, 8);
    c.student_spec = nn::NetworkSpec::student(static_cast<int>(ds.d()), ds.n_classes(), {3, 4}, 6);
    c.teacher = nn::init_params(c.teacher_spec, seed);
    c.student = nn::init_params(c.student_spec, seed + 1);
    return c;
}

std::vector<Index> all_indices(const data::EncodedDataset& ds) {
    std::vector<Index> idx(static_cast<std::size_t>(ds.n()));
    std::iota(idx.begin(), idx.end(), Index{0});
    return idx;
}

bool params_equal(const nn::ModelParams& a, const nn::ModelParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        for (std::size_t j = 0; j < a.layers[i].weights.size(); ++j)
            if ((a.layers[i].weights[j].values - b.layers[i].weights[j].values)
                    .cwiseAbs()
                    .maxCoeff() != 0.0)
                return false;
        for (std::size_t j = 0; j < a.layers[i].buffers.size(); ++j)
            if ((a.layers[i].buffers[j].values - b.layers[i].buffers[j].values)
                    .cwiseAbs()
                    .maxCoeff() != 0.0)
                return false;
    }
    return true;
}

}  // namespace

TEST_CASE("sample_availability: certainty, determinism, and frequency") {
    auto all = sample_availability(5, 1.0, 9);
    CHECK(all == std::vector<int>{1, 1, 1, 1, 1});

    CHECK(sample_availability(10, 0.4, 77) == sample_availability(10, 0.4, 77));

    std::vector<long> hits(10, 0);
    for (int round = 0; round < 10000; ++round) {
        auto flags = sample_availability(10, 0.5, derive_seed(1, 0, static_cast<std::uint64_t>(round)));
        for (std::size_t i = 0; i < flags.size(); ++i) hits[i] += flags[i];
    }
    for (long h : hits) CHECK(std::abs(h / 10000.0 - 0.5) <= 0.02);

    // vanishing probability still returns at least one participant
    auto some = sample_availability(4, 0.01, 3);
    CHECK(std::accumulate(some.begin(), some.end(), 0) >= 1);
    CHECK_THROWS(sample_availability(4, 0.0, 1));
    CHECK_THROWS(sample_availability(4, 1.5, 1));
}

TEST_CASE("pretrain_teacher: separable data learned, zero epochs inert, deterministic") {
    auto data = toy_data();
    auto c = make_client(data.train, all_indices(data.train));

    auto before = c.teacher;
    pretrain_teacher(c, data.train, 0, 0.001, 32, 5);
    CHECK(params_equal(c.teacher, before));

    pretrain_teacher(c, data.train, 5, 0.001, 32, 5);
    auto pred = predict_labels(c.teacher_spec, c.teacher, data.train.features);
    CHECK(metrics::multiclass_accuracy(pred, data.train.labels) > 0.95);

    auto c2 = make_client(data.train, all_indices(data.train));
    pretrain_teacher(c2, data.train, 5, 0.001, 32, 5);
    CHECK(params_equal(c.teacher, c2.teacher));

    ClientState empty = make_client(data.train, {});
    CHECK_THROWS(pretrain_teacher(empty, data.train, 1, 0.001, 32, 5));
}

TEST_CASE("compute_prototypes: means, counts, and the alpha gate") {
    auto data = toy_data(40, 10);
    auto c = make_client(data.train, all_indices(data.train));

    CHECK(compute_prototypes(c.student_spec, c.student, data.train, c.shard, 0).empty());

    // one sample -> prototype is exactly that sample's embedding
    std::vector<Index> one{3};
    auto single = compute_prototypes(c.student_spec, c.student, data.train, one, 1);
    auto emb = forward_infer(c.student_spec, c.student, make_batch(data.train, one)).embedding;
    const int k = data.train.labels[3];
    REQUIRE(single.classes.count(k) == 1);
    CHECK((single.classes.at(k).vector - emb.row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(single.classes.at(k).count == 1);

    // two same-class samples -> elementwise mean
    std::vector<Index> pair;
    for (Index i = 0; i < data.train.n() && pair.size() < 2; ++i)
        if (data.train.labels[static_cast<std::size_t>(i)] == k) pair.push_back(i);
    auto two = compute_prototypes(c.student_spec, c.student, data.train, pair, 1);
    auto e2 = forward_infer(c.student_spec, c.student, make_batch(data.train, pair)).embedding;
    Vec mean = 0.5 * (e2.row(0) + e2.row(1)).transpose();
    CHECK((two.classes.at(k).vector - mean).cwiseAbs().maxCoeff() < 1e-12);

    // counts match the true per-class shard composition
    auto full = compute_prototypes(c.student_spec, c.student, data.train, c.shard, 1);
    for (const auto& [cls, entry] : full.classes) {
        long expect = 0;
        for (Index i : c.shard) expect += data.train.labels[static_cast<std::size_t>(i)] == cls;
        CHECK(entry.count == expect);
        CHECK(entry.vector.allFinite());
    }
}

TEST_CASE("regularization_term: zero cases and hand evaluation") {
    PrototypeSet local, global;
    local.classes[0] = {Vec::Zero(2), 3};
    CHECK(regularization_term(local, global) == 0.0);  // empty global

    global.classes[0] = {Vec::Zero(2), 5};
    CHECK(regularization_term(local, global) == 0.0);  // identical shared class

    Vec g(2);
    g << 3.0, 4.0;
    global.classes[0] = {g, 5};
    CHECK(regularization_term(local, global) == doctest::Approx(25.0));

    // classes only on one side are skipped
    local.classes[7] = {Vec::Ones(2), 1};
    CHECK(regularization_term(local, global) == doctest::Approx(25.0));
}

TEST_CASE("local_loss arithmetic") {
    CHECK(local_loss(1.0, 0.5, 0.2, 0.1, 1.0) == doctest::Approx(0.75));
    CHECK(local_loss(2.5, 99.0, 99.0, 1.0, 0.0) == doctest::Approx(2.5));
    CHECK(local_loss(0.0, 0.0, 0.0, 0.3, 2.0) == 0.0);
    CHECK_THROWS(local_loss(1, 1, 1, -0.1, 1));
    CHECK_THROWS(local_loss(1, 1, 1, 0.5, -1));
}

TEST_CASE("aggregate_prototypes: identity, verbatim two-client rule, ablation variant") {
    Vec n1(2), n2(2);
    n1 << 2.0, 4.0;
    n2 << 6.0, 8.0;
    PrototypeSet a, b;
    a.classes[0] = {n1, 10};
    b.classes[0] = {n2, 10};

    auto solo = aggregate_prototypes({a}, {1});
    CHECK((solo.classes.at(0).vector - n1).cwiseAbs().maxCoeff() == 0.0);

    // equal counts: normalized weights 1/2 each, then divided by |M_k| = 2
    auto both = aggregate_prototypes({a, b}, {1, 1});
    Vec expect = (n1 + n2) / 4.0;
    CHECK((both.classes.at(0).vector - expect).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(both.classes.at(0).count == 20);

    auto meaned = aggregate_prototypes({a, b}, {1, 1}, /*mean_normalized=*/true);
    CHECK((meaned.classes.at(0).vector - (n1 + n2) / 2.0).cwiseAbs().maxCoeff() < 1e-15);

    // alpha = 0 contributes nothing
    auto gated = aggregate_prototypes({a, b}, {1, 0});
    CHECK((gated.classes.at(0).vector - n1).cwiseAbs().maxCoeff() == 0.0);

    // permutation invariance, bit-for-bit
    PrototypeSet c;
    Vec n3(2);
    n3 << -1.0, 5.0;
    c.classes[0] = {n3, 7};
    c.classes[2] = {n1, 3};
    auto fwd = aggregate_prototypes({a, b, c}, {1, 1, 1});
    auto rev = aggregate_prototypes({c, b, a}, {1, 1, 1});
    for (const auto& [k, entry] : fwd.classes)
        CHECK((entry.vector - rev.classes.at(k).vector).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate_models: means, weights, identity, permutation, mismatch") {
    nn::NetworkSpec spec;
    spec.input_features = 2;
    spec.layers.push_back({.kind = nn::LayerKind::Flatten});
    spec.layers.push_back({.kind = nn::LayerKind::Dense, .in_units = 2, .out_units = 2});

    auto p1 = nn::init_params(spec, 1);
    auto p2 = nn::init_params(spec, 2);
    p1.layers[1].weights[1].values << 1.0, 3.0;
    p2.layers[1].weights[1].values << 3.0, 1.0;

    auto mean = aggregate_models({p1, p2}, {50, 50}, {1, 1});
    CHECK(mean.layers[1].weights[1].values[0] == doctest::Approx(2.0));
    CHECK(mean.layers[1].weights[1].values[1] == doctest::Approx(2.0));

    auto solo = aggregate_models({p1, p2}, {50, 50}, {1, 0});
    CHECK(params_equal(solo, p1));

    auto weighted = aggregate_models({p1, p2}, {100, 300}, {1, 1});
    const double a = p1.layers[1].weights[0].values[0];
    const double b = p2.layers[1].weights[0].values[0];
    CHECK(weighted.layers[1].weights[0].values[0] ==
          doctest::Approx(0.25 * a + 0.75 * b).epsilon(1e-12));

    auto fwd = aggregate_models({p1, p2}, {100, 300}, {1, 1});
    auto rev = aggregate_models({p2, p1}, {300, 100}, {1, 1});
    CHECK(params_equal(fwd, rev));

    auto p3 = nn::init_params(nn::NetworkSpec::student(2, 2, {3}, 4), 3);
    CHECK_THROWS(aggregate_models({p1, p3}, {10, 10}, {1, 1}));
    CHECK_THROWS(aggregate_models({p1, p2}, {10, 10}, {0, 0}));
}

TEST_CASE("client_update: model gating, zero epochs, non-increasing loss trace") {
    auto data = toy_data();
    auto c = make_client(data.train, all_indices(data.train));
    pretrain_teacher(c, data.train, 3, 0.001, 32, 5);

    ClientUpdateOptions opt;
    opt.psi = 0.1;
    opt.gamma = 1.0;
    opt.zeta = 0.5;
    opt.local_epochs = 5;
    opt.batch_size = 32;
    opt.round_index = 1;
    opt.base_lr = 0.05;
    opt.use_kd = true;
    opt.use_reg = true;
    opt.seed = 21;

    PrototypeSet empty_global;

    // zero epochs: prototypes from unchanged params, no model in the return
    auto frozen = c.student;
    auto zopt = opt;
    zopt.local_epochs = 0;
    auto zres = client_update(c, data.train, empty_global, zopt);
    CHECK(params_equal(c.student, frozen));
    CHECK(!zres.model.has_value());
    auto direct = compute_prototypes(c.student_spec, c.student, data.train, c.shard, 1);
    for (const auto& [k, entry] : zres.prototypes.classes)
        CHECK((entry.vector - direct.classes.at(k).vector).cwiseAbs().maxCoeff() == 0.0);

    auto res = client_update(c, data.train, empty_global, opt);
    CHECK(!res.model.has_value());  // return_model defaults to false
    REQUIRE(res.epoch_losses.size() == 5);
    int non_increasing = 0;
    double prev = std::numeric_limits<double>::infinity();
    for (double v : res.epoch_losses) {
        if (v <= prev + 1e-12) ++non_increasing;
        prev = v;
    }
    CHECK(non_increasing >= 4);

    auto fopt = opt;
    fopt.return_model = true;
    auto fres = client_update(c, data.train, empty_global, fopt);
    CHECK(fres.model.has_value());
    CHECK(fres.n_samples == data.train.n());
}

TEST_CASE("run_training: efpkd model appears only at the final round") {
    auto data = toy_data();
    auto plan = data::dirichlet_partition(data.train.labels, 3, 5.0, 4);

    auto cfg = desk_config();
    cfg.strategy = Strategy::Efpkd;
    cfg.rounds = 3;
    auto result = run_training(data.train, plan, cfg);

    REQUIRE(result.rounds.size() == 3);
    CHECK(result.state.global_model.has_value());
    for (const auto& r : result.rounds) {
        if (r.round < 3) {
            CHECK(r.model_bytes == 0);
        } else {
            CHECK(r.model_bytes > 0);
        }
        CHECK(r.prototype_bytes > 0);
    }
    CHECK(!result.state.global_prototypes.empty());

    // Q = 1 boundary: model exists after the single round
    cfg.rounds = 1;
    auto single = run_training(data.train, plan, cfg);
    CHECK(single.state.global_model.has_value());
}

TEST_CASE("run_training: fedproto and independents never produce a global model") {
    auto data = toy_data();
    auto plan = data::dirichlet_partition(data.train.labels, 3, 5.0, 4);
    auto cfg = desk_config();

    for (Strategy s : {Strategy::FedProto, Strategy::IndependentCnn, Strategy::IndependentKd}) {
        cfg.strategy = s;
        auto result = run_training(data.train, plan, cfg);
        CHECK(!result.state.global_model.has_value());
        for (const auto& r : result.rounds) CHECK(r.model_bytes == 0);
    }

    cfg.strategy = Strategy::FedAvg;
    auto fedavg = run_training(data.train, plan, cfg);
    CHECK(fedavg.state.global_model.has_value());
    for (const auto& r : fedavg.rounds) {
        CHECK(r.model_bytes > 0);
        CHECK(r.prototype_bytes == 0);
    }
}

TEST_CASE("one-round FedAvg on an IID split equals centralized training") {
    auto data = toy_data(80, 20);
    auto cfg = desk_config();
    cfg.strategy = Strategy::FedAvg;
    cfg.rounds = 1;
    cfg.local_epochs = 1;
    cfg.batch_size = 1000;  // full batch
    cfg.student_lr = 0.05;

    // two equal-size shards: even indices / odd indices (both class-balanced
    // because synthetic labels alternate every index)
    data::PartitionPlan two;
    two.client_shards.assign(2, {});
    for (Index i = 0; i < data.train.n(); ++i)
        two.client_shards[static_cast<std::size_t>(i % 2)].push_back(i);

    data::PartitionPlan one;
    one.client_shards.assign(1, {});
    for (Index i = 0; i < data.train.n(); ++i) one.client_shards[0].push_back(i);

    auto fed = run_training(data.train, two, cfg);
    auto central = run_training(data.train, one, cfg);
    REQUIRE(fed.state.global_model.has_value());
    REQUIRE(central.state.global_model.has_value());
    for (std::size_t i = 0; i < fed.state.global_model->layers.size(); ++i)
        for (std::size_t j = 0; j < fed.state.global_model->layers[i].weights.size(); ++j)
            CHECK((fed.state.global_model->layers[i].weights[j].values -
                   central.state.global_model->layers[i].weights[j].values)
                      .cwiseAbs()
                      .maxCoeff() < 1e-9);
}

TEST_CASE("strategy degeneration: gated efpkd equals fedavg bit-for-bit") {
    auto data = toy_data();
    auto plan = data::dirichlet_partition(data.train.labels, 3, 5.0, 4);

    auto cfg = desk_config();
    cfg.rounds = 3;
    cfg.availability_probability = 1.0;

    auto degen = cfg;
    degen.strategy = Strategy::Efpkd;
    degen.psi = 1.0;   // KD term gone
    degen.gamma = 0.0;  // regularizer gone
    degen.force_model_aggregation_every_round = true;

    auto fedavg_cfg = cfg;
    fedavg_cfg.strategy = Strategy::FedAvg;

    auto a = run_training(data.train, plan, degen);
    auto b = run_training(data.train, plan, fedavg_cfg);
    REQUIRE(a.state.global_model.has_value());
    REQUIRE(b.state.global_model.has_value());
    CHECK(params_equal(*a.state.global_model, *b.state.global_model));
}

TEST_CASE("run_training is reproducible for a fixed master seed") {
    auto data = toy_data();
    auto plan = data::dirichlet_partition(data.train.labels, 3, 5.0, 4);
    auto cfg = desk_config();
    cfg.strategy = Strategy::Efpkd;
    cfg.availability_probability = 0.7;

    auto a = run_training(data.train, plan, cfg, &data.test);
    auto b = run_training(data.train, plan, cfg, &data.test);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].alphas == b.rounds[i].alphas);
        CHECK(a.rounds[i].global_objective == b.rounds[i].global_objective);
        CHECK(a.rounds[i].eval_mean_accuracy == b.rounds[i].eval_mean_accuracy);
        CHECK(a.rounds[i].prototype_bytes == b.rounds[i].prototype_bytes);
    }
    CHECK(params_equal(*a.state.global_model, *b.state.global_model));
}

TEST_CASE("global_objective_value: reductions and a hand-computed weighted sum") {
    auto data = toy_data(60, 10);
    auto c0 = make_client(data.train, {}, 0);
    auto c1 = make_client(data.train, {}, 1, 7);
    for (Index i = 0; i < 40; ++i) c0.shard.push_back(i);
    for (Index i = 40; i < 60; ++i) c1.shard.push_back(i);
    c0.alpha = c1.alpha = 1;

    auto p0 = compute_prototypes(c0.student_spec, c0.student, data.train, c0.shard, 1);
    auto p1 = compute_prototypes(c1.student_spec, c1.student, data.train, c1.shard, 1);
    auto global = aggregate_prototypes({p0, p1}, {1, 1});

    // supervised-loss term per client, via the public inference path
    auto sup = [&](const ClientState& c) {
        std::vector<int> labels;
        for (Index i : c.shard) labels.push_back(data.train.labels[static_cast<std::size_t>(i)]);
        auto out = forward_infer(c.student_spec, c.student, make_batch(data.train, c.shard));
        return nn::loss_supervised(out.logits, labels, nn::LabelMode::Binary).value;
    };

    const double gamma = 0.5;
    double expect = (40.0 / 60.0) * sup(c0) + (20.0 / 60.0) * sup(c1);
    for (const auto& [k, gentry] : global.classes) {
        double uk = 0;
        for (const auto* ps : {&p0, &p1})
            if (ps->classes.count(k)) uk += static_cast<double>(ps->classes.at(k).count);
        for (const auto* ps : {&p0, &p1})
            if (ps->classes.count(k))
                expect += gamma * (static_cast<double>(ps->classes.at(k).count) / uk) *
                          (gentry.vector - ps->classes.at(k).vector).squaredNorm();
    }
    double got = global_objective_value({c0, c1}, {p0, p1}, data.train, global, gamma);
    CHECK(std::abs(got - expect) < 1e-10);

    // single client with local == global prototypes reduces to its L_SL
    auto solo_global = aggregate_prototypes({p0}, {1});
    // verbatim aggregation of one client is the identity, so distances vanish
    double solo = global_objective_value({c0}, {p0}, data.train, solo_global, gamma);
    CHECK(solo == doctest::Approx(sup(c0)).epsilon(1e-12));

    // gamma = 0 drops the prototype term entirely
    double nogamma = global_objective_value({c0, c1}, {p0, p1}, data.train, global, 0.0);
    CHECK(std::abs(nogamma - ((40.0 / 60.0) * sup(c0) + (20.0 / 60.0) * sup(c1))) < 1e-12);
}
