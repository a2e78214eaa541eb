#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "forchestra/baselines/deep_ensemble.hpp"
#include "forchestra/baselines/dnc.hpp"
#include "forchestra/baselines/ensemble.hpp"
#include "forchestra/baselines/mlp.hpp"
#include "forchestra/baselines/sma.hpp"
#include "forchestra/error.hpp"
#include "forchestra/model/forchestra.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace forchestra;
using namespace forchestra::baselines;
using forchestra::testing::random_tensor;
using forchestra::testing::same_values;

namespace {

const std::vector<std::uint8_t> all_sale(std::size_t n) { return std::vector<std::uint8_t>(n, data::kSale); }

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Sma, WorkedExamples) {
    const std::vector<double> h{2, 4, 6};
    EXPECT_EQ(sma_forecast(h, all_sale(3), 3, 4).values, (std::vector<double>(4, 4.0)));
    EXPECT_EQ(sma_forecast(h, all_sale(3), 10, 2).values, (std::vector<double>(2, 4.0)));
    EXPECT_EQ(sma_forecast(h, all_sale(3), 1, 2).values, (std::vector<double>(2, 6.0)));
    const std::vector<double> c(9, 3.5);
    EXPECT_EQ(sma_forecast(c, all_sale(9), 7, 3).values, (std::vector<double>(3, 3.5)));
}

TEST(Sma, SkipsNonSaleDaysAndFlagsEmptyHistory) {
    const std::vector<double> h{2, 4, 0, 9};
    const std::vector<std::uint8_t> a{1, 1, 0, 0};
    // last sale-day value is 4
    EXPECT_EQ(sma_forecast(h, a, 1, 1).values.front(), 4.0);
    EXPECT_EQ(sma_forecast(h, a, 2, 1).values.front(), 3.0);
    const auto none = sma_forecast(h, std::vector<std::uint8_t>(4, 0), 3, 2);
    EXPECT_TRUE(none.no_sales);
    EXPECT_EQ(none.values, (std::vector<double>(2, 0.0)));
    EXPECT_THROW(sma_forecast({}, {}, 3, 2), ConfigError);
    EXPECT_THROW(sma_forecast(h, a, 0, 2), ConfigError);
}

TEST(Sma, BacktestSeesOnlyThePast) {
    auto prob = forchestra::testing::small_problem();
    const auto fc = sma_forecasts(prob.dataset, prob.split.train_instances, prob.split.test, 7);
    ASSERT_EQ(fc.values.size(), prob.split.train_instances.size());
    data::Dataset changed = prob.dataset;
    for (auto& s : changed.instances) {
        for (std::size_t t = prob.split.test.begin + 7; t < s.length(); ++t) s.sales[t] += 100;
    }
    const auto again = sma_forecasts(changed, prob.split.train_instances, prob.split.test, 7);
    for (std::size_t r = 0; r < fc.values.size(); ++r) {
        // the first period never sees the change; the second does
        for (std::size_t p = 0; p < 7; ++p) EXPECT_EQ(fc.values[r][p], again.values[r][p]);
    }
    const auto pick = select_look_back(prob.dataset, prob.split.train_instances, prob.split.validation, default_look_backs());
    EXPECT_EQ(default_look_backs().size(), 10u);
    EXPECT_TRUE(pick.validation_mase.has_value());
}

TEST(EnsembleWeights, WorkedExamples) {
    const std::vector<double> s{0.5, 1.0};
    const double tiny = 1e-15;  // epsilon close to zero
    const auto inv = ensemble_weights(s, {Strategy::w_inv, std::nullopt, Scope::global, tiny});
    EXPECT_NEAR(inv[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(inv[1], 1.0 / 3.0, 1e-12);
    const auto sqr = ensemble_weights(s, {Strategy::w_sqr, std::nullopt, Scope::global, tiny});
    EXPECT_NEAR(sqr[0], 0.8, 1e-12);
    EXPECT_NEAR(sqr[1], 0.2, 1e-12);
    const auto ex = ensemble_weights(s, {Strategy::w_exp, std::nullopt, Scope::global, tiny});
    EXPECT_NEAR(ex[0], std::exp(2.0) / (std::exp(2.0) + std::exp(1.0)), 1e-12);
    const std::vector<double> pool{0.9, 0.3, 0.7};
    EXPECT_EQ(ensemble_weights(pool, {Strategy::top_k, 3}), ensemble_weights(pool, {Strategy::average}));
    EXPECT_EQ(ensemble_weights(pool, {Strategy::top_k, 1}), (std::vector<double>{0, 1, 0}));
    EXPECT_EQ(ensemble_weights(pool, {Strategy::top_k, 2}), (std::vector<double>{0, 0.5, 0.5}));
    // ties go to the lower index
    EXPECT_EQ(ensemble_weights(std::vector<double>{0.4, 0.4, 0.4}, {Strategy::top_k, 1}), (std::vector<double>{1, 0, 0}));
}

TEST(EnsembleWeights, ProbabilityVectorsOrderedByScore) {
    nn::Rng rng(4);
    std::uniform_real_distribution<double> score(0.2, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(2 + trial % 9);
        for (double& v : s) v = score(rng);
        const std::size_t argmin = std::min_element(s.begin(), s.end()) - s.begin();
        const auto top1 = ensemble_weights(s, {Strategy::top_k, 1});
        EXPECT_EQ(top1[argmin], 1.0);
        for (Strategy st : {Strategy::average, Strategy::top_k, Strategy::w_inv, Strategy::w_sqr, Strategy::w_exp}) {
            const auto w = ensemble_weights(s, {st, 3});
            EXPECT_NEAR(sum(w), 1.0, 1e-9);
            for (double v : w) EXPECT_GE(v, 0.0);
            if (st == Strategy::w_inv || st == Strategy::w_sqr || st == Strategy::w_exp) {
                for (std::size_t a = 0; a < s.size(); ++a) {
                    for (std::size_t b = 0; b < s.size(); ++b) {
                        if (s[a] < s[b]) EXPECT_GT(w[a], w[b]);
                    }
                }
            }
        }
    }
}

TEST(EnsembleWeights, ExponentialSchemeSurvivesTinyScores) {
    const auto w = ensemble_weights(std::vector<double>{1e-3, 2e-3}, {Strategy::w_exp});
    EXPECT_NEAR(sum(w), 1.0, 1e-12);
    // exp(g1) / (exp(g0) + exp(g1)) with g = 1/(s + eps), without forming either exponential
    const double g0 = 1.0 / (1e-3 + 1e-10);
    const double g1 = 1.0 / (2e-3 + 1e-10);
    EXPECT_NEAR(w[1] / std::exp(g1 - g0), 1.0, 1e-9);
    EXPECT_GT(w[1], 0.0);
    EXPECT_THROW(ensemble_weights(std::vector<double>{0.0, 1.0}, {Strategy::w_exp, std::nullopt, Scope::global, 1e-320}),
                 NumericError);
    EXPECT_THROW(ensemble_weights(std::vector<double>{NAN, 1.0}, {Strategy::w_inv}), ConfigError);
    EXPECT_THROW(ensemble_weights(std::vector<double>{1.0}, {Strategy::top_k}), ConfigError);
}

TEST(Combine, ContractsAndLinearity) {
    const nn::Tensor same = nn::Tensor::matrix({{1, 2, 3}, {1, 2, 3}});
    EXPECT_EQ(combine(same, std::vector<double>{0.5, 0.5}).values(), (std::vector<double>{1, 2, 3}));
    const nn::Tensor preds = random_tensor({3, 4}, 1);
    const auto pick = combine(preds, std::vector<double>{0, 1, 0});
    for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(pick[p], preds.at(1, p));
    const std::vector<double> w{0.2, 0.3, 0.5};
    nn::Tensor scaled = preds;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 3.0;
    const auto a = combine(preds, w), b = combine(scaled, w);
    for (std::size_t p = 0; p < 4; ++p) EXPECT_NEAR(b[p], 3.0 * a[p], 1e-12);
    EXPECT_THROW(combine(preds, std::vector<double>{0.2, 0.3, 0.4}), ContractError);
    EXPECT_THROW(combine(preds, std::vector<double>{0.5, 0.5}), DimensionError);
}

TEST(Combine, MatchesConductorForecast) {
    model::ForchestraConfig c;
    c.K = 3;
    c.bp.num_layers = 1;
    c.bp.hidden_size = 4;
    c.bp.context_length = 5;
    c.bp.prediction_length = 2;
    c.rep.projection_dim = 4;
    c.rep.num_blocks = 1;
    c.rep.output_dim = 3;
    c.rep.window = 6;
    model::ForchestraModel m = model::ForchestraModel::create(c, 8);
    const auto r = model::forecast(m, random_tensor({4, 5, 2}, 1), random_tensor({4, 6, 2}, 2));
    for (std::size_t b = 0; b < 4; ++b) {
        nn::Tensor preds({3, 2});
        std::vector<double> w(3);
        for (std::size_t k = 0; k < 3; ++k) {
            w[k] = r.weights.at(b, k);
            for (std::size_t p = 0; p < 2; ++p) preds.at(k, p) = r.bp_outputs.at(b, k, p);
        }
        const auto out = combine(preds, w);
        for (std::size_t p = 0; p < 2; ++p) EXPECT_NEAR(out[p], r.prediction.at(b, p), 1e-12);
    }
}

TEST(InstanceWiseWeights, PerInstanceSelectionAndFallback) {
    using Row = std::vector<std::optional<double>>;
    const std::vector<Row> same{{0.5, 1.0}, {0.5, 1.0}};
    const auto iw = instance_wise_weights(same, std::vector<double>{0.5, 1.0}, {Strategy::w_inv});
    EXPECT_EQ(iw.weights[0], iw.weights[1]);
    const std::vector<Row> scores{{1.0, 2.0, 0.1}, {0.3, 2.0, 1.0}, {std::nullopt, 1.0, 1.0}};
    const std::vector<double> global{0.2, 1.0, 3.0};
    const auto top1 = instance_wise_weights(scores, global, {Strategy::top_k, 1});
    EXPECT_EQ(top1.weights[0], (std::vector<double>{0, 0, 1}));
    EXPECT_EQ(top1.weights[1], (std::vector<double>{1, 0, 0}));
    EXPECT_EQ(top1.weights[2], (std::vector<double>{1, 0, 0}));
    EXPECT_EQ(top1.fallback, (std::vector<bool>{false, false, true}));
    for (Strategy st : {Strategy::w_inv, Strategy::w_sqr, Strategy::w_exp}) {
        for (const auto& w : instance_wise_weights(scores, global, {st}).weights) EXPECT_NEAR(sum(w), 1.0, 1e-9);
    }
}

namespace {

// Constant forecasts at a per-member level, a pool with a known best member.
eval::Forecasts constant_forecast(const data::Dataset& ds, const std::vector<std::size_t>& inst, data::TimeRange r,
                                  double level) {
    eval::Forecasts f;
    f.region = r;
    f.instances = inst;
    f.values.assign(inst.size(), std::vector<double>(r.size(), level));
    (void)ds;
    return f;
}

}  // namespace

TEST(RunEnsembles, SingleMemberPoolReproducesItsMetrics) {
    auto prob = forchestra::testing::small_problem();
    const auto& inst = prob.split.train_instances;
    std::vector<eval::Forecasts> val{sma_forecasts(prob.dataset, inst, prob.split.validation, 7)};
    std::vector<eval::Forecasts> test{sma_forecasts(prob.dataset, inst, prob.split.test, 7)};
    const auto specs = default_specs(1);
    const auto rows = run_ensembles(val, test, prob.dataset, specs, eval::EvalFilters{0});
    ASSERT_EQ(rows.size(), specs.size());
    const auto direct = eval::evaluate(test.front(), prob.dataset, eval::EvalFilters{0});
    for (const auto& r : rows) {
        EXPECT_DOUBLE_EQ(*r.report.mase.mean, *direct.mase.mean) << r.spec.label();
        EXPECT_DOUBLE_EQ(*r.report.rmse.mean, *direct.rmse.mean) << r.spec.label();
    }
}

TEST(RunEnsembles, TopOneGlobalPicksValidationBestAndTagsBest) {
    auto prob = forchestra::testing::small_problem();
    const auto& inst = prob.split.train_instances;
    std::vector<eval::Forecasts> val, test;
    for (double level : {0.0, 5.0, 50.0}) {
        val.push_back(constant_forecast(prob.dataset, inst, prob.split.validation, level));
        test.push_back(constant_forecast(prob.dataset, inst, prob.split.test, level));
    }
    const auto scores = score_pool(val, prob.dataset);
    const std::size_t best = std::min_element(scores.global.begin(), scores.global.end()) - scores.global.begin();
    std::vector<EnsembleSpec> specs{{Strategy::top_k, 1, Scope::global}, {Strategy::average, std::nullopt, Scope::global},
                                    {Strategy::w_inv, std::nullopt, Scope::instance_wise}};
    const auto rows = run_ensembles(val, test, prob.dataset, specs, eval::EvalFilters{0});
    ASSERT_EQ(rows.size(), 3u);
    const auto chosen = eval::evaluate(test[best], prob.dataset, eval::EvalFilters{0});
    EXPECT_DOUBLE_EQ(*rows[0].report.mase.mean, *chosen.mase.mean);
    EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.best; }), 1);

    const auto path = std::filesystem::temp_directory_path() / "forchestra_ensemble_test.csv";
    write_ensemble_csv(path, rows);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "strategy,scope,k,mase,mase_std,mae,mae_std,rmse,rmse_std,best");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("top_k,global,1,", 0), 0u);
    std::filesystem::remove(path);
}

TEST(RunEnsembles, DefaultSpecCatalog) {
    const auto specs = default_specs(5);
    // average, then per scope: top_k 1, 2, 5 and three weighted schemes
    EXPECT_EQ(specs.size(), 1u + 2u * (3u + 3u));
    EXPECT_EQ(default_specs(100).size(), 1u + 2u * (5u + 3u));
}

namespace {

model::BasePredictorConfig small_bp() {
    model::BasePredictorConfig c;
    c.num_layers = 1;
    c.hidden_size = 4;
    c.context_length = 14;
    c.prediction_length = 7;
    return c;
}

model::OptimConfig short_optim() {
    model::OptimConfig o;
    o.epochs = 2;
    o.samples_per_epoch = 64;
    o.batch_size = 16;
    return o;
}

}  // namespace

TEST(DeepEnsembles, MembersAndMean) {
    auto prob = forchestra::testing::small_problem();
    const std::vector<std::uint64_t> one{5};
    auto single = deep_ensembles(small_bp(), prob.dataset, prob.windows, short_optim(), one);
    auto direct = model::pretrain_bp(small_bp(), prob.dataset, prob.windows, short_optim(), 5);
    EXPECT_TRUE(same_values(single.members[0].parameters(), direct.bp.parameters()));

    const std::vector<std::uint64_t> seeds{1, 2, 3};
    auto ens = deep_ensembles(small_bp(), prob.dataset, prob.windows, short_optim(), seeds, nullptr, 2);
    EXPECT_FALSE(same_values(ens.members[0].parameters(), ens.members[1].parameters()));
    auto serial = deep_ensembles(small_bp(), prob.dataset, prob.windows, short_optim(), seeds);
    for (std::size_t m = 0; m < 3; ++m) EXPECT_TRUE(same_values(ens.members[m].parameters(), serial.members[m].parameters()));

    std::vector<data::WindowSample> samples{{0, 40}, {1, 50}, {2, 60}};
    const auto batch = data::make_batch(prob.dataset, samples, false);
    const nn::Tensor mean = ensemble_predictor(ens)(batch);
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t p = 0; p < 7; ++p) {
            double s = 0.0;
            for (auto& member : ens.members) s += model::predict(member, batch.context).at(b, p);
            EXPECT_NEAR(mean.at(b, p), s / 3.0, 1e-12);
        }
    }
}

TEST(KMeans, SingletonsAndSeparatedBlobs) {
    const nn::Tensor pts = random_tensor({6, 3}, 2);
    const auto own = kmeans(pts, 6, 50, 1);
    EXPECT_EQ(own.inertia.back(), 0.0);
    std::vector<std::size_t> sorted = own.assignments;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));

    nn::Rng rng(3);
    std::normal_distribution<double> noise(0.0, 0.3);
    nn::Tensor blobs({60, 2});
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 60; ++i) {
        const std::size_t label = i % 2;
        labels.push_back(label);
        blobs.at(i, 0) = (label ? 5.0 : -5.0) + noise(rng);
        blobs.at(i, 1) = (label ? 5.0 : -5.0) + noise(rng);
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = kmeans(blobs, 2, 100, seed);
        EXPECT_TRUE(r.converged);
        EXPECT_EQ(cluster_agreement(r.assignments, labels), 1.0);
        for (std::size_t it = 1; it < r.inertia.size(); ++it) EXPECT_LE(r.inertia[it], r.inertia[it - 1] + 1e-12);
    }
    EXPECT_THROW(kmeans(pts, 7, 10, 1), ConfigError);
    EXPECT_THROW(kmeans(pts, 0, 10, 1), ConfigError);
}

TEST(KMeans, InertiaNeverIncreasesAndEmptyClustersAreReseeded) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const nn::Tensor pts = random_tensor({40, 3}, seed + 20);
        const auto r = kmeans(pts, 5, 100, seed);
        for (std::size_t it = 1; it < r.inertia.size(); ++it) EXPECT_LE(r.inertia[it], r.inertia[it - 1] + 1e-12);
    }
    nn::Tensor dup({4, 2}, 1.0);
    const auto r = kmeans(dup, 2, 5, 0);
    EXPECT_GE(r.reseeded, 1u);
    EXPECT_EQ(r.inertia.back(), 0.0);
    for (std::size_t a : r.assignments) EXPECT_LT(a, 2u);
}

TEST(ClusterAgreement, BestMatching) {
    const std::vector<std::size_t> c{0, 0, 1, 1, 2, 2};
    EXPECT_EQ(cluster_agreement(c, std::vector<std::size_t>{2, 2, 0, 0, 1, 1}), 1.0);
    EXPECT_NEAR(cluster_agreement(c, std::vector<std::size_t>{2, 2, 0, 1, 1, 1}), 5.0 / 6.0, 1e-12);
}

namespace {

model::RepresentationModule tiny_rm(std::size_t W, std::uint64_t seed) {
    model::RepresentationConfig rc;
    rc.projection_dim = 4;
    rc.num_blocks = 2;
    rc.output_dim = 4;
    rc.window = W;
    return model::RepresentationModule::create(rc, seed);
}

}  // namespace

TEST(Dnc, SingleClusterEqualsOneFineTunedPredictor) {
    auto prob = forchestra::testing::small_problem();
    const auto rm = tiny_rm(21, 1);
    const auto initial = model::BasePredictor::create(small_bp(), 4);
    DncConfig cfg;
    cfg.K = 1;
    cfg.optim = short_optim();
    auto dnc = dnc_train(prob.dataset, rm, initial, prob.split.train_instances, prob.split.train, cfg, 9);

    auto lone = model::spawn_bps(initial, 1, cfg.perturbation, nn::derive_seed(9, 2));
    model::fit_bp(lone[0], prob.dataset, prob.windows, cfg.optim, nn::derive_seed(9, 10));
    EXPECT_TRUE(same_values(dnc.bps[0].parameters(), lone[0].parameters()));
    EXPECT_EQ(dnc.untrained, (std::vector<bool>{false}));
}

TEST(Dnc, EveryRowComesFromItsRoutedExpert) {
    auto prob = forchestra::testing::small_problem(12, 120, 3, {7, 14, 21}, 3);
    const auto rm = tiny_rm(21, 2);
    const auto initial = model::BasePredictor::create(small_bp(), 4);
    DncConfig cfg;
    cfg.K = 3;
    cfg.optim = short_optim();
    cfg.optim.epochs = 1;
    auto dnc = dnc_train(prob.dataset, rm, initial, prob.split.train_instances, prob.split.train, cfg, 2, nullptr, 3);
    std::vector<data::WindowSample> samples;
    for (std::size_t i = 0; i < prob.dataset.size(); ++i) samples.push_back({i, 80});
    const auto batch = data::make_batch(prob.dataset, samples, false);
    const auto clusters = route(dnc, batch);
    const nn::Tensor out = dnc_predictor(dnc)(batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        EXPECT_EQ(clusters[b], *dnc.assignment[samples[b].instance]);
        const nn::Tensor own = model::predict(dnc.bps[clusters[b]], batch.context);
        // batch composition changes the matrix-product blocking, so only near-equal
        for (std::size_t p = 0; p < 7; ++p) EXPECT_NEAR(out.at(b, p), own.at(b, p), 1e-12);
    }
    // an unclustered instance is routed to its nearest centroid
    dnc.assignment.assign(dnc.assignment.size(), std::nullopt);
    const auto reps = model::instance_representation(dnc.rm, batch.rep_context);
    const auto rerouted = route(dnc, batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        EXPECT_EQ(rerouted[b], nearest_centroid(dnc.centroids, std::span<const double>(reps.raw() + b * 4, 4)));
    }
}

TEST(Mlp, ShapeGradientAndTraining) {
    MlpConfig c;
    c.num_layers = 2;
    c.hidden_size = 5;
    c.context_length = 4;
    c.prediction_length = 3;
    Mlp m = Mlp::create(c, 1);
    EXPECT_EQ(m.layers.size(), 4u);
    const nn::Tensor x = random_tensor({3, 4, 2}, 2);
    const nn::Tensor y = random_tensor({3, 3}, 3);
    auto res = forchestra::testing::gradcheck(
        [&](nn::Tape& t) { return nn::l1_loss(t, m.forward(t, t.constant(x)), t.constant(y)); }, m.parameters());
    EXPECT_LT(res.max_relative_error, 1e-4) << res.worst;
    nn::Tape tape(false);
    EXPECT_THROW(m.forward(tape, tape.constant(random_tensor({3, 5, 2}, 2))), DimensionError);

    auto prob = forchestra::testing::small_problem();
    MlpConfig mc;
    mc.hidden_size = 16;
    mc.context_length = 14;
    mc.prediction_length = 7;
    model::OptimConfig o = short_optim();
    o.epochs = 5;
    o.learning_rate = 3e-3;
    const auto trained = train_mlp(mc, prob.dataset, prob.windows, o, 1);
    EXPECT_LE(trained.training.history.back().probe_loss, trained.training.history.front().probe_loss);
}
