// Acceptance suite: one PASS/FAIL line per criterion. `--only 1,4` runs a
// subset; `--report file.json` writes the measured numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/baselines/dnc.hpp"
#include "forchestra/baselines/ensemble.hpp"
#include "forchestra/cli/config.hpp"
#include "forchestra/cli/run.hpp"
#include "forchestra/error.hpp"
#include "forchestra/eval/metrics.hpp"
#include "forchestra/eval/ranking.hpp"
#include "forchestra/experiment/comparison.hpp"
#include "forchestra/model/analysis.hpp"
#include "forchestra/model/forchestra.hpp"
#include "forchestra/nn/checkpoint.hpp"
#include "forchestra/nn/layers.hpp"
#include "forchestra/nn/ops.hpp"
#include "forchestra/ssl/pretrain.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace forchestra;
using forchestra::testing::gradcheck;
using forchestra::testing::random_tensor;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failed checks for one criterion.
struct Checks {
    std::vector<std::string> failures;
    json numbers = json::object();

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void near(double a, double b, double tol, const std::string& what) {
        std::ostringstream s;
        s.precision(17);
        s << what << ": " << a << " vs " << b << " (tol " << tol << ")";
        expect(std::abs(a - b) <= tol, s.str());
    }
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

// ------------------------------------------------------------------ 1

nn::Parameter random_param(const std::string& name, nn::Shape shape, std::uint64_t seed, double bound = 1.0) {
    return nn::Parameter(name, random_tensor(std::move(shape), seed, bound));
}

model::RepresentationConfig tiny_rep(std::size_t W) {
    model::RepresentationConfig c;
    c.input_dim = 2;
    c.projection_dim = 4;
    c.num_blocks = 2;
    c.output_dim = 4;
    c.window = W;
    return c;
}

model::ForchestraConfig tiny_model(std::size_t K) {
    model::ForchestraConfig c;
    c.K = K;
    c.bp.num_layers = 1;
    c.bp.hidden_size = 3;
    c.bp.context_length = 5;
    c.bp.prediction_length = 2;
    c.rep = tiny_rep(8);
    return c;
}

void gradient_suite(Checks& c) {
    const auto t0 = Clock::now();
    double worst_layer = 0.0, worst_composite = 0.0;
    auto layer = [&](const std::string& name, std::uint64_t seed, const testing::GradCheckResult& r) {
        worst_layer = std::max(worst_layer, r.max_relative_error);
        c.expect(r.max_relative_error < 1e-4, name + " seed " + std::to_string(seed) + ": " + r.worst);
    };
    auto composite = [&](const std::string& name, std::uint64_t seed, const testing::GradCheckResult& r) {
        worst_composite = std::max(worst_composite, r.max_relative_error);
        c.expect(r.max_relative_error < 1e-3, name + " seed " + std::to_string(seed) + ": " + r.worst);
    };
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        nn::Rng rng(seed);
        {
            auto fc = nn::LinearLayer::create("fc", 6, 4, rng);
            for (double& v : fc.bias.value.data()) v = 0.3;
            auto x = random_param("x", {3, 5, 6}, seed + 1);
            layer("linear", seed, gradcheck([&](nn::Tape& t) { return nn::sum(t, nn::square(t, fc.forward(t, t.parameter(x)))); },
                                            {&x, &fc.weight, &fc.bias}));
        }
        {
            std::vector<nn::LstmLayer> stack{nn::LstmLayer::create("l0", 2, 3, rng), nn::LstmLayer::create("l1", 3, 3, rng)};
            auto x = random_param("x", {2, 4, 2}, seed + 2);
            std::vector<nn::Parameter*> ps{&x};
            for (auto& l : stack) {
                for (auto* p : l.parameters()) ps.push_back(p);
            }
            layer("lstm", seed,
                  gradcheck([&](nn::Tape& t) { return nn::sum(t, nn::square(t, nn::lstm_forward(t, t.parameter(x), stack))); },
                            ps));
        }
        {
            auto block = nn::ConvBlock::create("b", nn::ConvBlockConfig{3, 4, 3, 2, true, nn::Activation::gelu}, rng);
            auto x = random_param("x", {2, 8, 3}, seed + 3);
            layer("conv block", seed, gradcheck([&](nn::Tape& t) {
                      return nn::sum(t, nn::square(t, nn::dilated_conv_block_forward(t, t.parameter(x), block)));
                  },
                                                {&x, &block.kernel, &block.bias}));
        }
        {
            auto x = random_param("x", {2, 7, 3}, seed + 4);
            layer("max pool", seed,
                  gradcheck([&](nn::Tape& t) { return nn::sum(t, nn::square(t, nn::max_pool_time(t, t.parameter(x), 2))); },
                            {&x}));
            auto z = random_param("z", {4, 5}, seed + 5, 2.0);
            const nn::Tensor probe = random_tensor({4, 5}, seed + 6);
            layer("softmax", seed, gradcheck([&](nn::Tape& t) {
                      return nn::sum(t, nn::mul(t, nn::softmax(t, t.parameter(z)), t.constant(probe)));
                  },
                                             {&z}));
            auto p = random_param("p", {4, 3}, seed + 7, 2.0);
            const nn::Tensor y = random_tensor({4, 3}, seed + 8, 2.0);
            layer("l1 loss", seed,
                  gradcheck([&](nn::Tape& t) { return nn::l1_loss(t, t.parameter(p), t.constant(y)); }, {&p}));
        }
        {
            auto a = random_param("a", {3, 5, 2}, seed + 9), b = random_param("b", {3, 5, 2}, seed + 10);
            layer("temporal loss", seed, gradcheck([&](nn::Tape& t) {
                      return ssl::temporal_loss(t, t.parameter(a), t.parameter(b));
                  },
                                                   {&a, &b}));
            layer("instance loss", seed, gradcheck([&](nn::Tape& t) {
                      return ssl::instance_loss(t, t.parameter(a), t.parameter(b));
                  },
                                                   {&a, &b}));
            layer("hierarchical loss", seed, gradcheck([&](nn::Tape& t) {
                      return ssl::hierarchical_loss(t, t.parameter(a), t.parameter(b));
                  },
                                                       {&a, &b}));
            layer("elementwise composite", seed, gradcheck([&](nn::Tape& t) {
                      const nn::Var va = t.parameter(a), vb = t.parameter(b);
                      const nn::Var g = nn::mul(t, nn::tanh(t, va), nn::sigmoid(t, vb));
                      return nn::mean(t, nn::add(t, nn::gelu(t, g), nn::sub(t, nn::scale(t, va, 0.5), vb)));
                  },
                                                           {&a, &b}));
        }
        {
            // contrastive pre-training objective through the representation module
            model::RepresentationModule rm = model::RepresentationModule::create(tiny_rep(16), seed);
            nn::Rng noise(seed + 70);
            for (auto* p : rm.parameters()) nn::perturb(*p, 0.1, noise);
            const nn::Tensor x = random_tensor({3, 16, 2}, seed + 40);
            ssl::AugmentationConfig aug;
            aug.min_overlap = 4;
            composite("contrastive objective", seed, gradcheck(
                                                          [&](nn::Tape& t) {
                                                              nn::Rng r(seed + 90);
                                                              return ssl::contrastive_loss(t, rm, x, aug, {}, r);
                                                          },
                                                          rm.parameters()));
        }
        {
            // conductor-weighted forecast under the L1 objective
            model::ForchestraModel m = model::ForchestraModel::create(tiny_model(2), seed);
            const nn::Tensor x = random_tensor({3, 5, 2}, seed + 1);
            const nn::Tensor rx = random_tensor({3, 8, 2}, seed + 2);
            const nn::Tensor y = random_tensor({3, 2}, seed + 3, 2.0);
            composite("forchestra objective", seed, gradcheck(
                                                         [&](nn::Tape& t) {
                                                             auto out = m.forward(t, t.constant(x), t.constant(rx));
                                                             return nn::l1_loss(t, out.prediction, t.constant(y));
                                                         },
                                                         m.parameters()));
        }
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 60.0, "runtime " + fmt(secs, 1) + " s exceeds 1 minute");
    c.numbers = {{"worst_layer_rel_error", worst_layer}, {"worst_composite_rel_error", worst_composite}, {"seconds", secs}};
}

// ------------------------------------------------------------------ 2

void loss_oracles(Checks& c) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const nn::Shape shape{2 + seed % 3, 2 + seed % 5, 2 + seed % 3};
        const nn::Tensor r = random_tensor(shape, seed + 1, 1.5), r2 = random_tensor(shape, seed + 50, 1.5);
        const double dt = std::abs(ssl::temporal_loss(r, r2) - testing::temporal_oracle(r, r2));
        const double di = std::abs(ssl::instance_loss(r, r2) - testing::instance_oracle(r, r2));
        const double dh = std::abs(ssl::hierarchical_loss(r, r2) - testing::hierarchical_oracle(r, r2));
        worst = std::max({worst, dt, di, dh});
        c.expect(dt <= 1e-10 && di <= 1e-10 && dh <= 1e-10, "oracle mismatch at seed " + std::to_string(seed));
    }
    c.expect(ssl::temporal_loss(random_tensor({3, 1, 4}, 1), random_tensor({3, 1, 4}, 2)) == 0.0,
             "single time step temporal loss is not 0");
    c.expect(ssl::instance_loss(random_tensor({1, 6, 4}, 3), random_tensor({1, 6, 4}, 4)) == 0.0,
             "single instance loss is not 0");
    c.numbers = {{"worst_abs_error", worst}};
}

// ------------------------------------------------------------------ 3

void metric_oracles(Checks& c) {
    const std::vector<double> y{3, 5}, yh{4, 4}, h{2, 4, 2, 4};
    const std::vector<std::uint8_t> both{1, 1}, first{1, 0}, all4{1, 1, 1, 1};
    c.expect(eval::masked_mae(y, yh, first) == 1.0, "masked MAE worked example");
    c.expect(eval::masked_rmse(y, yh, both) == 1.0, "masked RMSE worked example");
    c.expect(eval::masked_mase(y, yh, both, h, all4) == 0.5, "masked MASE worked example");
    c.expect(!eval::masked_mae(y, yh, std::vector<std::uint8_t>{0, 0}), "no sale days must be undefined");

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    bool exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(7), b(7), hist(30);
        for (auto* v : {&a, &b, &hist}) {
            for (auto& x : *v) x = u(rng);
        }
        const std::vector<std::uint8_t> s7(7, 1), s30(30, 1);
        const double base = *eval::masked_mase(a, b, s7, hist, s30);
        for (double k : {0.125, 4.0, 1024.0}) {
            auto sc = [k](std::vector<double> v) {
                for (auto& x : v) x *= k;
                return v;
            };
            exact = exact && *eval::masked_mase(sc(a), sc(b), s7, sc(hist), s30) == base;
        }
    }
    c.expect(exact, "MASE not exactly invariant under power-of-two rescaling");

    std::mt19937_64 walk_rng(11);
    std::normal_distribution<double> step(0.0, 1.0);
    const std::size_t H = 200, P = 28;
    double total = 0.0;
    for (int w = 0; w < 1000; ++w) {
        std::vector<double> s(H + P);
        double x = 0.0;
        for (auto& v : s) v = (x += step(walk_rng));
        std::vector<double> hist(s.begin(), s.begin() + H), fut(s.begin() + H, s.end()), naive(P);
        for (std::size_t t = 0; t < P; ++t) naive[t] = s[H + t - 1];
        total += *eval::masked_mase(fut, naive, std::vector<std::uint8_t>(P, 1), hist, std::vector<std::uint8_t>(H, 1));
    }
    const double avg = total / 1000.0;
    c.near(avg, 1.0, 0.1, "naive MASE on random walks");
    c.numbers = {{"random_walk_naive_mase", avg}};
}

// ------------------------------------------------------------------ 4

void weight_contracts(Checks& c) {
    double worst = 0.0;
    auto check_simplex = [&](const std::vector<double>& w, const std::string& what) {
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        worst = std::max(worst, std::abs(s - 1.0));
        c.expect(std::abs(s - 1.0) <= 1e-9 && std::all_of(w.begin(), w.end(), [](double v) { return v >= 0.0; }),
                 what + " is not a probability vector");
    };
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1e-3, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(9), scores(6);
        for (auto& v : logits) v = 40.0 * (u(rng) - 2.5);
        for (auto& v : scores) v = u(rng);
        check_simplex(nn::softmax(logits), "softmax");
        using baselines::Strategy;
        for (auto s : {Strategy::average, Strategy::w_inv, Strategy::w_sqr, Strategy::w_exp}) {
            check_simplex(baselines::ensemble_weights(scores, {s}), "ensemble " + baselines::to_string(s));
        }
        for (std::size_t k = 1; k <= scores.size(); ++k) {
            check_simplex(baselines::ensemble_weights(scores, {Strategy::top_k, k}), "top_k");
        }
        const auto top1 = baselines::ensemble_weights(scores, {Strategy::top_k, 1});
        const auto best = static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
        c.expect(top1[best] == 1.0, "top_1 is not the argmin");
    }
    model::MetaLearner ml = model::MetaLearner::create(4, 7, 1);
    const nn::Tensor w = model::weigh(ml, random_tensor({20, 4}, 2, 5.0));
    for (std::size_t b = 0; b < 20; ++b) {
        std::vector<double> row(7);
        for (std::size_t k = 0; k < 7; ++k) row[k] = w.at(b, k);
        check_simplex(row, "conductor weights");
    }
    const auto inv = baselines::ensemble_weights(std::vector<double>{0.5, 1.0},
                                                 {baselines::Strategy::w_inv, std::nullopt, baselines::Scope::global, 1e-15});
    c.near(inv[0], 2.0 / 3.0, 1e-12, "w_inv[0]");
    c.near(inv[1], 1.0 / 3.0, 1e-12, "w_inv[1]");

    model::ForchestraModel m = model::ForchestraModel::create(tiny_model(1), 4);
    const nn::Tensor x = random_tensor({3, 5, 2}, 5), rx = random_tensor({3, 8, 2}, 6);
    c.expect(model::forecast(m, x, rx).prediction.values() == model::predict(m.bps[0], x).values(),
             "K=1 prediction differs from its lone BP");
    c.numbers = {{"worst_sum_deviation", worst}};
}

// ------------------------------------------------ desk-scale experiments

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct DeskRun {
    data::Dataset dataset;
    experiment::ComparisonConfig config;
    experiment::ComparisonResult result;
};

cli::ExperimentConfig desk_config(std::uint64_t seed) {
    cli::ExperimentConfig c = cli::default_config();
    c.dataset.synthetic.n_instances = 200;
    c.dataset.synthetic.n_days = 400;
    c.dataset.synthetic.n_regimes = 4;
    c.dataset.synthetic.seed = seed;
    c.seed = seed;
    return c;
}

class Desk {
public:
    const std::vector<DeskRun>& runs() {
        if (runs_.empty()) {
            const auto t0 = Clock::now();
            for (std::uint64_t s : kSeeds) {
                cli::ExperimentConfig cfg = desk_config(s);
                DeskRun r{cli::load_dataset(cfg), cfg.run, {}};
                r.result = experiment::run_comparison(r.dataset, r.config, s);
                std::cerr << "  seed " << s << ": " << experiment::to_json(r.result).dump() << " (" << fmt(r.result.seconds, 1)
                          << " s)\n";
                runs_.push_back(std::move(r));
            }
            seconds_ = seconds_since(t0);
        }
        return runs_;
    }
    double seconds() const { return seconds_; }

private:
    std::vector<DeskRun> runs_;
    double seconds_ = 0.0;
};

void table_one(Checks& c, Desk& desk) {
    const auto& runs = desk.runs();
    std::vector<double> f, sma, single, topk, d_sma, d_single, d_topk;
    for (const auto& r : runs) {
        f.push_back(r.result.forchestra);
        sma.push_back(r.result.sma);
        single.push_back(r.result.single_bp);
        topk.push_back(r.result.best_top_k);
        d_sma.push_back(r.result.sma - r.result.forchestra);
        d_single.push_back(r.result.single_bp - r.result.forchestra);
        d_topk.push_back(r.result.best_top_k - r.result.forchestra);
    }
    using experiment::median;
    c.numbers = {{"forchestra", f},
                 {"sma", sma},
                 {"single_bp", single},
                 {"best_top_k", topk},
                 {"median_margin_sma", median(d_sma)},
                 {"median_margin_single_bp", median(d_single)},
                 {"median_margin_best_top_k", median(d_topk)},
                 {"seconds", desk.seconds()}};
    c.expect(median(d_sma) >= 0.01, "median margin over SMA " + fmt(median(d_sma)) + " < 0.01");
    c.expect(median(d_single) >= 0.01, "median margin over single BP " + fmt(median(d_single)) + " < 0.01");
    c.expect(median(d_topk) >= 0.01, "median margin over best Top-K " + fmt(median(d_topk)) + " < 0.01");
    c.expect(desk.seconds() < 1800.0, "runtime " + fmt(desk.seconds(), 0) + " s exceeds 30 minutes");
}

void table_two(Checks& c, Desk& desk) {
    std::vector<double> hold, sma, train, gap;
    for (const auto& r : desk.runs()) {
        if (!r.result.forchestra_holdout || !r.result.sma_holdout) {
            c.expect(false, "seed " + std::to_string(r.result.seed) + " has no scored hold-out instances");
            continue;
        }
        hold.push_back(*r.result.forchestra_holdout);
        sma.push_back(*r.result.sma_holdout);
        train.push_back(r.result.forchestra);
        gap.push_back(std::abs(*r.result.forchestra_holdout - r.result.forchestra));
    }
    if (hold.empty()) return;
    using experiment::median;
    c.numbers = {{"forchestra_holdout", hold}, {"sma_holdout", sma}, {"forchestra_training", train}, {"abs_gap", gap}};
    c.expect(median(hold) < median(sma), "median hold-out MASE " + fmt(median(hold)) + " does not beat SMA " + fmt(median(sma)));
    c.expect(median(gap) <= 0.15, "median hold-out gap " + fmt(median(gap)) + " > 0.15");
}

void scaling(Checks& c, Desk& desk) {
    std::map<std::size_t, std::vector<double>> by_k;
    for (const auto& r : desk.runs()) {
        for (std::size_t K : {1u, 2u}) {
            by_k[K].push_back(experiment::scaling_point(r.dataset, r.config, K, r.result.seed));
        }
        by_k[5].push_back(r.result.forchestra);  // same pipeline as scaling_point with K = 5
    }
    json per_k = json::object();
    std::vector<double> med;
    for (const auto& [K, v] : by_k) {
        per_k[std::to_string(K)] = {{"per_seed", v}, {"median", experiment::median(v)}};
        med.push_back(experiment::median(v));
    }
    c.numbers = per_k;
    c.expect(med[1] <= med[0] && med[2] <= med[1],
             "median MASE over K=1,2,5 is " + fmt(med[0]) + ", " + fmt(med[1]) + ", " + fmt(med[2]));
}

// --------------------------------------------------------------- CLI runs

struct Tmp {
    fs::path root;
    explicit Tmp(const std::string& name) : root(fs::temp_directory_path() / ("forchestra_acceptance_" + name)) {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Tmp() { fs::remove_all(root); }
    std::string operator()(const std::string& rel) const { return (root / rel).string(); }
};

json tiny_cli_config() {
    return json::parse(R"({
      "seed": 3,
      "dataset": {"source": "synthetic", "synthetic": {"n_instances": 24, "n_days": 160, "n_regimes": 2, "seed": 5}},
      "experiment": {
        "model": {"K": 2, "bp": {"num_layers": 1, "hidden_size": 4, "context_length": 14, "prediction_length": 7},
                  "rep": {"window": 21, "projection_dim": 4, "num_blocks": 2, "output_dim": 4}},
        "bp_optim": {"epochs": 2, "samples_per_epoch": 64, "batch_size": 16},
        "nc": {"optim": {"epochs": 1, "samples_per_epoch": 32, "batch_size": 8}},
        "train_optim": {"epochs": 2, "samples_per_epoch": 64, "batch_size": 16},
        "pool_size": 2, "min_sale_days": 0},
      "members": 2})");
}

int invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return files;
}

bool same_values(const std::vector<nn::Parameter*>& a, const std::vector<nn::Parameter*>& b) {
    return testing::same_values(a, b);
}

void ablations(Checks& c) {
    Tmp tmp("ablation");
    std::ofstream(tmp("cfg.json")) << tiny_cli_config().dump();
    const std::string cfg = tmp("cfg.json");
    c.expect(invoke({"pretrain-bp", "--config", cfg, "--out", tmp("bp")}) == 0, "pretrain-bp failed");
    c.expect(invoke({"pretrain-nc", "--config", cfg, "--out", tmp("nc")}) == 0, "pretrain-nc failed");
    const std::string bp = tmp("bp/bp.json"), nc = tmp("nc/nc.json");
    const std::vector<std::pair<std::string, std::vector<std::string>>> rows{
        {"no_init", {}},
        {"init_nc", {"--init-nc", nc}},
        {"init_bps", {"--init-bps", bp}},
        {"init_both", {"--init-nc", nc, "--init-bps", bp}},
        {"freeze_rep", {"--init-nc", nc, "--init-bps", bp, "--freeze-rep"}},
        {"freeze_bps", {"--init-nc", nc, "--init-bps", bp, "--freeze-bps"}},
        {"untrained", {"--init-nc", nc, "--init-bps", bp, "--epochs", "0"}}};
    json completed = json::array();
    for (const auto& [name, flags] : rows) {
        std::vector<std::string> args{"train", "--config", cfg, "--out", tmp(name)};
        args.insert(args.end(), flags.begin(), flags.end());
        const int code = invoke(args);
        c.expect(code == 0, name + " exited with " + std::to_string(code));
        if (code == 0) completed.push_back(name);
    }
    c.numbers = {{"completed", completed}};
    if (!c.failures.empty()) return;
    auto load = [&](const std::string& d) { return model::forchestra_from_checkpoint(nn::read_json(tmp(d + "/model.json"))); };
    auto init = load("untrained"), fr = load("freeze_rep"), fb = load("freeze_bps");
    c.expect(same_values(fr.rm_parameters(), init.rm_parameters()), "--freeze-rep changed the representation module");
    c.expect(same_values(fb.bp_parameters(), init.bp_parameters()), "--freeze-bps changed the base predictors");
    c.expect(!same_values(fr.bp_parameters(), init.bp_parameters()), "--freeze-rep run did not train the predictors");
    c.expect(!same_values(fb.rm_parameters(), init.rm_parameters()), "--freeze-bps run did not train the representation");
}

// ------------------------------------------------------------------ 9

void rank_analysis(Checks& c, Desk& desk) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 20;
        std::vector<std::size_t> a(n);
        std::iota(a.begin(), a.end(), 0);
        std::shuffle(a.begin(), a.end(), rng);
        for (std::size_t d = 1; d <= n; ++d) c.expect(eval::rbo(a, a, d) == 1.0, "identical rankings RBO != 1");
        // rotate by half: the first n/2 entries share nothing
        std::vector<std::size_t> b(a.begin() + static_cast<std::ptrdiff_t>(n / 2), a.end());
        b.insert(b.end(), a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n / 2));
        c.expect(eval::rbo(a, b, n / 2) == 0.0, "prefix-disjoint rankings RBO != 0");
    }

    // divide-and-conquer clusters against the generating regimes
    json agreement = json::array();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        data::SyntheticSpec spec;
        spec.n_instances = 90;
        spec.n_days = 200;
        spec.n_regimes = 3;
        spec.seed = seed;
        experiment::ComparisonConfig cfg;
        cfg.model.K = 3;
        cfg.model.bp.hidden_size = 8;
        cfg.model.bp.context_length = 28;
        cfg.model.rep.window = 56;
        cfg.nc.optim.epochs = 8;
        cfg.nc.optim.samples_per_epoch = 1024;
        cfg.nc.optim.batch_size = 32;
        const auto ds = data::generate_synthetic(spec, {7, 28, 56});
        cfg.model.bp.input_dim = cfg.model.rep.input_dim = ds.input_dim();
        const auto split = experiment::make_split(ds, cfg, seed);
        const auto rm = experiment::pretrained_representation(ds, cfg, split, seed);
        baselines::DncConfig dc;
        dc.K = 3;
        dc.optim.epochs = 1;
        dc.optim.samples_per_epoch = 64;
        const auto dnc = baselines::dnc_train(ds, rm, model::BasePredictor::create(cfg.model.bp, seed), split.train_instances,
                                              split.train, dc, seed);
        std::vector<std::size_t> labels;
        for (std::size_t i : split.train_instances) labels.push_back(std::stoul(*ds.instances[i].meta("regime")));
        const double a = baselines::cluster_agreement(dnc.clustering.assignments, labels);
        agreement.push_back(a);
        c.expect(a > 0.8, "DnC regime agreement " + fmt(a) + " at seed " + std::to_string(seed));
    }

    const DeskRun& run = desk.runs().front();
    const auto split = experiment::make_split(run.dataset, run.config, run.result.seed);
    const auto report = model::rank_analysis(*run.result.trained, run.dataset, split);
    c.expect(report.rows.size() == 9, "rank report has " + std::to_string(report.rows.size()) + " rows");
    c.expect(report.instances_used > 0, "rank report used no instances");
    json rows = json::array();
    for (const auto& r : report.rows) {
        c.expect(r.rbo >= 0.0 && r.rbo <= 1.0, "RBO outside [0, 1]");
        rows.push_back(json{{"comparison", r.comparison}, {"depth", r.depth}, {"effective_depth", r.effective_depth}, {"rbo", r.rbo}});
    }
    c.numbers = json{{"dnc_agreement", agreement}, {"rank_rows", rows}, {"instances_used", report.instances_used}};
}

// ----------------------------------------------------------------- 10

void determinism(Checks& c) {
    Tmp tmp("determinism");
    std::ofstream(tmp("cfg.json")) << tiny_cli_config().dump();
    const std::string cfg = tmp("cfg.json");
    const std::vector<std::vector<std::string>> commands{
        {"gen-synthetic", "--instances", "30", "--days", "120", "--regimes", "3", "--seed", "4", "--out", tmp("gen")},
        {"pretrain-bp", "--config", cfg, "--out", tmp("bp")},
        {"pretrain-nc", "--config", cfg, "--out", tmp("nc")},
        {"train", "--config", cfg, "--out", tmp("tr"), "--init-nc", tmp("nc/nc.json"), "--init-bps", tmp("bp/bp.json")},
        {"evaluate", "--out", tmp("ev"), "--model", tmp("tr/model.json")},
        {"evaluate", "--out", tmp("tx"), "--model", tmp("tr/model.json"), "--transfer"},
        {"ensemble", "--config", cfg, "--out", tmp("en"), "--pool", tmp("bp")},
        {"analyze", "--config", cfg, "--out", tmp("an"), "--model", tmp("tr/model.json"), "--ranks", "--export-reps"},
        {"analyze", "--config", cfg, "--out", tmp("sc"), "--scaling", "1,2"},
        {"compare", "--config", cfg, "--out", tmp("cmp")}};
    json checked = json::array();
    for (const auto& args : commands) {
        const std::string out = *(std::find(args.begin(), args.end(), "--out") + 1);
        const int first = invoke(args);
        if (first != 0) {
            c.expect(false, args[0] + " exited with " + std::to_string(first));
            continue;
        }
        const auto before = tree(out);
        fs::remove_all(out);
        c.expect(invoke(args) == 0, args[0] + " rerun failed");
        const bool same = tree(out) == before;
        c.expect(same, args[0] + " outputs differ between runs");
        checked.push_back(args[0]);
    }
    c.numbers = {{"commands", checked}};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    std::string report_path;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else if (a == "--report" && i + 1 < argc) {
            report_path = argv[++i];
        } else {
            std::cerr << "usage: forchestra_acceptance [--only 1,2,...] [--report out.json]\n";
            return 2;
        }
    }

    Desk desk;
    const std::vector<std::pair<std::string, std::function<void(Checks&)>>> criteria{
        {"gradient suite", gradient_suite},
        {"contrastive loss oracles", loss_oracles},
        {"metric oracles", metric_oracles},
        {"weight contracts", weight_contracts},
        {"desk-scale comparison", [&](Checks& c) { table_one(c, desk); }},
        {"zero-shot hold-out", [&](Checks& c) { table_two(c, desk); }},
        {"scaling over K", [&](Checks& c) { scaling(c, desk); }},
        {"ablation reachability", ablations},
        {"rank analysis", [&](Checks& c) { rank_analysis(c, desk); }},
        {"determinism", determinism}};

    json report = json::object();
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Checks c;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = seconds_since(t0);
        const bool pass = c.failures.empty();
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " (" << fmt(secs, 1)
                  << " s)";
        if (!pass) {
            std::cout << " -";
            for (std::size_t f = 0; f < std::min<std::size_t>(c.failures.size(), 3); ++f) std::cout << ' ' << c.failures[f] << ';';
            if (c.failures.size() > 3) std::cout << " (+" << c.failures.size() - 3 << " more)";
        }
        std::cout << '\n' << std::flush;
        report[std::to_string(id)] = {{"name", criteria[i].first}, {"pass", pass}, {"seconds", secs},
                                      {"numbers", c.numbers}, {"failures", c.failures}};
    }
    if (!report_path.empty()) std::ofstream(report_path) << report.dump(2) << '\n';
    return failed == 0 ? 0 : 1;
}
