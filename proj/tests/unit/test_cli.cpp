#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "forchestra/cli/run.hpp"
#include "forchestra/experiment/comparison.hpp"
#include "forchestra/model/forchestra.hpp"
#include "forchestra/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace forchestra;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("forchestra_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        nlohmann::json cfg = nlohmann::json::parse(R"({
          "seed": 3,
          "dataset": {"source": "synthetic",
                      "synthetic": {"n_instances": 24, "n_days": 160, "n_regimes": 2, "seed": 5}},
          "experiment": {
            "model": {"K": 2, "bp": {"num_layers": 1, "hidden_size": 4, "context_length": 14, "prediction_length": 7},
                      "rep": {"window": 21, "projection_dim": 4, "num_blocks": 2, "output_dim": 4}},
            "bp_optim": {"epochs": 2, "samples_per_epoch": 64, "batch_size": 16},
            "nc": {"optim": {"epochs": 1, "samples_per_epoch": 32, "batch_size": 8}},
            "train_optim": {"epochs": 2, "samples_per_epoch": 64, "batch_size": 16},
            "pool_size": 2, "min_sale_days": 0},
          "members": 2})");
        config_ = path("tiny.json");
        std::ofstream(config_) << cfg.dump(2);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string path(const std::string& rel) const { return (root_ / rel).string(); }

    // pretrain-bp and pretrain-nc outputs shared by several tests
    void pretrain() {
        ASSERT_EQ(invoke({"pretrain-bp", "--config", config_, "--out", path("bp")}).code, 0);
        ASSERT_EQ(invoke({"pretrain-nc", "--config", config_, "--out", path("nc")}).code, 0);
    }

    fs::path root_;
    std::string config_;
};

}  // namespace

TEST_F(Cli, GenSyntheticShapeAndDeterminism) {
    const std::vector<std::string> args{"gen-synthetic", "--instances", "200", "--days", "400",
                                        "--regimes", "4", "--seed", "7", "--out", path("a")};
    const Result r = invoke(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"n_regimes\": 4"), std::string::npos);  // spec echoed
    std::ifstream in(path("a/sales.csv"));
    std::string header, row;
    std::getline(in, header);
    std::size_t days = 0;
    std::stringstream hs(header);
    for (std::string cell; std::getline(hs, cell, ',');) days += cell.rfind("d_", 0) == 0;
    EXPECT_EQ(days, 400u);
    std::size_t rows = 0;
    while (std::getline(in, row)) ++rows;
    EXPECT_EQ(rows, 200u);
    EXPECT_TRUE(fs::exists(path("a/availability.csv")));

    const auto first = tree(path("a"));
    fs::remove_all(path("a"));
    ASSERT_EQ(invoke(args).code, 0);
    EXPECT_EQ(tree(path("a")), first);
}

TEST_F(Cli, UsageAndConfigErrors) {
    EXPECT_EQ(invoke({"gen-synthetic", "--regimes", "0", "--out", path("z")}).code, cli::kUsageError);
    EXPECT_EQ(invoke({}).code, cli::kUsageError);
    EXPECT_EQ(invoke({"no-such-command"}).code, cli::kUsageError);
    EXPECT_EQ(invoke({"train", "--config", config_}).code, cli::kUsageError);  // --out is required
    EXPECT_EQ(invoke({"train", "--config", path("missing.json"), "--out", path("t")}).code, cli::kUsageError);
    EXPECT_EQ(invoke({"analyze", "--config", config_, "--out", path("s"), "--scaling", "1,x"}).code, cli::kUsageError);
    EXPECT_EQ(invoke({"analyze", "--config", config_, "--out", path("s"), "--scaling", "0,2"}).code, cli::kUsageError);
    fs::create_directories(path("empty_pool"));
    EXPECT_EQ(invoke({"ensemble", "--config", config_, "--out", path("e"), "--pool", path("empty_pool")}).code,
              cli::kUsageError);
    const Result r = invoke({"train", "--config", config_, "--out", path("t"), "--init-nc", path("nope.json")});
    EXPECT_EQ(r.code, cli::kUsageError);
    EXPECT_NE(r.err.find(path("nope.json")), std::string::npos);
}

TEST_F(Cli, UnwritableOutputIsRuntimeError) {
    std::ofstream(path("file")) << "x";
    EXPECT_EQ(invoke({"gen-synthetic", "--out", path("file/sub")}).code, cli::kRuntimeError);
}

TEST_F(Cli, DivergenceReportsStep) {
    nlohmann::json cfg = nlohmann::json::parse(slurp(config_));
    cfg["experiment"]["bp_optim"]["learning_rate"] = 1e308;
    cfg["experiment"]["bp_optim"]["clip_norm"] = 0.0;
    std::ofstream(path("bad.json")) << cfg.dump();
    const Result r = invoke({"pretrain-bp", "--config", path("bad.json"), "--out", path("bp")});
    EXPECT_EQ(r.code, cli::kRuntimeError);
    EXPECT_NE(r.err.find("step"), std::string::npos) << r.err;
}

TEST_F(Cli, PretrainOutputsAndZeroEpochs) {
    pretrain();
    EXPECT_EQ(lines(slurp(path("bp/loss_history.csv"))), 3u);  // header + 2 epochs
    EXPECT_EQ(lines(slurp(path("nc/loss_history.csv"))), 2u);
    EXPECT_TRUE(fs::exists(path("bp/bp_1.json")));
    for (const char* f : {"resolved_config.json", "manifest.json", "run.log"}) {
        EXPECT_TRUE(fs::exists(path(std::string("bp/") + f))) << f;
    }

    ASSERT_EQ(invoke({"pretrain-bp", "--config", config_, "--out", path("bp0"), "--epochs", "0"}).code, 0);
    const auto doc = nn::read_json(path("bp0/bp.json"));
    auto init = model::BasePredictor::create(model::bp_config_from_json(doc.at("config")),
                                                   nn::derive_seed(experiment::pool_seed(3, 0), 1));
    std::vector<const nn::Parameter*> params;
    for (auto* p : init.parameters()) params.push_back(p);
    EXPECT_EQ(doc.at("parameters"), nn::parameters_to_json(params));
}

TEST_F(Cli, SeedPrecedence) {
    auto seed_of = [&](const std::string& dir) {
        return nn::read_json(path(dir + "/resolved_config.json")).at("seed").get<std::uint64_t>();
    };
    ::setenv("FORCHESTRA_SEED", "41", 1);
    ASSERT_EQ(invoke({"pretrain-nc", "--config", config_, "--out", path("a"), "--seed", "9"}).code, 0);
    ASSERT_EQ(invoke({"pretrain-nc", "--config", config_, "--out", path("b")}).code, 0);
    std::ofstream(path("noseed.json")) << R"({"experiment": {"nc": {"optim": {"epochs": 0}}}})";
    ASSERT_EQ(invoke({"pretrain-nc", "--config", path("noseed.json"), "--out", path("c")}).code, 0);
    ::unsetenv("FORCHESTRA_SEED");
    ASSERT_EQ(invoke({"pretrain-nc", "--config", path("noseed.json"), "--out", path("d")}).code, 0);
    EXPECT_EQ(seed_of("a"), 9u);
    EXPECT_EQ(seed_of("b"), 3u);
    EXPECT_EQ(seed_of("c"), 41u);
    EXPECT_EQ(seed_of("d"), 0u);
}

TEST_F(Cli, TrainEvaluateAndRerunAreByteIdentical) {
    pretrain();
    const std::vector<std::string> train{"train", "--config", config_, "--out", path("tr"),
                                         "--init-nc", path("nc/nc.json"), "--init-bps", path("bp/bp.json")};
    ASSERT_EQ(invoke(train).code, 0);
    const std::vector<std::string> eval{"evaluate", "--out", path("ev"), "--model", path("tr/model.json")};
    ASSERT_EQ(invoke(eval).code, 0);
    const auto first_tr = tree(path("tr")), first_ev = tree(path("ev"));
    fs::remove_all(path("tr"));
    fs::remove_all(path("ev"));
    ASSERT_EQ(invoke(train).code, 0);
    ASSERT_EQ(invoke(eval).code, 0);
    EXPECT_EQ(tree(path("tr")), first_tr);
    EXPECT_EQ(tree(path("ev")), first_ev);

    // the manifest's argument list reproduces the run
    const auto manifest = nn::read_json(path("tr/manifest.json"));
    fs::remove_all(path("tr"));
    ASSERT_EQ(invoke(manifest.at("arguments").get<std::vector<std::string>>()).code, 0);
    EXPECT_EQ(tree(path("tr")), first_tr);
    EXPECT_EQ(manifest.at("flags").at("init_bps"), path("bp/bp.json"));

    // aggregate numbers recompute from the per-instance CSV
    const auto report = nn::read_json(path("ev/report.json"));
    std::ifstream in(path("ev/report.csv"));
    std::string line;
    std::getline(in, line);
    double total = 0.0;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (int c = 0; c < 3; ++c) std::getline(ss, cell, ',');
        total += std::stod(cell);
        ++n;
    }
    ASSERT_GT(n, 0u);
    EXPECT_NEAR(total / static_cast<double>(n), report.at("mase").at("mean").get<double>(), 1e-12);

    ASSERT_EQ(invoke({"evaluate", "--out", path("tx"), "--model", path("tr/model.json"), "--transfer"}).code, 0);
    EXPECT_TRUE(fs::exists(path("tx/transfer_report.json")));
}

TEST_F(Cli, TransferWithoutHoldoutIsEmpty) {
    nlohmann::json cfg = nlohmann::json::parse(slurp(config_));
    cfg["experiment"]["split"]["holdout_fraction"] = 0.0;
    cfg["experiment"]["train_optim"]["epochs"] = 0;
    std::ofstream(path("nohold.json")) << cfg.dump();
    ASSERT_EQ(invoke({"train", "--config", path("nohold.json"), "--out", path("tr")}).code, 0);
    const Result r = invoke({"evaluate", "--out", path("ev"), "--model", path("tr/model.json"), "--transfer"});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_EQ(nn::read_json(path("ev/transfer_report.json")).at("instances"), 0);
}

TEST_F(Cli, AblationInitsAndFreezeFlags) {
    pretrain();
    const std::vector<std::vector<std::string>> inits{
        {},
        {"--init-nc", path("nc/nc.json")},
        {"--init-bps", path("bp/bp.json")},
        {"--init-nc", path("nc/nc.json"), "--init-bps", path("bp/bp.json")}};
    for (std::size_t i = 0; i < inits.size(); ++i) {
        std::vector<std::string> args{"train", "--config", config_, "--out", path("init" + std::to_string(i))};
        args.insert(args.end(), inits[i].begin(), inits[i].end());
        EXPECT_EQ(invoke(args).code, 0) << i;
    }
    auto load = [&](const std::string& dir) {
        return model::forchestra_from_checkpoint(nn::read_json(path(dir + "/model.json")));
    };
    auto same = [](const std::vector<nn::Parameter*>& a, const std::vector<nn::Parameter*>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i]->value.values() != b[i]->value.values()) return false;
        }
        return true;
    };
    const std::vector<std::string> base{"train",     "--config",   config_,           "--init-nc",
                                        path("nc/nc.json"), "--init-bps", path("bp/bp.json")};
    auto run = [&](const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args = base;
        args.push_back("--out");
        args.push_back(path(out));
        args.insert(args.end(), extra.begin(), extra.end());
        return invoke(args).code;
    };
    ASSERT_EQ(run("untrained", {"--epochs", "0"}), 0);
    ASSERT_EQ(run("frozen_rep", {"--freeze-rep"}), 0);
    ASSERT_EQ(run("frozen_bps", {"--freeze-bps"}), 0);
    auto init = load("untrained"), fr = load("frozen_rep"), fb = load("frozen_bps"), full = load("init3");
    EXPECT_TRUE(same(fr.rm_parameters(), init.rm_parameters()));
    EXPECT_FALSE(same(fr.bp_parameters(), init.bp_parameters()));
    EXPECT_TRUE(same(fb.bp_parameters(), init.bp_parameters()));
    EXPECT_FALSE(same(fb.rm_parameters(), init.rm_parameters()));
    EXPECT_FALSE(same(full.bp_parameters(), init.bp_parameters()));
    EXPECT_EQ(nn::read_json(path("frozen_rep/manifest.json")).at("flags").at("freeze_rep"), true);
}

TEST_F(Cli, EnsembleAnalyzeAndCompare) {
    pretrain();
    Result r = invoke({"ensemble", "--config", config_, "--out", path("en"), "--pool", path("bp"), "--strategy", "top_k",
                    "--k", "1", "--scope", "global"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(slurp(path("en/ensembles.csv"))), 2u);
    ASSERT_EQ(invoke({"ensemble", "--config", config_, "--out", path("en_all"), "--pool", path("bp")}).code, 0);
    EXPECT_GT(lines(slurp(path("en_all/ensembles.csv"))), 5u);

    ASSERT_EQ(invoke({"train", "--config", config_, "--out", path("tr"), "--init-bps", path("bp/bp.json")}).code, 0);
    ASSERT_EQ(invoke({"analyze", "--config", config_, "--out", path("an"), "--model", path("tr/model.json"), "--ranks",
                   "--export-reps"})
                  .code,
              0);
    EXPECT_EQ(lines(slurp(path("an/ranks.csv"))), 10u);  // header + 3 comparisons x 3 depths
    const std::string reps = slurp(path("an/representations.csv"));
    EXPECT_EQ(reps.substr(0, reps.find('\n')), "id,r0,r1,r2,r3");
    EXPECT_EQ(lines(reps), 25u);

    ASSERT_EQ(invoke({"analyze", "--config", config_, "--out", path("sc"), "--scaling", "2,1"}).code, 0);
    std::ifstream sc(path("sc/scaling.csv"));
    std::string header, a, b;
    std::getline(sc, header);
    std::getline(sc, a);
    std::getline(sc, b);
    EXPECT_EQ(a.substr(0, 2), "1,");
    EXPECT_EQ(b.substr(0, 2), "2,");

    ASSERT_EQ(invoke({"compare", "--config", config_, "--out", path("cmp")}).code, 0);
    EXPECT_TRUE(fs::exists(path("cmp/comparison.json")));
}
