#include "forchestra/cli/run.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include "forchestra/baselines/deep_ensemble.hpp"
#include "forchestra/baselines/dnc.hpp"
#include "forchestra/baselines/ensemble.hpp"
#include "forchestra/cli/config.hpp"
#include "forchestra/data/m5.hpp"
#include "forchestra/error.hpp"
#include "forchestra/experiment/comparison.hpp"
#include "forchestra/model/analysis.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(what + " '" + path.string() + "' does not exist or cannot be read");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Output directory with its log, resolved config and manifest.
class RunDir {
public:
    RunDir(fs::path dir, std::ostream& err) : dir_(std::move(dir)), err_(err) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory '" + dir_.string() + "'");
        log_.open(dir_ / "run.log", std::ios::binary | std::ios::trunc);
        if (!log_) throw IoError("cannot write '" + (dir_ / "run.log").string() + "'");
        outputs_.insert("run.log");
    }

    fs::path path(const std::string& name) {
        outputs_.insert(name);
        return dir_ / name;
    }
    void write_json(const std::string& name, const json& doc) { write_text(path(name), doc.dump(2) + "\n"); }

    void log(const std::string& line) {
        log_ << line << '\n';
        log_.flush();
        err_ << line << '\n';
    }

    void log_history(const std::string& stage, const model::TrainResult& r) {
        if (r.initial_validation) log(stage + " initial validation " + num(*r.initial_validation));
        for (const auto& e : r.history) {
            std::string line = stage + " epoch " + std::to_string(e.epoch) + " train_loss " + num(e.train_loss) +
                               " probe_loss " + num(e.probe_loss);
            if (e.validation) line += " validation " + num(*e.validation);
            log(line);
        }
        log(stage + " kept epoch " + std::to_string(r.best_epoch));
    }

    void finish(json manifest) {
        outputs_.insert("manifest.json");
        manifest["outputs"] = std::vector<std::string>(outputs_.begin(), outputs_.end());
        write_text(dir_ / "manifest.json", manifest.dump(2) + "\n");
    }

private:
    fs::path dir_;
    std::ostream& err_;
    std::ofstream log_;
    std::set<std::string> outputs_;
};

// Flags shared by the config-driven commands.
struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> min_sale_days;
    std::string data;
    std::string availability;
};

void add_common(CLI::App* cmd, Common& c, bool with_epochs) {
    cmd->add_option("--config", c.config, "JSON experiment config");
    cmd->add_option("--out", c.out, "output directory")->required();
    cmd->add_option("--seed", c.seed, "global seed (falls back to the config, then FORCHESTRA_SEED)");
    cmd->add_option("--jobs", c.jobs, "worker threads across independent units")->check(CLI::PositiveNumber);
    cmd->add_option("--data", c.data, "M5-format sales CSV (replaces the configured dataset)");
    cmd->add_option("--availability", c.availability, "availability sidecar for --data");
    cmd->add_option("--min-sale-days", c.min_sale_days, "evaluation filter");
    if (with_epochs) cmd->add_option("--epochs", c.epochs, "epochs of the command's training stage");
}

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("FORCHESTRA_SEED");
    if (v == nullptr || *v == '\0') return std::nullopt;
    try {
        std::size_t pos = 0;
        const auto s = std::stoull(v, &pos);
        if (v[pos] != '\0') throw std::invalid_argument("trailing characters");
        return s;
    } catch (const std::exception&) {
        throw ConfigError(std::string("FORCHESTRA_SEED is not an unsigned integer: '") + v + "'");
    }
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = default_config();
    bool seed_from_file = false;
    if (!c.config.empty()) {
        const json doc = read_json(c.config, "config");
        cfg = config_from_json(doc);
        seed_from_file = doc.is_object() && doc.contains("seed");
    }
    if (c.seed) {
        cfg.seed = *c.seed;
    } else if (!seed_from_file) {
        if (auto s = env_seed()) cfg.seed = *s;
    }
    if (c.jobs) cfg.run.jobs = *c.jobs;
    if (c.min_sale_days) cfg.run.filters.min_sale_days = *c.min_sale_days;
    if (!c.data.empty()) {
        cfg.dataset.kind = "m5";
        cfg.dataset.path = c.data;
        cfg.dataset.availability = c.availability;
    }
    return cfg;
}

json instance_ids(const data::Dataset& ds, std::span<const std::size_t> idx) {
    json out = json::array();
    for (std::size_t i : idx) out.push_back(ds.instances[i].id);
    return out;
}

json base_manifest(const std::string& command, const std::vector<std::string>& args, const ExperimentConfig& cfg) {
    return {{"command", command}, {"arguments", args}, {"seed", cfg.seed}, {"format", "forchestra-run"}, {"version", 1}};
}

// Loads the dataset, writes the resolved config and returns the split.
struct Prepared {
    data::Dataset ds;
    data::Split split;
};

Prepared prepare(ExperimentConfig& cfg, RunDir& dir) {
    Prepared p;
    p.ds = load_dataset(cfg);
    dir.write_json("resolved_config.json", to_json(cfg));
    p.split = experiment::make_split(p.ds, cfg.run, cfg.seed);
    dir.log("dataset " + std::to_string(p.ds.size()) + " instances x " + std::to_string(p.ds.length()) +
            " days; train instances " + std::to_string(p.split.train_instances.size()) + ", hold-out " +
            std::to_string(p.split.holdout_instances.size()));
    return p;
}

void write_checkpoint(RunDir& dir, const std::string& name, const json& doc) {
    write_text(dir.path(name), doc.dump() + "\n");
}

// Looks for the run files written next to a checkpoint.
fs::path sibling(const std::string& checkpoint, const std::string& name) {
    return fs::path(checkpoint).parent_path() / name;
}

ExperimentConfig config_for_model(const Common& c, const std::string& model_path) {
    Common with = c;
    if (with.config.empty()) {
        const fs::path guess = sibling(model_path, "resolved_config.json");
        if (!fs::exists(guess)) {
            throw ConfigError("no --config given and '" + guess.string() + "' does not exist");
        }
        with.config = guess.string();
    }
    return resolve(with);
}

model::ForchestraModel load_model(const std::string& path) {
    try {
        return model::forchestra_from_checkpoint(read_json(path, "model checkpoint"));
    } catch (const forchestra::ParseError& e) {
        throw ConfigError("model checkpoint '" + path + "': " + e.what());
    }
}

void check_model_matches(const model::ForchestraModel& m, const data::Dataset& ds) {
    if (m.config.bp.input_dim != ds.input_dim() || m.config.bp.context_length != ds.shape.context_length ||
        m.config.bp.prediction_length != ds.shape.prediction_length || m.config.rep.window != ds.shape.representation_window) {
        throw ConfigError("model checkpoint does not match the dataset's window shape or input width");
    }
}

// ---------------------------------------------------------------- commands

struct GenFlags {
    std::string out;
    std::size_t instances = 200;
    std::size_t days = 400;
    std::size_t regimes = 4;
    double noise = 1.0;
    double non_sale_fraction = 0.1;
    std::optional<std::uint64_t> seed;
};

int cmd_gen_synthetic(const GenFlags& f, const std::vector<std::string>& args, std::ostream& out,
                      std::ostream& err) {
    if (f.regimes == 0) throw ConfigError("--regimes must be >= 1");
    if (f.instances == 0 || f.days == 0) throw ConfigError("--instances and --days must be >= 1");
    data::SyntheticSpec spec;
    spec.n_instances = f.instances;
    spec.n_days = f.days;
    spec.n_regimes = f.regimes;
    spec.noise_level = f.noise;
    spec.non_sale_fraction = f.non_sale_fraction;
    spec.seed = f.seed ? *f.seed : env_seed().value_or(0);
    const data::Dataset ds = data::generate_synthetic(spec);
    spec.regimes = data::draw_regimes(spec.n_regimes, spec.n_days, spec.seed);

    RunDir dir(f.out, err);
    ExperimentConfig cfg = default_config();
    cfg.seed = spec.seed;
    cfg.dataset.synthetic = spec;
    dir.write_json("resolved_config.json", to_json(cfg));
    data::write_m5_csv(ds, dir.path("sales.csv"), dir.path("availability.csv"));
    dir.write_json("synthetic.json", data::to_json(spec));
    dir.log("generated " + std::to_string(ds.size()) + " series of " + std::to_string(ds.length()) + " days");
    out << data::to_json(spec).dump(2) << '\n';
    dir.finish(base_manifest("gen-synthetic", args, cfg));
    return kSuccess;
}

int cmd_pretrain_bp(const Common& c, std::optional<std::size_t> members, const std::vector<std::string>& args,
                    std::ostream& err) {
    ExperimentConfig cfg = resolve(c);
    if (c.epochs) cfg.run.bp_optim.epochs = *c.epochs;
    if (members) cfg.members = *members;
    if (cfg.members == 0) throw ConfigError("--members must be >= 1");
    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    const auto windows = experiment::training_windows(p.ds, p.split);
    const auto validation = experiment::validation_set(p.ds, p.split);
    std::vector<std::uint64_t> seeds;
    for (std::size_t j = 0; j < cfg.members; ++j) seeds.push_back(experiment::pool_seed(cfg.seed, j));
    auto pool = baselines::deep_ensembles(cfg.run.model.bp, p.ds, windows, cfg.run.bp_optim, seeds, &validation,
                                          cfg.run.jobs);
    for (std::size_t j = 0; j < cfg.members; ++j) {
        const std::string suffix = j == 0 ? "" : "_" + std::to_string(j);
        dir.log_history("bp" + suffix, pool.training[j]);
        write_checkpoint(dir, "bp" + suffix + ".json", model::bp_checkpoint(pool.members[j]));
        model::write_history_csv(dir.path("loss_history" + suffix + ".csv"), pool.training[j]);
    }
    json m = base_manifest("pretrain-bp", args, cfg);
    m["training_instances"] = instance_ids(p.ds, p.split.train_instances);
    m["holdout_instances"] = instance_ids(p.ds, p.split.holdout_instances);
    dir.finish(m);
    return kSuccess;
}

int cmd_pretrain_nc(const Common& c, const std::vector<std::string>& args, std::ostream& err) {
    ExperimentConfig cfg = resolve(c);
    if (c.epochs) cfg.run.nc.optim.epochs = *c.epochs;
    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    // pretrained_representation discards the history, so run the stages here
    model::RepresentationModule rm = model::RepresentationModule::create(
        cfg.run.model.rep, nn::derive_seed(nn::derive_seed(cfg.seed, 200), 1));
    const auto result =
        ssl::pretrain_nc(rm, p.ds, p.split.train_instances, p.split.train, cfg.run.nc, nn::derive_seed(cfg.seed, 202));
    dir.log_history("nc", result.training);
    write_checkpoint(dir, "nc.json", model::rm_checkpoint(rm));
    model::write_history_csv(dir.path("loss_history.csv"), result.training);
    json m = base_manifest("pretrain-nc", args, cfg);
    m["training_instances"] = instance_ids(p.ds, p.split.train_instances);
    m["holdout_instances"] = instance_ids(p.ds, p.split.holdout_instances);
    dir.finish(m);
    return kSuccess;
}

struct TrainFlags {
    std::string init_nc;
    std::string init_bps;
    bool freeze_rep = false;
    bool freeze_bps = false;
    std::string meta_input;
    std::optional<std::size_t> K;
};

int cmd_train(const Common& c, const TrainFlags& f, const std::vector<std::string>& args, std::ostream& err) {
    ExperimentConfig cfg = resolve(c);
    if (c.epochs) cfg.run.train_optim.epochs = *c.epochs;
    if (!f.init_nc.empty()) cfg.init_nc = f.init_nc;
    if (!f.init_bps.empty()) cfg.init_bps = f.init_bps;
    if (f.freeze_rep) cfg.run.freeze_representation = true;
    if (f.freeze_bps) cfg.run.freeze_bps = true;
    if (!f.meta_input.empty()) cfg.run.model.meta_input = model::meta_input_from_string(f.meta_input);
    if (f.K) cfg.run.model.K = *f.K;
    cfg.run.pretrain_nc = !cfg.init_nc.empty();
    cfg.run.pretrain_bps = !cfg.init_bps.empty();
    cfg.run.model.validate();

    // checkpoints are checked before any output is written
    std::optional<model::RepresentationModule> rm;
    std::optional<model::BasePredictor> bp;
    if (!cfg.init_nc.empty()) {
        rm = model::rm_from_checkpoint(read_json(cfg.init_nc, "--init-nc checkpoint"));
    }
    if (!cfg.init_bps.empty()) {
        bp = model::bp_from_checkpoint(read_json(cfg.init_bps, "--init-bps checkpoint"));
    }

    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    model::ForchestraModel m =
        experiment::initial_model(cfg.run, cfg.run.model.K, bp ? &*bp : nullptr, rm ? &*rm : nullptr, cfg.seed);
    const auto result = experiment::train_model(m, p.ds, cfg.run, p.split, cfg.seed);
    dir.log_history("forchestra", result);
    write_checkpoint(dir, "model.json", model::forchestra_checkpoint(m));
    model::write_history_csv(dir.path("loss_history.csv"), result);

    json man = base_manifest("train", args, cfg);
    man["flags"] = {{"init_nc", cfg.init_nc},
                    {"init_bps", cfg.init_bps},
                    {"freeze_rep", cfg.run.freeze_representation},
                    {"freeze_bps", cfg.run.freeze_bps},
                    {"meta_input", model::to_string(cfg.run.model.meta_input)},
                    {"K", cfg.run.model.K}};
    man["parameters"] = model::count_parameters(m);
    man["training_instances"] = instance_ids(p.ds, p.split.train_instances);
    man["holdout_instances"] = instance_ids(p.ds, p.split.holdout_instances);
    dir.finish(man);
    return kSuccess;
}

int cmd_evaluate(const Common& c, const std::string& model_path, bool transfer, const std::vector<std::string>& args,
                 std::ostream& err) {
    ExperimentConfig cfg = config_for_model(c, model_path);
    model::ForchestraModel m = load_model(model_path);

    std::vector<std::size_t> training;
    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    check_model_matches(m, p.ds);
    json man = base_manifest("evaluate", args, cfg);
    man["model"] = model_path;
    eval::MetricReport report;
    std::string stem = "report";
    if (transfer) {
        stem = "transfer_report";
        const fs::path mpath = sibling(model_path, "manifest.json");
        const json train_manifest = read_json(mpath, "training manifest");
        for (const auto& id : train_manifest.value("training_instances", json::array())) {
            const auto idx = p.ds.find(id.get<std::string>());
            if (idx) training.push_back(*idx);
        }
        if (p.split.holdout_instances.empty()) dir.log("warning: the split has no hold-out instances; report is empty");
        report = model::transfer_evaluate(m, p.ds, p.split.holdout_instances, training, p.split.test, cfg.run.filters);
        man["holdout_instances"] = instance_ids(p.ds, p.split.holdout_instances);
    } else {
        report = eval::evaluate(
            eval::backtest_forecasts(p.ds, p.split.train_instances, p.split.test, model::forchestra_predictor(m)),
            p.ds, cfg.run.filters);
        man["instances"] = instance_ids(p.ds, p.split.train_instances);
    }
    report.write_csv(dir.path(stem + ".csv"));
    dir.write_json(stem + ".json", report.to_json());
    dir.log(stem + " instances " + std::to_string(report.instances.size()) + " skipped " +
            std::to_string(report.skipped.size()) +
            (report.mase.mean ? " mase " + num(*report.mase.mean) : std::string(" mase undefined")));
    dir.finish(man);
    return kSuccess;
}

struct EnsembleFlags {
    std::string pool;
    std::vector<std::string> strategies;
    std::vector<std::size_t> ks;
    std::vector<std::string> scopes;
};

std::vector<fs::path> find_pool(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("pool '" + dir + "' is not a directory");
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".json") continue;
        std::ifstream in(e.path());
        json doc = json::parse(in, nullptr, false);
        if (!doc.is_discarded() && doc.is_object() && doc.value("kind", "") == "base_predictor") {
            found.push_back(e.path());
        }
    }
    std::sort(found.begin(), found.end());
    return found;
}

int cmd_ensemble(const Common& c, const EnsembleFlags& f, const std::vector<std::string>& args, std::ostream& err) {
    ExperimentConfig cfg = resolve(c);
    const auto files = find_pool(f.pool);
    if (files.empty()) throw ConfigError("pool '" + f.pool + "' holds no base predictor checkpoints");

    std::vector<baselines::EnsembleSpec> specs = cfg.ensembles;
    if (!f.strategies.empty()) {
        specs.clear();
        std::vector<std::string> scopes = f.scopes.empty() ? std::vector<std::string>{"global"} : f.scopes;
        for (const auto& name : f.strategies) {
            const auto strategy = baselines::strategy_from_string(name);
            for (const auto& sc : scopes) {
                const auto scope = baselines::scope_from_string(sc);
                if (strategy == baselines::Strategy::top_k) {
                    if (f.ks.empty()) throw ConfigError("--strategy top_k needs --k");
                    for (std::size_t k : f.ks) specs.push_back({strategy, k, scope});
                } else {
                    specs.push_back({strategy, std::nullopt, scope});
                }
            }
        }
    } else if (!f.ks.empty() || !f.scopes.empty()) {
        throw ConfigError("--k and --scope need --strategy");
    }
    if (specs.empty()) specs = baselines::default_specs(files.size());
    cfg.ensembles = specs;

    std::vector<model::BasePredictor> pool;
    for (const auto& path : files) pool.push_back(model::bp_from_checkpoint(read_json(path, "pool checkpoint")));

    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    std::vector<eval::Forecasts> val, test;
    for (auto& bp : pool) {
        if (bp.config.input_dim != p.ds.input_dim() || bp.config.context_length != p.ds.shape.context_length ||
            bp.config.prediction_length != p.ds.shape.prediction_length) {
            throw ConfigError("pool member does not match the dataset's window shape");
        }
        val.push_back(eval::backtest_forecasts(p.ds, p.split.train_instances, p.split.validation,
                                               model::bp_predictor(bp)));
        test.push_back(eval::backtest_forecasts(p.ds, p.split.train_instances, p.split.test, model::bp_predictor(bp)));
    }
    const auto rows = baselines::run_ensembles(val, test, p.ds, specs, cfg.run.filters);
    baselines::write_ensemble_csv(dir.path("ensembles.csv"), rows);
    json table = json::array();
    for (const auto& r : rows) {
        table.push_back({{"spec", to_json(r.spec)},
                         {"label", r.spec.label()},
                         {"report", r.report.to_json()},
                         {"fallbacks", r.fallbacks},
                         {"best", r.best}});
        dir.log(r.spec.label() + (r.report.mase.mean ? " mase " + num(*r.report.mase.mean) : " mase undefined") +
                (r.best ? " (best)" : ""));
    }
    dir.write_json("ensembles.json", table);
    json man = base_manifest("ensemble", args, cfg);
    json members = json::array();
    for (const auto& path : files) members.push_back(fs::relative(path, f.pool).generic_string());
    man["pool"] = f.pool;
    man["members"] = members;
    dir.finish(man);
    return kSuccess;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            throw ConfigError("invalid K list '" + text + "'");
        }
        if (pos != item.size() || v == 0 || item.find('-') != std::string::npos) {
            throw ConfigError("invalid K list '" + text + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError("invalid K list '" + text + "'");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct AnalyzeFlags {
    std::string model;
    bool ranks = false;
    bool export_reps = false;
    std::string scaling;
};

int cmd_analyze(const Common& c, const AnalyzeFlags& f, const std::vector<std::string>& args, std::ostream& err) {
    if (!f.ranks && !f.export_reps && f.scaling.empty()) {
        throw ConfigError("analyze needs --ranks, --export-reps or --scaling");
    }
    if ((f.ranks || f.export_reps) && f.model.empty()) throw ConfigError("--ranks and --export-reps need --model");
    std::vector<std::size_t> ks;
    if (!f.scaling.empty()) ks = parse_k_list(f.scaling);

    ExperimentConfig cfg = f.model.empty() ? resolve(c) : config_for_model(c, f.model);
    if (c.epochs) cfg.run.train_optim.epochs = *c.epochs;
    std::optional<model::ForchestraModel> m;
    if (!f.model.empty()) m = load_model(f.model);

    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    json man = base_manifest("analyze", args, cfg);
    if (m) {
        check_model_matches(*m, p.ds);
        man["model"] = f.model;
    }

    if (f.ranks) {
        const auto analysis = model::rank_analysis(*m, p.ds, p.split);
        analysis.write_csv(dir.path("ranks.csv"));
        json notes = analysis.notes;
        dir.write_json("ranks.json", {{"models", analysis.models},
                                      {"instances_used", analysis.instances_used},
                                      {"instances_skipped", analysis.instances_skipped},
                                      {"validation_fallbacks", analysis.validation_fallbacks},
                                      {"persistence", 0.9},
                                      {"notes", notes}});
        for (const auto& n : analysis.notes) dir.log("ranks: " + n);
        for (const auto& r : analysis.rows) {
            dir.log("rbo " + r.comparison + "@" + std::to_string(r.depth) + " = " + num(r.rbo));
        }
    }
    if (f.export_reps) {
        std::vector<std::size_t> all(p.ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        // the last window before the test region, so no test day is seen
        const nn::Tensor reps = baselines::representations_at(m->rm, p.ds, all, p.split.test.begin - 1);
        const std::size_t D = reps.dim(1);
        std::ofstream out(dir.path("representations.csv"), std::ios::binary);
        if (!out) throw IoError("cannot write representations.csv");
        out << "id";
        for (std::size_t d = 0; d < D; ++d) out << ",r" << d;
        out << '\n' << std::setprecision(17);
        for (std::size_t i = 0; i < all.size(); ++i) {
            out << p.ds.instances[i].id;
            for (std::size_t d = 0; d < D; ++d) out << ',' << reps.at(i, d);
            out << '\n';
        }
        dir.log("exported " + std::to_string(all.size()) + " representations of width " + std::to_string(D));
    }
    if (!ks.empty()) {
        const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.seeds;
        std::ofstream out(dir.path("scaling.csv"), std::ios::binary);
        if (!out) throw IoError("cannot write scaling.csv");
        out << "K,mase";
        for (auto s : seeds) out << ",mase_seed_" << s;
        out << '\n' << std::setprecision(17);
        for (std::size_t K : ks) {
            std::vector<double> scores;
            for (auto s : seeds) scores.push_back(experiment::scaling_point(p.ds, cfg.run, K, s));
            out << K << ',' << experiment::median(scores);
            for (double v : scores) out << ',' << v;
            out << '\n';
            dir.log("scaling K=" + std::to_string(K) + " median mase " + num(experiment::median(scores)));
        }
    }
    dir.finish(man);
    return kSuccess;
}

int cmd_compare(const Common& c, const std::vector<std::string>& args, std::ostream& err) {
    ExperimentConfig cfg = resolve(c);
    RunDir dir(c.out, err);
    auto p = prepare(cfg, dir);
    const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.seeds;
    std::ofstream out(dir.path("comparison.csv"), std::ios::binary);
    if (!out) throw IoError("cannot write comparison.csv");
    out << "seed,sma,single_bp,best_top_k,best_top_k_label,forchestra,forchestra_holdout,sma_holdout\n"
        << std::setprecision(17);
    json runs = json::array();
    std::vector<double> sma, single, topk, fc;
    for (auto s : seeds) {
        const auto r = experiment::run_comparison(p.ds, cfg.run, s);
        dir.log_history("forchestra seed " + std::to_string(s), r.forchestra_training);
        out << s << ',' << r.sma << ',' << r.single_bp << ',' << r.best_top_k << ',' << r.best_top_k_label << ','
            << r.forchestra << ',';
        if (r.forchestra_holdout) out << *r.forchestra_holdout;
        out << ',';
        if (r.sma_holdout) out << *r.sma_holdout;
        out << '\n';
        runs.push_back(experiment::to_json(r));
        sma.push_back(r.sma);
        single.push_back(r.single_bp);
        topk.push_back(r.best_top_k);
        fc.push_back(r.forchestra);
        dir.log("seed " + std::to_string(s) + " forchestra " + num(r.forchestra) + " single_bp " + num(r.single_bp) +
                " best_top_k " + num(r.best_top_k) + " sma " + num(r.sma));
    }
    dir.write_json("comparison.json", {{"runs", runs},
                                       {"median",
                                        {{"sma", experiment::median(sma)},
                                         {"single_bp", experiment::median(single)},
                                         {"best_top_k", experiment::median(topk)},
                                         {"forchestra", experiment::median(fc)}}}});
    dir.finish(base_manifest("compare", args, cfg));
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Forchestra forecasting toolkit"};
    app.name("forchestra");
    app.require_subcommand(1);

    GenFlags gen;
    auto* g = app.add_subcommand("gen-synthetic", "write a synthetic dataset in M5 format");
    g->add_option("--out", gen.out, "output directory")->required();
    g->add_option("--instances", gen.instances, "number of series");
    g->add_option("--days", gen.days, "days per series");
    g->add_option("--regimes", gen.regimes, "number of regimes");
    g->add_option("--noise", gen.noise, "noise standard deviation");
    g->add_option("--non-sale-fraction", gen.non_sale_fraction, "upper bound on non-sale days per series");
    g->add_option("--seed", gen.seed, "generator seed (falls back to FORCHESTRA_SEED)");

    Common pbp, pnc, tr, ev, en, an, cmp;
    std::optional<std::size_t> members;
    auto* cpbp = app.add_subcommand("pretrain-bp", "train stand-alone base predictors");
    add_common(cpbp, pbp, true);
    cpbp->add_option("--members", members, "independently seeded predictors to train");

    auto* cpnc = app.add_subcommand("pretrain-nc", "contrastive pre-training of the representation module");
    add_common(cpnc, pnc, true);

    TrainFlags tf;
    auto* ctr = app.add_subcommand("train", "train Forchestra end to end");
    add_common(ctr, tr, true);
    ctr->add_option("--init-nc", tf.init_nc, "representation checkpoint from pretrain-nc");
    ctr->add_option("--init-bps", tf.init_bps, "base predictor checkpoint from pretrain-bp");
    ctr->add_flag("--freeze-rep", tf.freeze_rep, "keep the representation module fixed");
    ctr->add_flag("--freeze-bps", tf.freeze_bps, "keep the base predictors fixed");
    ctr->add_option("--meta-input", tf.meta_input, "last | pooled");
    ctr->add_option("--K", tf.K, "number of base predictors")->check(CLI::PositiveNumber);

    std::string eval_model;
    bool transfer = false;
    auto* cev = app.add_subcommand("evaluate", "score a trained model on the test region");
    add_common(cev, ev, false);
    cev->add_option("--model", eval_model, "model.json from train")->required();
    cev->add_flag("--transfer", transfer, "evaluate only the hold-out instances");

    EnsembleFlags ef;
    auto* cen = app.add_subcommand("ensemble", "combine a pool of trained base predictors");
    add_common(cen, en, false);
    cen->add_option("--pool", ef.pool, "directory searched for base predictor checkpoints")->required();
    cen->add_option("--strategy", ef.strategies, "average | top_k | w_inv | w_sqr | w_exp");
    cen->add_option("--k", ef.ks, "Top-K sizes")->check(CLI::PositiveNumber);
    cen->add_option("--scope", ef.scopes, "global | instance_wise");

    AnalyzeFlags af;
    auto* can = app.add_subcommand("analyze", "rank analysis, representation export and scaling over K");
    add_common(can, an, true);
    can->add_option("--model", af.model, "model.json from train");
    can->add_flag("--ranks", af.ranks, "RBO of candidate rankings against the test ranking");
    can->add_flag("--export-reps", af.export_reps, "write instance representations");
    can->add_option("--scaling", af.scaling, "comma-separated K values to train and evaluate");

    auto* ccmp = app.add_subcommand("compare", "Forchestra against SMA, a single BP and Top-K ensembles");
    add_common(ccmp, cmp, false);

    std::vector<const char*> argv{"forchestra"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (g->parsed()) return cmd_gen_synthetic(gen, args, out, err);
        if (cpbp->parsed()) return cmd_pretrain_bp(pbp, members, args, err);
        if (cpnc->parsed()) return cmd_pretrain_nc(pnc, args, err);
        if (ctr->parsed()) return cmd_train(tr, tf, args, err);
        if (cev->parsed()) return cmd_evaluate(ev, eval_model, transfer, args, err);
        if (cen->parsed()) return cmd_ensemble(en, ef, args, err);
        if (can->parsed()) return cmd_analyze(an, af, args, err);
        if (ccmp->parsed()) return cmd_compare(cmp, args, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsageError;
    } catch (const TrainingError& e) {
        err << "training error: " << e.what() << '\n';
        return kRuntimeError;
    } catch (const LeakError& e) {
        err << "leak error: " << e.what() << '\n';
        return kRuntimeError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace forchestra::cli
