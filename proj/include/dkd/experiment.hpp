#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dkd/client.hpp"
#include "dkd/data.hpp"
#include "dkd/errors.hpp"
#include "dkd/hypothesis.hpp"
#include "dkd/report.hpp"
#include "dkd/server.hpp"
#include "dkd/trainer.hpp"

namespace dkd {

// ---------------------------------------------------------------------------
// Experiment configuration (JSON file; schema documented in the README).
// Unknown keys anywhere are rejected so typos fail before any work starts.
// ---------------------------------------------------------------------------

struct GeneratorSpec {
    int n_per_class = 300;
    int classes = 5;
    int dim = 10;
    double spread = 1.0;
    std::uint64_t seed = 7;
};

struct CsvSpec {
    std::string dir;                  // directory with the six canonical split files
    std::string label_column = "label";
    int classes = 0;
};

struct IdxSpec {
    std::string images, labels;
};

struct DataSection {
    std::optional<GeneratorSpec> generator;
    std::optional<CsvSpec> csv;
    std::optional<IdxSpec> idx;
    ShiftSpec shift;
    bool has_shift = false;
    SplitFractions splits;
    bool standardize = false;
};

struct ModelSection {
    std::vector<int> hidden = {64};
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;
};

struct SourceSection {
    ModelSection model;
    std::uint64_t seed = 1;
    std::string checkpoint; // load instead of training when set
    std::string address;    // "host:port" for a remote black box
};

struct MethodParams {
    double lambda = 0.5;
    double delta = 0.0;
    double temperature = 2.0;
};

struct GridSection {
    std::vector<double> lambda, delta, temperature;
};

struct ExperimentConfig {
    DataSection data;
    SourceSection source;
    ModelSection target;
    std::vector<Method> methods = {Method::SH, Method::TD, Method::skdHTL, Method::dkdHTL};
    MethodParams skdhtl{0.5, 0.0, 2.0};
    MethodParams dkdhtl{0.1, 0.9, 2.0};
    GridSection grid;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string output;
};

namespace cfgdetail {

inline void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                       const std::string& context) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a) known = true;
        if (!known) throw ConfigError("config: unknown key '" + key + "' in " + context);
    }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback, const std::string& context) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for '" + std::string(key) + "' in " + context);
    }
}

inline ModelSection parse_model(const nlohmann::json& j, const std::string& context) {
    check_keys(j, {"hidden", "learning_rate", "batch_size", "max_epochs", "patience", "seed",
                   "checkpoint", "address"},
               context);
    ModelSection m;
    m.hidden = get_or<std::vector<int>>(j, "hidden", m.hidden, context);
    m.learning_rate = get_or<double>(j, "learning_rate", m.learning_rate, context);
    m.batch_size = get_or<int>(j, "batch_size", m.batch_size, context);
    m.max_epochs = get_or<int>(j, "max_epochs", m.max_epochs, context);
    m.patience = get_or<int>(j, "patience", m.patience, context);
    for (int h : m.hidden)
        if (h <= 0) throw ConfigError("config: non-positive hidden size in " + context);
    if (m.learning_rate <= 0) throw ConfigError("config: learning_rate must be positive");
    return m;
}

inline MethodParams parse_method_params(const nlohmann::json& j, MethodParams defaults,
                                        const std::string& context) {
    check_keys(j, {"lambda", "delta", "temperature"}, context);
    MethodParams p = defaults;
    p.lambda = get_or<double>(j, "lambda", p.lambda, context);
    p.delta = get_or<double>(j, "delta", p.delta, context);
    p.temperature = get_or<double>(j, "temperature", p.temperature, context);
    return p;
}

} // namespace cfgdetail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& root) {
    using namespace cfgdetail;
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root,
               {"data", "source", "target", "methods", "skdhtl", "dkdhtl", "grid", "seeds",
                "output"},
               "top level");
    ExperimentConfig cfg;

    if (!root.contains("data")) throw ConfigError("config: missing 'data' section");
    const auto& jd = root.at("data");
    check_keys(jd, {"generator", "csv", "idx", "shift", "splits", "standardize"}, "data");
    int sources = 0;
    if (jd.contains("generator")) {
        const auto& jg = jd.at("generator");
        check_keys(jg, {"n_per_class", "classes", "dim", "spread", "seed"}, "data.generator");
        GeneratorSpec g;
        g.n_per_class = get_or<int>(jg, "n_per_class", g.n_per_class, "data.generator");
        g.classes = get_or<int>(jg, "classes", g.classes, "data.generator");
        g.dim = get_or<int>(jg, "dim", g.dim, "data.generator");
        g.spread = get_or<double>(jg, "spread", g.spread, "data.generator");
        g.seed = get_or<std::uint64_t>(jg, "seed", g.seed, "data.generator");
        cfg.data.generator = g;
        ++sources;
    }
    if (jd.contains("csv")) {
        const auto& jc = jd.at("csv");
        check_keys(jc, {"dir", "label_column", "classes"}, "data.csv");
        CsvSpec c;
        c.dir = get_or<std::string>(jc, "dir", "", "data.csv");
        c.label_column = get_or<std::string>(jc, "label_column", c.label_column, "data.csv");
        c.classes = get_or<int>(jc, "classes", 0, "data.csv");
        if (c.dir.empty() || c.classes < 2)
            throw ConfigError("config: data.csv needs 'dir' and 'classes' >= 2");
        cfg.data.csv = c;
        ++sources;
    }
    if (jd.contains("idx")) {
        const auto& ji = jd.at("idx");
        check_keys(ji, {"images", "labels"}, "data.idx");
        IdxSpec i;
        i.images = get_or<std::string>(ji, "images", "", "data.idx");
        i.labels = get_or<std::string>(ji, "labels", "", "data.idx");
        if (i.images.empty() || i.labels.empty())
            throw ConfigError("config: data.idx needs 'images' and 'labels'");
        cfg.data.idx = i;
        ++sources;
    }
    if (sources != 1)
        throw ConfigError("config: data needs exactly one of generator, csv, idx");

    if (jd.contains("shift")) {
        const auto& js = jd.at("shift");
        check_keys(js, {"omit", "target_fraction", "seed", "stratified"}, "data.shift");
        cfg.data.shift.omitted_classes =
            get_or<std::vector<int>>(js, "omit", {}, "data.shift");
        cfg.data.shift.target_fraction =
            get_or<double>(js, "target_fraction", 1.0, "data.shift");
        cfg.data.shift.seed = get_or<std::uint64_t>(js, "seed", 0, "data.shift");
        cfg.data.shift.stratified = get_or<bool>(js, "stratified", false, "data.shift");
        cfg.data.has_shift = true;
    }
    if (cfg.data.csv && cfg.data.has_shift)
        throw ConfigError("config: csv data is already split into domains; shift does not apply");
    if (!cfg.data.csv && !cfg.data.has_shift)
        throw ConfigError("config: generator/idx data needs a 'shift' section");

    if (jd.contains("splits")) {
        const auto& js = jd.at("splits");
        check_keys(js, {"train", "val", "test"}, "data.splits");
        cfg.data.splits.train = get_or<double>(js, "train", 0.8, "data.splits");
        cfg.data.splits.val = get_or<double>(js, "val", 0.1, "data.splits");
        cfg.data.splits.test = get_or<double>(js, "test", 0.1, "data.splits");
    }
    cfg.data.standardize = get_or<bool>(jd, "standardize", false, "data");

    if (root.contains("source")) {
        const auto& js = root.at("source");
        cfg.source.model = cfgdetail::parse_model(js, "source");
        cfg.source.seed = get_or<std::uint64_t>(js, "seed", cfg.source.seed, "source");
        cfg.source.checkpoint = get_or<std::string>(js, "checkpoint", "", "source");
        cfg.source.address = get_or<std::string>(js, "address", "", "source");
    }
    if (root.contains("target")) cfg.target = cfgdetail::parse_model(root.at("target"), "target");

    if (root.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : root.at("methods"))
            cfg.methods.push_back(method_from_string(m.get<std::string>()));
        if (cfg.methods.empty()) throw ConfigError("config: methods list is empty");
    }

    if (root.contains("skdhtl"))
        cfg.skdhtl = parse_method_params(root.at("skdhtl"), cfg.skdhtl, "skdhtl");
    if (root.contains("dkdhtl"))
        cfg.dkdhtl = parse_method_params(root.at("dkdhtl"), cfg.dkdhtl, "dkdhtl");
    if (cfg.skdhtl.delta != 0.0)
        throw ConfigError("config: skdhtl.delta must be 0 (that is what makes it static)");

    if (root.contains("grid")) {
        const auto& jg = root.at("grid");
        check_keys(jg, {"lambda", "delta", "temperature"}, "grid");
        cfg.grid.lambda = get_or<std::vector<double>>(jg, "lambda", {}, "grid");
        cfg.grid.delta = get_or<std::vector<double>>(jg, "delta", {}, "grid");
        cfg.grid.temperature = get_or<std::vector<double>>(jg, "temperature", {}, "grid");
    }

    if (root.contains("seeds")) {
        cfg.seeds = root.at("seeds").get<std::vector<std::uint64_t>>();
        if (cfg.seeds.empty()) throw ConfigError("config: seeds list is empty");
    }
    cfg.output = cfgdetail::get_or<std::string>(root, "output", "", "top level");

    // fail fast on bad distillation settings
    try {
        DistillConfig{cfg.skdhtl.lambda, cfg.skdhtl.delta, cfg.skdhtl.temperature, 1e-12}
            .validate();
        DistillConfig{cfg.dkdhtl.lambda, cfg.dkdhtl.delta, cfg.dkdhtl.temperature, 1e-12}
            .validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: " + path + " is not valid JSON");
    return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Command plumbing shared by the CLI
// ---------------------------------------------------------------------------

struct RunOptions {
    std::optional<std::uint64_t> seed; // replaces the config seed list
    int jobs = 1;
    std::string out_dir;          // overrides config output
    std::string source_override;  // inproc | file:PATH | tcp:HOST:PORT
};

/// Output directory resolution: --out flag, then config "output", then
/// $DKD_OUT_DIR, then ./dkd-out.
inline std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg,
                                             const RunOptions& opts) {
    if (!opts.out_dir.empty()) return opts.out_dir;
    if (!cfg.output.empty()) return cfg.output;
    if (const char* env = std::getenv("DKD_OUT_DIR")) return env;
    return "dkd-out";
}

inline std::vector<std::uint64_t> resolve_seeds(const ExperimentConfig& cfg,
                                                const RunOptions& opts) {
    if (opts.seed) return {*opts.seed};
    return cfg.seeds;
}

inline DomainSplits prepare_data(const DataSection& data) {
    DomainSplits domains;
    if (data.csv) {
        const std::filesystem::path dir = data.csv->dir;
        auto load = [&](const char* name, Split split) {
            Dataset d = load_csv((dir / (std::string(name) + ".csv")).string(),
                                 data.csv->label_column,
                                 static_cast<std::size_t>(data.csv->classes));
            d.split = split;
            return d;
        };
        domains.source = {load("source_train", Split::train), load("source_val", Split::val),
                          load("source_test", Split::test)};
        domains.target = {load("target_train", Split::train), load("target_val", Split::val),
                          load("target_test", Split::test)};
    } else {
        Dataset pool;
        if (data.generator) {
            const auto& g = *data.generator;
            pool = make_blobs(g.n_per_class, g.classes, g.dim, g.spread, g.seed);
        } else {
            pool = load_idx(data.idx->images, data.idx->labels);
        }
        domains = apply_shift(pool, data.shift, data.splits);
    }
    if (data.standardize) {
        const Standardizer s = Standardizer::fit(domains.source.train);
        for (Dataset* d : {&domains.source.train, &domains.source.val, &domains.source.test,
                           &domains.target.train, &domains.target.val, &domains.target.test})
            s.apply(*d);
    }
    return domains;
}

inline TrainConfig source_train_config(const SourceSection& s) {
    TrainConfig cfg;
    cfg.method = Method::TD;
    cfg.distill = DistillConfig{1.0, 0.0, 2.0, 1e-12};
    cfg.batch_size = s.model.batch_size;
    cfg.max_epochs = s.model.max_epochs;
    cfg.patience = s.model.patience;
    cfg.seed = s.seed;
    cfg.adam.learning_rate = s.model.learning_rate;
    return cfg;
}

/// Trains the source classifier on the source domain (pure standard loss).
inline TrainResult train_source_model(const ExperimentConfig& cfg, const DomainSplits& domains) {
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(domains.source.train.dim()));
    for (int h : cfg.source.model.hidden) sizes.push_back(h);
    sizes.push_back(static_cast<int>(domains.source.train.classes()));
    TargetNetwork net = init_network(sizes, mix_seed(cfg.source.seed, 0x50F7));
    return train(std::move(net), nullptr, domains.source, source_train_config(cfg.source));
}

/// The black box the protocol talks to, resolved from the --source override
/// or the config: tcp -> remote client, file -> checkpoint, otherwise train
/// in process. Everything is wrapped in a prediction cache.
struct SourceHandle {
    std::unique_ptr<SourceHypothesis> backend;
    std::unique_ptr<CachedHypothesis> cached;
    std::string description;

    const SourceHypothesis& get() const { return *cached; }
};

inline SourceHandle prepare_source(const ExperimentConfig& cfg, const RunOptions& opts,
                                   const DomainSplits& domains) {
    SourceHandle handle;
    std::string mode = opts.source_override;
    if (mode.empty()) {
        if (!cfg.source.address.empty())
            mode = "tcp:" + cfg.source.address;
        else if (!cfg.source.checkpoint.empty())
            mode = "file:" + cfg.source.checkpoint;
        else
            mode = "inproc";
    }
    if (mode == "inproc") {
        handle.backend =
            std::make_unique<InProcessHypothesis>(train_source_model(cfg, domains).net);
        handle.description = "inproc";
    } else if (mode.rfind("file:", 0) == 0) {
        handle.backend =
            std::make_unique<InProcessHypothesis>(load_network(mode.substr(5)));
        handle.description = mode;
    } else if (mode.rfind("tcp:", 0) == 0) {
        const std::string addr = mode.substr(4);
        const auto colon = addr.rfind(':');
        if (colon == std::string::npos)
            throw ConfigError("source address must be HOST:PORT, got " + addr);
        handle.backend = std::make_unique<RemoteHypothesis>(addr.substr(0, colon),
                                                            std::stoi(addr.substr(colon + 1)));
        handle.description = mode;
    } else {
        throw ConfigError("unknown --source value: " + mode +
                          " (expected inproc, file:PATH or tcp:HOST:PORT)");
    }
    handle.cached =
        std::make_unique<CachedHypothesis>(handle.backend.get(), nullptr);
    return handle;
}

inline ProtocolConfig protocol_config(const ExperimentConfig& cfg) {
    ProtocolConfig pc;
    pc.hidden = cfg.target.hidden;
    pc.methods = cfg.methods;
    pc.batch_size = cfg.target.batch_size;
    pc.max_epochs = cfg.target.max_epochs;
    pc.patience = cfg.target.patience;
    pc.adam.learning_rate = cfg.target.learning_rate;
    pc.skd_params = DistillConfig{cfg.skdhtl.lambda, 0.0, cfg.skdhtl.temperature, 1e-12};
    pc.dkd_params =
        DistillConfig{cfg.dkdhtl.lambda, cfg.dkdhtl.delta, cfg.dkdhtl.temperature, 1e-12};
    return pc;
}

namespace cfgdetail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw DataError("write failed for " + path.string());
}

inline nlohmann::json split_summary(const Dataset& d) {
    return {{"n", d.n()}, {"class_counts", d.class_counts()}};
}

inline nlohmann::json domain_summary(const SplitSet& s) {
    return {{"train", split_summary(s.train)},
            {"val", split_summary(s.val)},
            {"test", split_summary(s.test)}};
}

} // namespace cfgdetail

/// Generates the dataset files: six CSVs plus a manifest describing the
/// shift. Deterministic: identical config produces identical bytes.
inline int cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opts,
                        const nlohmann::json& config_echo) {
    const auto out = resolve_out_dir(cfg, opts);
    std::filesystem::create_directories(out);
    const DomainSplits domains = prepare_data(cfg.data);

    save_csv(domains.source.train, (out / "source_train.csv").string());
    save_csv(domains.source.val, (out / "source_val.csv").string());
    save_csv(domains.source.test, (out / "source_test.csv").string());
    save_csv(domains.target.train, (out / "target_train.csv").string());
    save_csv(domains.target.val, (out / "target_val.csv").string());
    save_csv(domains.target.test, (out / "target_test.csv").string());

    nlohmann::json manifest{
        {"schema", "dkd-data-manifest/1"},
        {"config", config_echo},
        {"omitted_classes", cfg.data.shift.omitted_classes},
        {"target_fraction", cfg.data.shift.target_fraction},
        {"source", cfgdetail::domain_summary(domains.source)},
        {"target", cfgdetail::domain_summary(domains.target)},
        {"files",
         {"source_train.csv", "source_val.csv", "source_test.csv", "target_train.csv",
          "target_val.csv", "target_test.csv"}}};
    cfgdetail::write_text(out / "manifest.json", manifest.dump(2) + "\n");
    return 0;
}

/// Trains and checkpoints the source model; reports its accuracy on the
/// source test split and, as a preview of the SH row, on the target test
/// split.
inline int cmd_train_source(const ExperimentConfig& cfg, const RunOptions& opts,
                            const nlohmann::json& config_echo, std::string* summary_out = nullptr) {
    const auto out = resolve_out_dir(cfg, opts);
    std::filesystem::create_directories(out);
    const DomainSplits domains = prepare_data(cfg.data);
    TrainResult result = train_source_model(cfg, domains);

    const auto ckpt = out / "source_model.dkdnet";
    save_network(result.net, ckpt.string());

    InProcessHypothesis h(result.net);
    const EvalResult on_target =
        evaluate(h.predict_batch(domains.target.test.features), domains.target.test.labels);

    nlohmann::json report{{"schema", "dkd-source-report/1"},
                          {"config", config_echo},
                          {"checkpoint", "source_model.dkdnet"},
                          {"source_test", to_json(result.report.test_metrics)},
                          {"source_val", to_json(result.report.val_metrics)},
                          {"target_test", to_json(on_target)}};
    cfgdetail::write_text(out / "source_report.json", report.dump(2) + "\n");

    if (summary_out) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "source test acc %.2f%%, target test acc (SH preview) %.2f%%",
                      100.0 * result.report.test_metrics.accuracy, 100.0 * on_target.accuracy);
        *summary_out = buf;
    }
    return 0;
}

/// Full four-method comparison across seeds. Seeds fan out to workers; the
/// report is assembled in seed order so the output does not depend on
/// scheduling.
inline int cmd_run(const ExperimentConfig& cfg, const RunOptions& opts,
                   const nlohmann::json& config_echo, std::string* table_out = nullptr) {
    const auto out = resolve_out_dir(cfg, opts);
    std::filesystem::create_directories(out);
    const DomainSplits domains = prepare_data(cfg.data);
    const SourceHandle source = prepare_source(cfg, opts, domains);
    const ProtocolConfig pc = protocol_config(cfg);
    const auto seeds = resolve_seeds(cfg, opts);

    std::vector<std::vector<MethodRun>> runs(seeds.size());
    parallel_tasks(seeds.size(), opts.jobs, [&](std::size_t i) {
        runs[i] = run_protocol(source.get(), domains.target, pc, seeds[i]);
    });

    const ProtocolOutcome outcome = aggregate_protocol(seeds, runs);
    nlohmann::json report = to_json(outcome);
    report["config"] = config_echo;
    report["source"] = source.description;
    cfgdetail::write_text(out / "report.json", report.dump(2) + "\n");

    const std::string table = render_protocol_table(outcome);
    cfgdetail::write_text(out / "report.txt", table);

    nlohmann::json manifest{{"schema", "dkd-run-manifest/1"},
                            {"config", config_echo},
                            {"source", source.description},
                            {"seeds", seeds},
                            {"target", cfgdetail::domain_summary(domains.target)},
                            {"files", {"report.json", "report.txt"}}};
    cfgdetail::write_text(out / "manifest.json", manifest.dump(2) + "\n");

    if (table_out) *table_out = table;
    return 0;
}

/// Hyperparameter sweep rendered as a lambda/delta-by-temperature table with
/// marginal averages. Completed cells are flushed
/// incrementally to grid.partial.json (rewritten in cell order each time) so
/// long sweeps leave usable state behind; the partial file is removed once
/// grid.json is final.
inline int cmd_grid(const ExperimentConfig& cfg, const RunOptions& opts,
                    const nlohmann::json& config_echo, std::string* table_out = nullptr) {
    if (cfg.grid.lambda.empty() || cfg.grid.delta.empty() || cfg.grid.temperature.empty())
        throw ConfigError("config: grid section needs lambda, delta and temperature lists");
    const auto out = resolve_out_dir(cfg, opts);
    std::filesystem::create_directories(out);
    const DomainSplits domains = prepare_data(cfg.data);
    const SourceHandle source = prepare_source(cfg, opts, domains);
    const ProtocolConfig pc = protocol_config(cfg);
    const auto seeds = resolve_seeds(cfg, opts);

    const auto partial_path = out / "grid.partial.json";
    std::vector<GridCell> finished; // serialized by the grid_search callback lock
    GridResult grid = grid_search(
        source.get(), domains.target, pc, cfg.grid.lambda, cfg.grid.delta, cfg.grid.temperature,
        seeds, opts.jobs, [&](const GridCell& cell) {
            finished.push_back(cell);
            std::sort(finished.begin(), finished.end(), [](const GridCell& a, const GridCell& b) {
                return std::tie(a.lambda, a.delta, a.temperature) <
                       std::tie(b.lambda, b.delta, b.temperature);
            });
            nlohmann::json cells = nlohmann::json::array();
            for (const auto& c : finished)
                cells.push_back({{"lambda", c.lambda},
                                 {"delta", c.delta},
                                 {"temperature", c.temperature},
                                 {"seed_test_accuracy", c.seed_test_accuracy},
                                 {"mean_test_accuracy", c.mean_test_accuracy}});
            nlohmann::json snapshot{{"schema", "dkd-grid-partial/1"}, {"cells", cells}};
            cfgdetail::write_text(partial_path, snapshot.dump(2) + "\n");
        });

    nlohmann::json report = to_json(grid);
    report["config"] = config_echo;
    cfgdetail::write_text(out / "grid.json", report.dump(2) + "\n");
    const std::string table = render_grid_table(grid);
    cfgdetail::write_text(out / "grid.txt", table);
    std::filesystem::remove(partial_path);

    if (table_out) *table_out = table;
    return 0;
}

/// Serves a checkpoint over the wire protocol until stop() (the CLI wires
/// this to SIGINT/SIGTERM).
inline std::unique_ptr<PredictionServer> start_server(const std::string& checkpoint,
                                                      const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos)
        throw ConfigError("serve: bind address must be HOST:PORT, got " + bind);
    auto server = std::make_unique<PredictionServer>(load_network(checkpoint),
                                                     bind.substr(0, colon),
                                                     std::stoi(bind.substr(colon + 1)));
    server->start();
    return server;
}

} // namespace dkd
