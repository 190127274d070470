// dkd: dynamic knowledge distillation experiments against a black-box source.
//
// Subcommands:
//   gen-data      write the source/target domain CSVs and a manifest
//   train-source  train the source classifier and checkpoint it
//   serve         expose a checkpoint over the line protocol
//   run           four-method comparison (SH / TD / skdHTL / dkdHTL)
//   grid          dkdHTL hyperparameter sweep
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 source transport error,
// 5 numerical failure.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "dkd/experiment.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string source;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
    auto* c = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    if (needs_config) c->required();
    cmd->add_option("--out", args.out_dir, "output directory (default: config, then $DKD_OUT_DIR)");
    cmd->add_option("--jobs", args.jobs, "parallel workers for seeds/grid cells")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args.seed, "run a single seed instead of the config list")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--source", args.source,
                    "source hypothesis: inproc | file:PATH | tcp:HOST:PORT");
}

dkd::RunOptions to_options(const CommonArgs& args) {
    dkd::RunOptions opts;
    if (args.seed_set) opts.seed = args.seed;
    opts.jobs = args.jobs;
    opts.out_dir = args.out_dir;
    opts.source_override = args.source;
    return opts;
}

int dispatch(const std::string& command, const CommonArgs& args, const std::string& checkpoint,
             const std::string& bind) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (command == "serve") {
        auto server = dkd::start_server(checkpoint, bind);
        std::printf("serving %s on %s:%d (SIGINT/SIGTERM to stop)\n", checkpoint.c_str(),
                    server->host().c_str(), server->port());
        std::fflush(stdout);
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server->stop();
        std::printf("served %zu requests\n", server->requests_served());
        return 0;
    }

    std::ifstream is(args.config_path);
    if (!is) throw dkd::ConfigError("config: cannot open " + args.config_path);
    nlohmann::json config_echo = nlohmann::json::parse(is, nullptr, false);
    if (config_echo.is_discarded())
        throw dkd::ConfigError("config: " + args.config_path + " is not valid JSON");
    const dkd::ExperimentConfig cfg = dkd::parse_experiment_config(config_echo);
    const dkd::RunOptions opts = to_options(args);
    const auto out = dkd::resolve_out_dir(cfg, opts);

    if (command == "gen-data") {
        dkd::cmd_gen_data(cfg, opts, config_echo);
        std::printf("wrote dataset files to %s (%.2fs)\n", out.c_str(), elapsed());
        return 0;
    }
    if (command == "train-source") {
        std::string summary;
        dkd::cmd_train_source(cfg, opts, config_echo, &summary);
        std::printf("%s\ncheckpoint: %s (%.2fs)\n", summary.c_str(),
                    (out / "source_model.dkdnet").c_str(), elapsed());
        return 0;
    }
    if (command == "run") {
        std::string table;
        dkd::cmd_run(cfg, opts, config_echo, &table);
        std::printf("%s\nreport: %s (%.2fs)\n", table.c_str(), (out / "report.json").c_str(),
                    elapsed());
        return 0;
    }
    if (command == "grid") {
        std::string table;
        dkd::cmd_grid(cfg, opts, config_echo, &table);
        std::printf("%s\ngrid: %s (%.2fs)\n", table.c_str(), (out / "grid.json").c_str(),
                    elapsed());
        return 0;
    }
    throw dkd::ConfigError("unknown command " + command);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic knowledge distillation for black-box hypothesis transfer"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, run_args, grid_args;
    std::string checkpoint, bind = "127.0.0.1:7513";

    add_common(app.add_subcommand("gen-data", "generate domain CSVs"), gen_args);
    add_common(app.add_subcommand("train-source", "train and checkpoint the source model"),
               train_args);
    auto* serve = app.add_subcommand("serve", "serve a checkpoint over TCP");
    serve->add_option("--checkpoint", checkpoint, "network checkpoint path")->required();
    serve->add_option("--bind", bind, "bind address HOST:PORT");
    add_common(app.add_subcommand("run", "run the method comparison"), run_args);
    add_common(app.add_subcommand("grid", "run the hyperparameter grid"), grid_args);

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    const CommonArgs& args = command == "gen-data"       ? gen_args
                             : command == "train-source" ? train_args
                             : command == "grid"         ? grid_args
                                                         : run_args;
    try {
        return dispatch(command, args, checkpoint, bind);
    } catch (const dkd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const dkd::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const dkd::TransportError& e) {
        std::cerr << "transport error (" << e.endpoint() << ", " << e.attempts()
                  << " attempts): " << e.what() << "\n";
        return 4;
    } catch (const dkd::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 4;
    } catch (const dkd::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
