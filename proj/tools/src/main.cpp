#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "runner.hpp"

#ifndef SIVSIM_FIXTURE_DIR
#define SIVSIM_FIXTURE_DIR "fixtures"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const std::string& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sivsim: SiV quantum network node simulator"};
    app.require_subcommand(1);

    std::string config;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out = "out";

    CLI::App* run = app.add_subcommand("run", "Run the experiment named in a config file");
    run->add_option("--config", config, "JSON config")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the config seed");
    CLI::Option* workers_opt = run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Output directory");

    CLI::App* list = app.add_subcommand("list", "List experiments, required blocks and fixture paths");

    CLI::App* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
    validate->add_option("--config", config, "JSON config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*list) {
            const std::filesystem::path dir = SIVSIM_FIXTURE_DIR;
            for (const sivsim::Experiment& e : sivsim::catalog()) {
                std::cout << e.name << "\t" << e.description << "\tblocks=" << join(e.blocks)
                          << "\tfixture=" << (dir / (e.name + ".json")).string() << "\n";
            }
            return kExitOk;
        }
        sivsim::RunOptions opt;
        if (*seed_opt) opt.seed = seed;
        if (*workers_opt) opt.workers = workers;
        opt.out_dir = out;
        const std::string bytes = sivsim::read_file(config);
        if (*validate) {
            const sivsim::PreparedRun p = sivsim::prepare_config(bytes, opt);
            std::cout << "ok: " << p.experiment->name << " (seed " << p.seed << ")\n";
            return kExitOk;
        }
        const sivsim::json manifest = sivsim::run_config(bytes, opt);
        std::cout << manifest.dump(2) << "\n";
        return kExitOk;
    } catch (const sivsim::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
