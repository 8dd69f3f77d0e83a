#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace sivsim {

// Owns the output directory of one run. Every file written through it is
// recorded for the manifest and removed again if the run fails.
class RunContext {
public:
    RunContext(std::filesystem::path out_dir, std::uint64_t seed, int workers);

    std::uint64_t seed() const { return seed_; }
    int workers() const { return workers_; }
    const std::vector<std::string>& artifacts() const { return artifacts_; }
    const std::filesystem::path& out_dir() const { return out_dir_; }

    void write_csv(const std::string& name, const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows);
    void write_json(const std::string& name, const json& j);
    void remove_artifacts();

private:
    std::filesystem::path claim(const std::string& name);

    std::filesystem::path out_dir_;
    std::uint64_t seed_;
    int workers_;
    std::vector<std::string> artifacts_;
};

// Parsed and validated experiment, ready to run. Returns the report.
using Runner = std::function<json(RunContext&)>;

struct Experiment {
    std::string name;
    std::string description;
    std::vector<std::string> blocks;
    std::function<Runner(Block& root)> prepare;
};

const std::vector<Experiment>& catalog();
const Experiment& find_experiment(const std::string& name);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::filesystem::path out_dir = "out";
};

// Config bytes -> validated runner. Throws ValidationError.
struct PreparedRun {
    const Experiment* experiment = nullptr;
    std::uint64_t seed = 1;
    Runner runner;
};
PreparedRun prepare_config(const std::string& config_bytes, const RunOptions& opt = {});

// Runs and returns the manifest (also written as manifest.json, last).
json run_config(const std::string& config_bytes, const RunOptions& opt);

std::string read_file(const std::filesystem::path& p);
std::string sha256_hex(const std::string& bytes);
std::string code_version();

// Numbers as written into CSV cells.
std::string format_number(double x);

}  // namespace sivsim
