#include "runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#ifndef SIVNODE_VERSION
#define SIVNODE_VERSION "unknown"
#endif

namespace sivsim {

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

RunContext::RunContext(std::filesystem::path out_dir, std::uint64_t seed, int workers)
    : out_dir_(std::move(out_dir)), seed_(seed), workers_(workers) {
    std::filesystem::create_directories(out_dir_);
}

std::filesystem::path RunContext::claim(const std::string& name) {
    artifacts_.push_back(name);
    return out_dir_ / name;
}

void RunContext::write_csv(const std::string& name, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
    std::ofstream f(claim(name), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_dir_ / name).string());
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw std::logic_error(name + ": row width differs from header");
        for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_number(row[i]);
        f << '\n';
    }
}

void RunContext::write_json(const std::string& name, const json& j) {
    std::ofstream f(claim(name), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_dir_ / name).string());
    f << j.dump(2) << '\n';
}

void RunContext::remove_artifacts() {
    for (const std::string& a : artifacts_) {
        std::error_code ec;
        std::filesystem::remove(out_dir_ / a, ec);
    }
    artifacts_.clear();
}

const Experiment& find_experiment(const std::string& name) {
    for (const Experiment& e : catalog())
        if (e.name == name) return e;
    throw ValidationError("experiment: unknown name '" + name + "' (see `sivsim list`)");
}

PreparedRun prepare_config(const std::string& config_bytes, const RunOptions& opt) {
    json j;
    try {
        j = json::parse(config_bytes);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    Block root(j, "");
    if (!root.has("experiment")) throw ValidationError("config: missing required field 'experiment'");
    PreparedRun run;
    run.experiment = &find_experiment(root.text("experiment"));
    root.text("description", "");
    run.seed = root.count("seed", 1);
    if (opt.seed) run.seed = *opt.seed;
    for (const std::string& b : run.experiment->blocks)
        if (!root.has(b)) throw ValidationError("config: missing block '" + b + "' required by " + run.experiment->name);
    run.runner = run.experiment->prepare(root);
    root.finish();
    if (opt.workers && *opt.workers < 1) throw ValidationError("workers: must be >= 1");
    return run;
}

json run_config(const std::string& config_bytes, const RunOptions& opt) {
    const PreparedRun run = prepare_config(config_bytes, opt);
    json manifest;
    manifest["experiment"] = run.experiment->name;
    manifest["config_sha256"] = sha256_hex(config_bytes);
    manifest["code_version"] = code_version();
    manifest["seed"] = run.seed;
    manifest["started_utc"] = utc_now();

    RunContext ctx(opt.out_dir, run.seed, opt.workers.value_or(1));
    try {
        json report = run.runner(ctx);
        ctx.write_json("report.json", report);
    } catch (...) {
        ctx.remove_artifacts();
        throw;
    }
    manifest["finished_utc"] = utc_now();
    manifest["artifacts"] = ctx.artifacts();
    std::ofstream f(opt.out_dir / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
    return manifest;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ValidationError("config: cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string code_version() { return SIVNODE_VERSION; }

}  // namespace sivsim
