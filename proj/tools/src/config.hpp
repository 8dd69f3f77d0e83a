#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sivsim {

using json = nlohmann::json;

// Bad user input; maps to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Typed view of one JSON object. Every accessor records the key so that
// finish() can reject unknown fields; messages carry the dotted path.
class Block {
public:
    Block(const json& j, std::string path);

    const std::string& path() const { return path_; }
    bool has(const std::string& key) const;

    double number(const std::string& key, std::optional<double> fallback = std::nullopt);
    double positive(const std::string& key, std::optional<double> fallback = std::nullopt);
    double non_negative(const std::string& key, std::optional<double> fallback = std::nullopt);
    double probability(const std::string& key, std::optional<double> fallback = std::nullopt);
    int integer(const std::string& key, std::optional<int> fallback = std::nullopt);
    std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt);
    bool flag(const std::string& key, std::optional<bool> fallback = std::nullopt);
    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt);
    std::vector<std::string> texts(const std::string& key,
                                   std::optional<std::vector<std::string>> fallback = std::nullopt);
    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt);
    std::vector<int> integers(const std::string& key, std::optional<std::vector<int>> fallback = std::nullopt);

    Block child(const std::string& key);
    std::vector<Block> children(const std::string& key);
    std::optional<Block> optional_child(const std::string& key);

    // Grid spec: either an explicit list or {"start", "stop", "count"} with an
    // optional "spacing": "linear" | "log".
    std::vector<double> grid(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt);

    void finish() const;

    [[noreturn]] void fail(const std::string& key, const std::string& why) const;

private:
    const json* find(const std::string& key);

    const json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Runs a module validate() and rewrites std::invalid_argument into a
// ValidationError prefixed with the block path.
template <typename F>
void checked(const std::string& path, F&& f) {
    try {
        f();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

}  // namespace sivsim
