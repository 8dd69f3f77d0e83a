#include "config.hpp"

#include <cmath>

#include "sivnode/cavity_qed.hpp"

namespace sivsim {

Block::Block(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError(path_ + ": expected an object");
}

bool Block::has(const std::string& key) const { return j_->contains(key); }

void Block::fail(const std::string& key, const std::string& why) const {
    throw ValidationError((path_.empty() ? key : path_ + "." + key) + ": " + why);
}

const json* Block::find(const std::string& key) {
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
}

double Block::number(const std::string& key, std::optional<double> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required number");
    }
    if (!v->is_number()) fail(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
}

double Block::positive(const std::string& key, std::optional<double> fallback) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(key, "must be > 0");
    return x;
}

double Block::non_negative(const std::string& key, std::optional<double> fallback) {
    const double x = number(key, fallback);
    if (!(x >= 0.0)) fail(key, "must be >= 0");
    return x;
}

double Block::probability(const std::string& key, std::optional<double> fallback) {
    const double x = number(key, fallback);
    if (!(x >= 0.0 && x <= 1.0)) fail(key, "must lie in [0, 1]");
    return x;
}

int Block::integer(const std::string& key, std::optional<int> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required integer");
    }
    if (!v->is_number_integer()) fail(key, "expected an integer");
    return v->get<int>();
}

std::uint64_t Block::count(const std::string& key, std::optional<std::uint64_t> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required count");
    }
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) fail(key, "expected a non-negative integer");
    return v->get<std::uint64_t>();
}

bool Block::flag(const std::string& key, std::optional<bool> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required boolean");
    }
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
}

std::string Block::text(const std::string& key, std::optional<std::string> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required string");
    }
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
}

std::vector<std::string> Block::texts(const std::string& key, std::optional<std::vector<std::string>> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required list");
    }
    if (!v->is_array()) fail(key, "expected a list of strings");
    std::vector<std::string> out;
    for (const json& e : *v) {
        if (!e.is_string()) fail(key, "expected a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::vector<double> Block::numbers(const std::string& key, std::optional<std::vector<double>> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required list");
    }
    if (!v->is_array() || v->empty()) fail(key, "expected a non-empty list of numbers");
    std::vector<double> out;
    for (const json& e : *v) {
        if (!e.is_number()) fail(key, "expected a non-empty list of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<int> Block::integers(const std::string& key, std::optional<std::vector<int>> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required list");
    }
    if (!v->is_array() || v->empty()) fail(key, "expected a non-empty list of integers");
    std::vector<int> out;
    for (const json& e : *v) {
        if (!e.is_number_integer()) fail(key, "expected a non-empty list of integers");
        out.push_back(e.get<int>());
    }
    return out;
}

Block Block::child(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(key, "missing required block");
    return Block(*v, path_.empty() ? key : path_ + "." + key);
}

std::vector<Block> Block::children(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(key, "missing required list of blocks");
    if (!v->is_array() || v->empty()) fail(key, "expected a non-empty list of objects");
    std::vector<Block> out;
    const std::string base = path_.empty() ? key : path_ + "." + key;
    for (size_t i = 0; i < v->size(); ++i) out.emplace_back((*v)[i], base + "[" + std::to_string(i) + "]");
    return out;
}

std::optional<Block> Block::optional_child(const std::string& key) {
    if (!has(key)) {
        seen_.insert(key);
        return std::nullopt;
    }
    return child(key);
}

std::vector<double> Block::grid(const std::string& key, std::optional<std::vector<double>> fallback) {
    const json* v = find(key);
    if (!v) {
        if (fallback) return *fallback;
        fail(key, "missing required grid");
    }
    if (v->is_array()) return numbers(key);
    Block g(*v, path_.empty() ? key : path_ + "." + key);
    const double start = g.number("start");
    const double stop = g.number("stop");
    const int n = g.integer("count");
    const std::string spacing = g.text("spacing", "linear");
    g.finish();
    if (n < 1) fail(key, "count must be >= 1");
    if (spacing == "log") {
        if (!(start > 0.0 && stop > 0.0)) fail(key, "log spacing needs positive start and stop");
        std::vector<double> out = sivnode::linspace(std::log(start), std::log(stop), n);
        for (double& x : out) x = std::exp(x);
        if (n > 1) out.back() = stop;
        out.front() = start;
        return out;
    }
    if (spacing != "linear") fail(key, "spacing must be 'linear' or 'log'");
    if (n == 1) return {start};
    return sivnode::linspace(start, stop, n);
}

void Block::finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
        if (!seen_.count(it.key())) fail(it.key(), "unknown field");
}

}  // namespace sivsim
