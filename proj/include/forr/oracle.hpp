#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "forr/rng.hpp"

namespace forr {

// An n-bit +-1 valued function accessed by query. Every evaluate() call
// bumps the query counter by one.
class BooleanOracle {
public:
    explicit BooleanOracle(int n) : n_(n) {}
    virtual ~BooleanOracle() = default;

    int n() const { return n_; }

    int evaluate(uint64_t x) const {
        queries_.fetch_add(1, std::memory_order_relaxed);
        return eval_impl(x);
    }

    uint64_t queries() const { return queries_.load(std::memory_order_relaxed); }
    void reset_queries() const { queries_.store(0, std::memory_order_relaxed); }

protected:
    virtual int eval_impl(uint64_t x) const = 0;

private:
    int n_;
    mutable std::atomic<uint64_t> queries_{0};
};

class ConstOracle final : public BooleanOracle {
public:
    ConstOracle(int n, int value) : BooleanOracle(n), value_(value) {
        if (value != 1 && value != -1) throw std::invalid_argument("const oracle value must be +-1");
    }
protected:
    int eval_impl(uint64_t) const override { return value_; }
private:
    int value_;
};

// f(x) = (-1)^{popcount(x & mask)}
class ParityOracle final : public BooleanOracle {
public:
    ParityOracle(int n, uint64_t mask) : BooleanOracle(n), mask_(mask) {}
protected:
    int eval_impl(uint64_t x) const override { return __builtin_parityll(x & mask_) ? -1 : 1; }
private:
    uint64_t mask_;
};

class TableOracle final : public BooleanOracle {
public:
    TableOracle(int n, std::vector<int8_t> table) : BooleanOracle(n), table_(std::move(table)) {
        if (table_.size() != (size_t(1) << n)) throw std::invalid_argument("table oracle: size != 2^n");
    }
protected:
    int eval_impl(uint64_t x) const override { return table_[x]; }
private:
    std::vector<int8_t> table_;
};

// Procedural pseudorandom oracle: a pure function of (seed, x).
class HashOracle final : public BooleanOracle {
public:
    HashOracle(int n, uint64_t seed) : BooleanOracle(n), seed_(seed) {}
protected:
    int eval_impl(uint64_t x) const override {
        uint64_t h = detail::splitmix64(seed_ ^ detail::splitmix64(x + 0x51ed270b0129ULL));
        return (h >> 63) ? -1 : 1;
    }
private:
    uint64_t seed_;
};

// Function spec strings shared with the command line tool:
//   const:+1 | const:-1 | parity:<bitmask-hex> | rand:<seed> | table:<path>
inline std::unique_ptr<BooleanOracle> parse_oracle_spec(int n, const std::string& spec) {
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "const") {
        if (arg == "+1" || arg == "1") return std::make_unique<ConstOracle>(n, 1);
        if (arg == "-1") return std::make_unique<ConstOracle>(n, -1);
        throw std::invalid_argument("const oracle expects +1 or -1, got '" + arg + "'");
    }
    if (kind == "parity") {
        uint64_t mask = std::stoull(arg, nullptr, 16);
        return std::make_unique<ParityOracle>(n, mask);
    }
    if (kind == "rand") return std::make_unique<HashOracle>(n, std::stoull(arg));
    if (kind == "table") {
        std::ifstream in(arg);
        if (!in) throw std::runtime_error("cannot open oracle table file: " + arg);
        std::vector<int8_t> table;
        table.reserve(size_t(1) << n);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (line == "+1" || line == "1") table.push_back(1);
            else if (line == "-1") table.push_back(-1);
            else throw std::runtime_error(arg + ":" + std::to_string(lineno) + ": expected +1 or -1");
        }
        return std::make_unique<TableOracle>(n, std::move(table));
    }
    throw std::invalid_argument("unknown oracle spec '" + spec + "'");
}

// Random truth table (used by tests and sweeps).
inline std::unique_ptr<BooleanOracle> random_table_oracle(int n, RngStream& rng) {
    std::vector<int8_t> t(size_t(1) << n);
    for (auto& v : t) v = rng.bit() ? 1 : -1;
    return std::make_unique<TableOracle>(n, std::move(t));
}

}  // namespace forr
