#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sctflow {

using json = nlohmann::json;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files. line/column are 1-based, 0 when unknown.
struct ParseError : Error {
    ParseError(const std::string& msg, int line = 0, int column = 0);
    int line;
    int column;
};

struct ValidationError : Error {
    using Error::Error;
};

// A design/insert step has no solution; `constraint` names what bound it.
struct InfeasibleError : Error {
    InfeasibleError(const std::string& constraint, const std::string& msg)
        : Error(msg), constraint(constraint) {}
    std::string constraint;
};

struct AmbiguityError : Error {
    using Error::Error;
};

// Serialize with sorted keys and every floating value printed with 6 decimals.
std::string dump_json(const json& j, int indent = 1);
json parse_json_text(const std::string& text);
json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

double round6(double v);

std::string sha256_hex(const std::string& data);

// Stable 64-bit mix of several integers (seed derivation).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace sctflow
