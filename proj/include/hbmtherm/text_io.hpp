#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hbmtherm {

// Shortest exact decimal form of a double: parses back bit-identically.
std::string format_double(double v);

// strtod wrapper that rejects trailing garbage; throws std::runtime_error.
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

// Split one CSV line (no quoting; fields in this project never contain commas).
std::vector<std::string> split_csv(const std::string& line);

std::string join_csv(const std::vector<std::string>& fields);

std::string trim(const std::string& s);

bool starts_with(const std::string& s, const std::string& prefix);

// FNV-1a 64-bit over bytes; stable across platforms, used for case ids and
// config/provenance hashes.
uint64_t fnv1a(const std::string& bytes);
uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull);

std::string to_hex(uint64_t v);

// Whole-file helpers.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace hbmtherm
