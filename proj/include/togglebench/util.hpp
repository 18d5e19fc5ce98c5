#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace togglebench {

// Base class for all toolkit errors. Subcommands map these to nonzero exit
// codes; metric values never travel through exceptions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UnknownDialectError : public Error {
public:
    using Error::Error;
};

class UnsupportedActionError : public Error {
public:
    using Error::Error;
};

class AnnotatorError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class ExportError : public Error {
public:
    using Error::Error;
};

class AgentProtocolError : public Error {
public:
    using Error::Error;
};

// FNV-1a, 64 bit. Used wherever a platform-stable hash is required (dataset
// splits, mock annotators, seeding); std::hash is not stable across
// implementations.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// splitmix64 finalizer; decorrelates sequential seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Lowercase and collapse every whitespace run to a single space; leading and
// trailing whitespace is removed. The default feature-name normalization.
std::string normalize_label(std::string_view s);

// Minimal-digit decimal rendering: 55 -> "55", 42.5 -> "42.5".
std::string format_number(double v);

// Replaces every occurrence of `from` (non-empty) in `s` with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace togglebench
