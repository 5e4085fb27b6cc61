#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace docback::util {

/// FNV-1a 64-bit content hash. Stable across platforms; not cryptographic.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

/// SplitMix64 step, used to derive deterministic per-seed parameters.
std::uint64_t splitmix64(std::uint64_t& state);

/// Uniform double in [0,1) from a SplitMix64 stream.
double next_unit(std::uint64_t& state);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace docback::util
