#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clusterfit::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string_view> split(std::string_view s, char delimiter);
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Full-token parse; nullopt on trailing garbage or an empty token.
/// Accepts "inf", "-inf" and "nan".
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

/// 64-bit FNV-1a, used for input checksums in run manifests.
std::uint64_t fnv1a(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t value);

std::string read_file(const std::string& path);

}  // namespace clusterfit::text
