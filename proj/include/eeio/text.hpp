#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eeio {

// Shortest decimal string that round-trips to the same double.
// All numeric file output goes through this so runs are byte-reproducible.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

// FNV-1a 64-bit, used for content digests in run manifests.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace eeio
