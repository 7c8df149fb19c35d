// Shared utilities: error types, worker policy, UTF-8 helpers, atomic file writes.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ltx {

using TokenId = std::uint32_t;

/// Malformed or inconsistent input data. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// True when LTX_DETERMINISTIC=1 is set in the environment.
bool deterministic_mode();

/// Worker count for parallel stages; 1 in deterministic mode.
std::size_t worker_count();

/// Number of Unicode code points in a UTF-8 string. Invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

bool is_valid_utf8(std::string_view s);

/// Replaces every invalid UTF-8 sequence by U+FFFD; returns the number of replacements.
std::size_t sanitize_utf8(std::string& s);

/// Writes `bytes` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Integer with thousands separators: 2129222398 -> "2,129,222,398".
std::string group_thousands(std::uint64_t value, char sep = ',');

void log_warning(std::string_view message);

}  // namespace ltx
