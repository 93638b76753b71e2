#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace batchbandit::cli {

inline constexpr const char* kToolVersion = "0.3.0";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_io = 3, exit_runtime = 4 };

// Runs one command line. Tables go to `out`, progress and errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a, used for the config hash in manifests.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace batchbandit::cli
