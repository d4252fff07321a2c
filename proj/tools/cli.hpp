#pragma once

#include <iosfwd>

namespace flora::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kBackendFailure = 1;  // backend, transport or I/O failure
inline constexpr int kUsage = 2;
inline constexpr int kNoAnswer = 3;

// Entry point of the `flora` tool: parse | infer | eval | synth.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flora::cli
