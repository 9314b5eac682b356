#pragma once

namespace drcn::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Entry point of the drcn command-line tool.
int run(int argc, char** argv);

}  // namespace drcn::cli
