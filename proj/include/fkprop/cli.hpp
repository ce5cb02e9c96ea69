#pragma once

namespace fkprop {

inline constexpr const char* kToolVersion = "0.1.0";

// Command-line front end. Exit codes:
//   0  success; every asserted bound held
//   1  an asserted bound failed (hypothesis satisfied, conclusion violated)
//   2  usage, configuration, or solver error
//   3  a constant is infinite (reducible chain) and --allow-infinite is absent
int run_cli(int argc, const char* const* argv);

}  // namespace fkprop
