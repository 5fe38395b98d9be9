#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shopsim {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRunsFailed = 1;  // a run failed or a report errored
inline constexpr int kExitUsage = 2;       // bad flags or config
inline constexpr int kExitData = 3;        // unreadable or empty inputs
inline constexpr int kExitInterrupted = 130;

// Commands: ingest, simulate, analyze <sub>, probe <train|infer>, report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// "3,000"
std::string with_thousands(std::size_t n);

}  // namespace shopsim
