#pragma once

#include <string>

namespace hkflow::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitIdentityFailed = 1,
  kExitConfig = 2,
  kExitSingular = 3,
  kExitNumeric = 4,
};

struct Options {
  std::string command;  // run | verify | converge | curvature
  std::string config;   // config file, or a run directory for verify
  std::string out;      // overrides output.dir
  std::string resume;   // snapshot to continue from (run only)
  int threads = 0;      // 0: HKFLOW_THREADS or 1
  bool quiet = false;
};

int cmd_run(const Options& o);
int cmd_verify(const Options& o);
int cmd_converge(const Options& o);
int cmd_curvature(const Options& o);

// Dispatches and maps errors to exit codes, printing them to stderr.
int execute(const Options& o);

// Full command line entry point.
int run_cli(int argc, char** argv);

}  // namespace hkflow::cli
