#pragma once

#include <string>
#include <vector>

#include "hkflow/flow.hpp"
#include "hkflow_cli/config.hpp"

namespace hkflow::cli {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct LoadedSnapshot {
  int n = 0;
  int N = 0;
  double t = 0.0;
  std::vector<cplx> phi;
  std::vector<cplx> psi;
};

// Binary layout: "HKRF", u32 version, u32 n, u32 N, f64 t, then phi and psi
// as interleaved (re, im) f64, all little-endian.
void write_snapshot_file(const std::string& path, const Snapshot& s);
LoadedSnapshot read_snapshot_file(const std::string& path);

std::string sha256_file(const std::string& path);

// Writes <stem>.hkrf and <stem>.json (config, t, step, hash). Returns the
// path of the binary file.
std::string save_snapshot(const std::string& dir, const Snapshot& s, const RunConfig& c);

struct SnapshotRecord {
  RunConfig config;
  Snapshot snapshot;
  std::string path;
};

// Loads a snapshot through its sidecar; a hash mismatch is ConfigInvalid.
SnapshotRecord load_snapshot(const std::string& binary_path);

// Every snapshot under <dir>/snapshots, ordered by step.
std::vector<SnapshotRecord> load_run_dir(const std::string& dir);

}  // namespace hkflow::cli
