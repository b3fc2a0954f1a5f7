#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hkflow/flow.hpp"
#include "hkflow/verify.hpp"

namespace hkflow::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// cos or sin of 2 pi k.x with k given per real axis (x1, y1, x2, y2).
struct ModeSpec {
  std::array<int, 4> k{0, 0, 0, 0};
  double amplitude = 0.0;
  bool sine = false;
};

struct RandomModes {
  int count = 0;
  double amplitude = 0.0;
  int kmax = 1;
};

struct RunConfig {
  int n = 1;
  int N = 32;
  double L = 1.0;

  std::string metric_kind = "flat";  // flat | potential | conformal
  double metric_scale = 1.0;
  std::vector<ModeSpec> metric_modes;

  std::vector<ModeSpec> phi0;
  std::vector<ModeSpec> phi1;
  std::optional<RandomModes> random_phi0;

  std::optional<double> dt;
  std::optional<double> cfl_safety;
  double T = 1.0;
  int snapshot_every = 10;

  bool dealias = true;
  VerifySettings verify;

  std::vector<double> converge_dt;
  std::vector<int> converge_N;
  std::optional<double> converge_T;

  std::string out_dir = "out";
  bool plots = true;
  bool write_snapshots = true;

  std::uint64_t seed = 0;
};

// Parses and validates a schema-versioned config. Unknown keys, wrong types
// and out-of-range values raise ConfigInvalid.
RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path);
json to_json(const RunConfig& c);

GridPtr build_grid(const RunConfig& c);
// Background metric; a non positive-definite g0 is a configuration error.
MetricField build_g0(const RunConfig& c, const GridPtr& grid);
ScalarField build_phi0(const RunConfig& c, const GridPtr& grid);
ScalarField build_phi1(const RunConfig& c, const GridPtr& grid);

// Fixed step for the whole run: dt, or cfl_safety applied to the initial metric.
double resolve_dt(const RunConfig& c, const PotentialFlow& flow, const FlowState& s0);

}  // namespace hkflow::cli
