#include "hkflow_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "hkflow/error.hpp"

namespace hkflow::cli {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigInvalid(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigInvalid("unknown key '" + it.key() + "' in " + where);
}

double number(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigInvalid(where + "." + key + " must be a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigInvalid(where + "." + key + " must be finite");
  return x;
}

int integer(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigInvalid(where + "." + key + " must be an integer");
  return v.get<int>();
}

bool boolean(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigInvalid(where + "." + key + " must be a boolean");
  return v.get<bool>();
}

std::vector<ModeSpec> parse_modes(const json& j, int n, const std::string& where) {
  if (!j.is_array()) throw ConfigInvalid(where + " must be an array of modes");
  std::vector<ModeSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const json& m = j[i];
    check_keys(m, {"k", "amplitude", "phase"}, w);
    if (!m.contains("k") || !m.contains("amplitude")) throw ConfigInvalid(w + " needs k and amplitude");
    const json& k = m.at("k");
    if (!k.is_array() || k.size() != static_cast<std::size_t>(2 * n))
      throw ConfigInvalid(w + ".k must list " + std::to_string(2 * n) + " integer wavenumbers");
    ModeSpec s;
    for (int a = 0; a < 2 * n; ++a) {
      if (!k[a].is_number_integer()) throw ConfigInvalid(w + ".k entries must be integers");
      s.k[a] = k[a].get<int>();
    }
    s.amplitude = number(m, "amplitude", w);
    if (m.contains("phase")) {
      const json& p = m.at("phase");
      if (!p.is_string() || (p != "cos" && p != "sin")) throw ConfigInvalid(w + ".phase must be cos or sin");
      s.sine = p == "sin";
    }
    out.push_back(s);
  }
  return out;
}

json modes_json(const std::vector<ModeSpec>& modes, int n) {
  json a = json::array();
  for (const ModeSpec& m : modes) {
    json k = json::array();
    for (int i = 0; i < 2 * n; ++i) k.push_back(m.k[i]);
    a.push_back({{"k", k}, {"amplitude", m.amplitude}, {"phase", m.sine ? "sin" : "cos"}});
  }
  return a;
}

std::vector<Mode> to_modes(const std::vector<ModeSpec>& specs) {
  std::vector<Mode> out;
  for (const ModeSpec& s : specs) out.push_back(Mode{s.k, s.amplitude, s.sine});
  return out;
}

}  // namespace

RunConfig parse_config(const json& j) {
  check_keys(j, {"schema_version", "grid", "metric", "phi0", "phi1", "random_phi0", "time", "dealias",
                 "tolerances", "verify", "converge", "output", "seed"},
             "config");
  if (!j.contains("schema_version")) throw ConfigInvalid("config.schema_version is required");
  if (integer(j, "schema_version", "config") != kSchemaVersion)
    throw ConfigInvalid("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");

  RunConfig c;
  if (!j.contains("grid")) throw ConfigInvalid("config.grid is required");
  const json& g = j.at("grid");
  check_keys(g, {"n", "N", "L"}, "grid");
  if (!g.contains("n") || !g.contains("N")) throw ConfigInvalid("grid needs n and N");
  c.n = integer(g, "n", "grid");
  c.N = integer(g, "N", "grid");
  if (g.contains("L")) c.L = number(g, "L", "grid");
  // Validates n, N, L.
  make_grid(c.n, c.N, c.L);

  if (j.contains("metric")) {
    const json& m = j.at("metric");
    check_keys(m, {"kind", "scale", "modes"}, "metric");
    if (m.contains("kind")) {
      if (!m.at("kind").is_string()) throw ConfigInvalid("metric.kind must be a string");
      c.metric_kind = m.at("kind").get<std::string>();
    }
    if (c.metric_kind != "flat" && c.metric_kind != "potential" && c.metric_kind != "conformal")
      throw ConfigInvalid("metric.kind must be flat, potential or conformal");
    if (m.contains("scale")) c.metric_scale = number(m, "scale", "metric");
    if (!(c.metric_scale > 0.0)) throw ConfigInvalid("metric.scale must be positive");
    if (m.contains("modes")) c.metric_modes = parse_modes(m.at("modes"), c.n, "metric.modes");
    if (c.metric_kind == "flat" && !c.metric_modes.empty())
      throw ConfigInvalid("metric.modes is not used by a flat metric");
    if (c.metric_kind == "conformal" && c.n != 1) throw ConfigInvalid("conformal metric requires n = 1");
  }
  if (j.contains("phi0")) c.phi0 = parse_modes(j.at("phi0"), c.n, "phi0");
  if (j.contains("phi1")) c.phi1 = parse_modes(j.at("phi1"), c.n, "phi1");
  if (j.contains("random_phi0")) {
    const json& r = j.at("random_phi0");
    check_keys(r, {"count", "amplitude", "kmax"}, "random_phi0");
    RandomModes rm;
    rm.count = integer(r, "count", "random_phi0");
    rm.amplitude = number(r, "amplitude", "random_phi0");
    if (r.contains("kmax")) rm.kmax = integer(r, "kmax", "random_phi0");
    if (rm.count < 0 || rm.kmax < 1) throw ConfigInvalid("random_phi0 needs count >= 0 and kmax >= 1");
    c.random_phi0 = rm;
  }

  if (!j.contains("time")) throw ConfigInvalid("config.time is required");
  const json& t = j.at("time");
  check_keys(t, {"dt", "cfl_safety", "T", "snapshot_every"}, "time");
  if (t.contains("dt") == t.contains("cfl_safety"))
    throw ConfigInvalid("time needs exactly one of dt and cfl_safety");
  if (t.contains("dt")) {
    c.dt = number(t, "dt", "time");
    if (!(*c.dt > 0.0)) throw ConfigInvalid("time.dt must be positive");
  } else {
    c.cfl_safety = number(t, "cfl_safety", "time");
    if (!(*c.cfl_safety > 0.0) || *c.cfl_safety > 1.0)
      throw ConfigInvalid("time.cfl_safety must be in (0, 1]");
  }
  if (!t.contains("T")) throw ConfigInvalid("time.T is required");
  c.T = number(t, "T", "time");
  if (!(c.T >= 0.0)) throw ConfigInvalid("time.T must be non-negative");
  if (t.contains("snapshot_every")) c.snapshot_every = integer(t, "snapshot_every", "time");
  if (c.snapshot_every < 1) throw ConfigInvalid("time.snapshot_every must be >= 1");

  if (j.contains("dealias")) c.dealias = boolean(j, "dealias", "config");

  if (j.contains("tolerances")) {
    const json& tol = j.at("tolerances");
    check_keys(tol, {"zero", "order_min", "order_max", "ceiling", "replay", "routes"}, "tolerances");
    if (tol.contains("zero")) c.verify.zero_tol = number(tol, "zero", "tolerances");
    if (tol.contains("order_min")) c.verify.order_min = number(tol, "order_min", "tolerances");
    if (tol.contains("order_max")) c.verify.order_max = number(tol, "order_max", "tolerances");
    if (tol.contains("ceiling")) c.verify.ceiling = number(tol, "ceiling", "tolerances");
    if (tol.contains("replay")) c.verify.replay_tol = number(tol, "replay", "tolerances");
    if (tol.contains("routes")) c.verify.routes_tol = number(tol, "routes", "tolerances");
    if (!(c.verify.order_min < c.verify.order_max)) throw ConfigInvalid("tolerances: order_min >= order_max");
  }
  if (j.contains("verify")) {
    const json& v = j.at("verify");
    check_keys(v, {"strides", "sample_times", "five_point"}, "verify");
    if (v.contains("strides")) {
      c.verify.strides.clear();
      for (const json& s : v.at("strides")) {
        if (!s.is_number_integer() || s.get<int>() < 1) throw ConfigInvalid("verify.strides must be positive integers");
        c.verify.strides.push_back(s.get<int>());
      }
      for (std::size_t i = 1; i < c.verify.strides.size(); ++i)
        if (c.verify.strides[i] >= c.verify.strides[i - 1])
          throw ConfigInvalid("verify.strides must be strictly decreasing");
      if (c.verify.strides.empty()) throw ConfigInvalid("verify.strides must not be empty");
    }
    if (v.contains("sample_times")) {
      for (const json& s : v.at("sample_times")) {
        if (!s.is_number()) throw ConfigInvalid("verify.sample_times must be numbers");
        c.verify.sample_times.push_back(s.get<double>());
      }
    }
    if (v.contains("five_point")) c.verify.five_point = boolean(v, "five_point", "verify");
  }
  if (j.contains("converge")) {
    const json& v = j.at("converge");
    check_keys(v, {"dt_levels", "N_levels", "T"}, "converge");
    if (v.contains("dt_levels"))
      for (const json& s : v.at("dt_levels")) {
        if (!s.is_number() || !(s.get<double>() > 0.0)) throw ConfigInvalid("converge.dt_levels must be positive");
        c.converge_dt.push_back(s.get<double>());
      }
    if (v.contains("N_levels"))
      for (const json& s : v.at("N_levels")) {
        if (!s.is_number_integer()) throw ConfigInvalid("converge.N_levels must be integers");
        make_grid(c.n, s.get<int>(), c.L);
        c.converge_N.push_back(s.get<int>());
      }
    if (v.contains("T")) c.converge_T = number(v, "T", "converge");
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"dir", "plots", "write_snapshots"}, "output");
    if (o.contains("dir")) {
      if (!o.at("dir").is_string()) throw ConfigInvalid("output.dir must be a string");
      c.out_dir = o.at("dir").get<std::string>();
    }
    if (o.contains("plots")) c.plots = boolean(o, "plots", "output");
    if (o.contains("write_snapshots")) c.write_snapshots = boolean(o, "write_snapshots", "output");
  }
  if (j.contains("seed")) {
    const json& sd = j.at("seed");
    if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<std::int64_t>() < 0))
      throw ConfigInvalid("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigInvalid("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["grid"] = {{"n", c.n}, {"N", c.N}, {"L", c.L}};
  j["metric"] = {{"kind", c.metric_kind}, {"scale", c.metric_scale}};
  if (c.metric_kind != "flat") j["metric"]["modes"] = modes_json(c.metric_modes, c.n);
  j["phi0"] = modes_json(c.phi0, c.n);
  j["phi1"] = modes_json(c.phi1, c.n);
  if (c.random_phi0)
    j["random_phi0"] = {{"count", c.random_phi0->count},
                        {"amplitude", c.random_phi0->amplitude},
                        {"kmax", c.random_phi0->kmax}};
  j["time"] = {{"T", c.T}, {"snapshot_every", c.snapshot_every}};
  if (c.dt) j["time"]["dt"] = *c.dt;
  if (c.cfl_safety) j["time"]["cfl_safety"] = *c.cfl_safety;
  j["dealias"] = c.dealias;
  j["tolerances"] = {{"zero", c.verify.zero_tol},       {"order_min", c.verify.order_min},
                     {"order_max", c.verify.order_max}, {"ceiling", c.verify.ceiling},
                     {"replay", c.verify.replay_tol},   {"routes", c.verify.routes_tol}};
  j["verify"] = {{"strides", c.verify.strides},
                 {"sample_times", c.verify.sample_times},
                 {"five_point", c.verify.five_point}};
  json conv = {{"dt_levels", c.converge_dt}, {"N_levels", c.converge_N}};
  if (c.converge_T) conv["T"] = *c.converge_T;
  j["converge"] = conv;
  j["output"] = {{"dir", c.out_dir}, {"plots", c.plots}, {"write_snapshots", c.write_snapshots}};
  j["seed"] = c.seed;
  return j;
}

GridPtr build_grid(const RunConfig& c) { return make_grid(c.n, c.N, c.L); }

MetricField build_g0(const RunConfig& c, const GridPtr& grid) {
  try {
    if (c.metric_kind == "conformal")
      return conformal_metric(field_from_modes(grid, to_modes(c.metric_modes)), c.metric_scale);
    MetricField flat = flat_metric(grid, std::vector<double>(c.n, c.metric_scale));
    if (c.metric_kind == "flat") return flat;
    return metric_from_potential(flat, field_from_modes(grid, to_modes(c.metric_modes)));
  } catch (const MetricDegenerate& e) {
    throw ConfigInvalid(std::string("background metric is not positive definite: ") + e.what());
  }
}

ScalarField build_phi0(const RunConfig& c, const GridPtr& grid) {
  std::vector<Mode> modes = to_modes(c.phi0);
  if (c.random_phi0) {
    std::mt19937_64 rng(c.seed);
    std::uniform_int_distribution<int> kdist(-c.random_phi0->kmax, c.random_phi0->kmax);
    std::uniform_real_distribution<double> adist(-c.random_phi0->amplitude, c.random_phi0->amplitude);
    std::bernoulli_distribution sdist(0.5);
    for (int i = 0; i < c.random_phi0->count; ++i) {
      Mode m;
      for (int a = 0; a < 2 * c.n; ++a) m.k[a] = kdist(rng);
      m.amplitude = adist(rng);
      m.sine = sdist(rng);
      modes.push_back(m);
    }
  }
  return field_from_modes(grid, modes);
}

ScalarField build_phi1(const RunConfig& c, const GridPtr& grid) {
  return field_from_modes(grid, to_modes(c.phi1));
}

double resolve_dt(const RunConfig& c, const PotentialFlow& flow, const FlowState& s0) {
  if (c.dt) return *c.dt;
  MetricField g = flow.metric(s0.phi);
  return cfl_dt(g, g.grid()->h(), *c.cfl_safety);
}

}  // namespace hkflow::cli
