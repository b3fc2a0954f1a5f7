#include "hkflow_cli/snapshot_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "hkflow/error.hpp"

namespace hkflow::cli {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw ConfigInvalid("snapshot file is truncated");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string stem_for(const Snapshot& s) {
  char name[64];
  std::snprintf(name, sizeof name, "snap_%010lld", static_cast<long long>(s.step));
  return name;
}

}  // namespace

void write_snapshot_file(const std::string& path, const Snapshot& s) {
  const Grid& g = *s.phi.grid;
  std::string buf = "HKRF";
  put<std::uint32_t>(buf, kSnapshotVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(g.n()));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(g.N()));
  put<double>(buf, s.t);
  for (const ScalarField* f : {&s.phi, &s.psi})
    for (const cplx& z : f->v) {
      put<double>(buf, z.real());
      put<double>(buf, z.imag());
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigInvalid("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ConfigInvalid("write failed for " + path);
}

LoadedSnapshot read_snapshot_file(const std::string& path) {
  std::string buf = read_all(path);
  if (buf.size() < 4 || buf.compare(0, 4, "HKRF") != 0) throw ConfigInvalid(path + " is not a snapshot file");
  std::size_t off = 4;
  if (take<std::uint32_t>(buf, off) != kSnapshotVersion) throw ConfigInvalid("unsupported snapshot version in " + path);
  LoadedSnapshot s;
  s.n = static_cast<int>(take<std::uint32_t>(buf, off));
  s.N = static_cast<int>(take<std::uint32_t>(buf, off));
  s.t = take<double>(buf, off);
  if (s.n < 1 || s.n > 2 || s.N < 1 || s.N > 4096) throw ConfigInvalid("bad snapshot header in " + path);
  std::size_t points = 1;
  for (int a = 0; a < 2 * s.n; ++a) points *= static_cast<std::size_t>(s.N);
  for (std::vector<cplx>* f : {&s.phi, &s.psi}) {
    f->resize(points);
    for (cplx& z : *f) {
      double re = take<double>(buf, off);
      double im = take<double>(buf, off);
      z = cplx(re, im);
    }
  }
  if (off != buf.size()) throw ConfigInvalid("trailing bytes in snapshot " + path);
  return s;
}

std::string sha256_file(const std::string& path) {
  std::string buf = read_all(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(buf.data(), buf.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string save_snapshot(const std::string& dir, const Snapshot& s, const RunConfig& c) {
  fs::create_directories(dir);
  const std::string stem = (fs::path(dir) / stem_for(s)).string();
  const std::string bin = stem + ".hkrf";
  write_snapshot_file(bin, s);
  json side;
  side["format"] = "HKRF";
  side["format_version"] = kSnapshotVersion;
  side["file"] = fs::path(bin).filename().string();
  side["t"] = s.t;
  side["step"] = s.step;
  side["sha256"] = sha256_file(bin);
  side["config"] = to_json(c);
  std::ofstream out(stem + ".json", std::ios::trunc);
  if (!out) throw ConfigInvalid("cannot write sidecar for " + bin);
  out << side.dump(2) << "\n";
  return bin;
}

SnapshotRecord load_snapshot(const std::string& binary_path) {
  fs::path bin(binary_path);
  fs::path side = bin;
  side.replace_extension(".json");
  std::ifstream in(side);
  if (!in) throw ConfigInvalid("missing sidecar " + side.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigInvalid("sidecar " + side.string() + " is not valid JSON");
  }
  if (!j.contains("sha256") || !j.contains("config") || !j.contains("step"))
    throw ConfigInvalid("sidecar " + side.string() + " is incomplete");
  if (sha256_file(bin.string()) != j.at("sha256").get<std::string>())
    throw ConfigInvalid("hash mismatch for snapshot " + bin.string());
  SnapshotRecord r;
  r.config = parse_config(j.at("config"));
  r.path = bin.string();
  LoadedSnapshot ls = read_snapshot_file(bin.string());
  if (ls.n != r.config.n || ls.N != r.config.N) throw ConfigInvalid("snapshot grid differs from its config");
  GridPtr grid = build_grid(r.config);
  r.snapshot.t = ls.t;
  r.snapshot.step = j.at("step").get<std::int64_t>();
  r.snapshot.phi = ScalarField(grid);
  r.snapshot.psi = ScalarField(grid);
  r.snapshot.phi.v = std::move(ls.phi);
  r.snapshot.psi.v = std::move(ls.psi);
  return r;
}

std::vector<SnapshotRecord> load_run_dir(const std::string& dir) {
  fs::path sd = fs::path(dir) / "snapshots";
  if (!fs::is_directory(sd)) throw ConfigInvalid("no snapshots directory in " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(sd))
    if (e.path().extension() == ".hkrf") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<SnapshotRecord> out;
  for (const std::string& f : files) out.push_back(load_snapshot(f));
  std::sort(out.begin(), out.end(),
            [](const SnapshotRecord& a, const SnapshotRecord& b) { return a.snapshot.step < b.snapshot.step; });
  if (out.empty()) throw ConfigInvalid("no snapshots found in " + sd.string());
  // Snapshots must share a grid; reusing one GridPtr keeps field ops compatible.
  GridPtr grid = out.front().snapshot.phi.grid;
  for (SnapshotRecord& r : out) {
    if (r.config.n != out.front().config.n || r.config.N != out.front().config.N)
      throw ConfigInvalid("snapshots in " + dir + " use different grids");
    r.snapshot.phi.grid = grid;
    r.snapshot.psi.grid = grid;
  }
  return out;
}

}  // namespace hkflow::cli
