#pragma once

// Config files (UTF-8 key=value lines, '#' comments, unknown keys are
// errors), CSV diagnostics output with shortest round-trip doubles, and
// the HCFSNAP1 snapshot format: a short text header followed by raw
// little-endian IEEE-754 doubles, re/im interleaved, row-major over
// (x^1, y^1, ..., x^n, y^n) then tensor indices.

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hcf/tensor.hpp"

namespace hcf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static Config parse(const std::string& text, const std::string& origin = "<string>") {
    Config c;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(ln) + ": expected key=value");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(ln) + ": empty key");
      if (c.kv_.count(key)) throw ConfigError(origin + ": duplicate key '" + key + "'");
      c.kv_[key] = val;
    }
    return c;
  }

  bool has(const std::string& k) const { return kv_.count(k) != 0; }

  std::string get_string(const std::string& k, const std::string& dflt) const {
    touch(k);
    auto it = kv_.find(k);
    return it == kv_.end() ? dflt : it->second;
  }
  std::string require_string(const std::string& k) const {
    touch(k);
    auto it = kv_.find(k);
    if (it == kv_.end()) throw ConfigError("missing required config key '" + k + "'");
    return it->second;
  }
  long get_long(const std::string& k, long dflt) const {
    touch(k);
    auto it = kv_.find(k);
    if (it == kv_.end()) return dflt;
    try {
      std::size_t pos = 0;
      long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key '" + k + "': expected integer, got '" + it->second + "'");
    }
  }
  double get_double(const std::string& k, double dflt) const {
    touch(k);
    auto it = kv_.find(k);
    if (it == kv_.end()) return dflt;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key '" + k + "': expected number, got '" + it->second + "'");
    }
  }
  bool get_bool(const std::string& k, bool dflt) const {
    touch(k);
    auto it = kv_.find(k);
    if (it == kv_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + k + "': expected true/false");
  }

  // no silent typos in experiment definitions: every present key must have
  // been consumed by a getter
  void reject_unknown_keys() const {
    for (const auto& [k, v] : kv_)
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

 private:
  void touch(const std::string& k) const { seen_.insert(k); }
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> seen_;
};

// shortest decimal that round-trips the double
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------
// Snapshots

struct Snapshot {
  int n = 0, N = 0;
  double t = 0.0;
  long step = 0;
  std::string backend;
  std::vector<cplx> g;  // point-major: [point][i][j]
};

inline void write_snapshot(const std::string& path, const Lattice& lat, double t, long step,
                           const std::string& backend, const TensorField& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open snapshot file for writing: " + path);
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t comps = g.comps();
  out << "HCFSNAP1\n";
  out << "n=" << n << "\n";
  out << "N=" << lat.N() << "\n";
  out << "t=" << fmt_double(t) << "\n";
  out << "step=" << step << "\n";
  out << "backend=" << backend << "\n";
  out << "field=g rank=2 complex=1 count=" << comps * P << " offset=0\n";
  out << "end\n";
  std::vector<double> buf(2 * comps);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < comps; ++c) {
      buf[2 * c] = g.comp(c)[p].real();
      buf[2 * c + 1] = g.comp(c)[p].imag();
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(sizeof(double) * buf.size()));
  }
  if (!out) throw std::runtime_error("snapshot write failed: " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "HCFSNAP1")
    throw std::runtime_error("bad snapshot magic in " + path);
  Snapshot s;
  std::size_t count = 0;
  while (std::getline(in, line) && line != "end") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.rfind("field=g", 0) == 0) {
        const auto cpos = line.find("count=");
        if (cpos != std::string::npos) count = std::stoul(line.substr(cpos + 6));
        continue;
      }
      throw std::runtime_error("bad snapshot header line: " + line);
    }
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "n") s.n = std::stoi(val);
    else if (key == "N") s.N = std::stoi(val);
    else if (key == "t") s.t = std::stod(val);
    else if (key == "step") s.step = std::stol(val);
    else if (key == "backend") s.backend = val;
    else if (key.rfind("field", 0) == 0) {
      const auto cpos = val.find("count=");
      if (cpos != std::string::npos) count = std::stoul(val.substr(cpos + 6));
    }
  }
  if (s.n < 1 || s.N < 2) throw std::runtime_error("bad snapshot header in " + path);
  if (count == 0) {
    std::size_t P = 1;
    for (int a = 0; a < 2 * s.n; ++a) P *= static_cast<std::size_t>(s.N);
    count = P * static_cast<std::size_t>(s.n) * static_cast<std::size_t>(s.n);
  }
  s.g.resize(count);
  std::vector<double> buf(2 * count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(sizeof(double) * buf.size()));
  if (!in) throw std::runtime_error("snapshot truncated: " + path);
  for (std::size_t i = 0; i < count; ++i) s.g[i] = cplx(buf[2 * i], buf[2 * i + 1]);
  return s;
}

// field=g line is parsed loosely above; 'field=g ...' uses '=' inside, so
// handle the canonical writer output where the first '=' splits at field.
inline std::string snapshot_name(const std::string& prefix, long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%06ld.snap", index);
  return prefix + buf;
}

}  // namespace hcf
