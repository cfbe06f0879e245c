#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "qpaths/cli_io.hpp"
#include "qpaths/error.hpp"

namespace qpaths {

using ojson = nlohmann::ordered_json;

namespace {

ojson encode(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double decode(const ojson& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return NAN;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw ParseError("bad number encoding '" + s + "'", 0);
  }
  return j.get<double>();
}

ojson encode(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(encode(x));
  return a;
}

std::vector<double> decode_vector(const ojson& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(decode(x));
  return v;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i])) return false;
  return true;
}

ojson config_to_json(const RunConfig& c) {
  ojson j;
  j["command"] = c.command;
  j["path_kind"] = c.path_kind;
  j["q"] = c.q ? encode(*c.q) : ojson(nullptr);
  j["particles"] = c.particles;
  j["K"] = c.K;
  j["schedule"] = c.schedule;
  j["moves"] = c.moves;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset ? ojson(*c.dataset) : ojson(nullptr);
  j["output"] = c.output;
  j["trace_csv"] = c.trace_csv ? ojson(*c.trace_csv) : ojson(nullptr);
  j["toy"] = c.toy;
  j["mu0"] = encode(c.mu0);
  j["var0"] = encode(c.var0);
  j["mu1"] = encode(c.mu1);
  j["var1"] = encode(c.var1);
  j["nu"] = encode(c.nu);
  j["log_scale"] = encode(c.log_scale);
  j["step_size"] = encode(c.step_size);
  j["n_leapfrog"] = c.n_leapfrog;
  j["ess_fraction"] = encode(c.ess_fraction);
  j["restarts"] = c.restarts;
  j["grid_count"] = c.grid_count;
  j["delta_min"] = encode(c.delta_min);
  j["delta_max"] = encode(c.delta_max);
  j["ground_truth"] = c.ground_truth;
  j["threads"] = c.threads;
  return j;
}

RunConfig config_from_json(const ojson& j) {
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.path_kind = j.at("path_kind").get<std::string>();
  if (!j.at("q").is_null()) c.q = decode(j.at("q"));
  c.particles = j.at("particles").get<std::size_t>();
  c.K = j.at("K").get<std::size_t>();
  c.schedule = j.at("schedule").get<std::string>();
  c.moves = j.at("moves").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("dataset").is_null()) c.dataset = j.at("dataset").get<std::string>();
  c.output = j.at("output").get<std::string>();
  if (!j.at("trace_csv").is_null()) c.trace_csv = j.at("trace_csv").get<std::string>();
  c.toy = j.at("toy").get<std::string>();
  c.mu0 = decode(j.at("mu0"));
  c.var0 = decode(j.at("var0"));
  c.mu1 = decode(j.at("mu1"));
  c.var1 = decode(j.at("var1"));
  c.nu = decode(j.at("nu"));
  c.log_scale = decode(j.at("log_scale"));
  c.step_size = decode(j.at("step_size"));
  c.n_leapfrog = j.at("n_leapfrog").get<int>();
  c.ess_fraction = decode(j.at("ess_fraction"));
  c.restarts = j.at("restarts").get<std::size_t>();
  c.grid_count = j.at("grid_count").get<std::size_t>();
  c.delta_min = decode(j.at("delta_min"));
  c.delta_max = decode(j.at("delta_max"));
  c.ground_truth = j.at("ground_truth").get<bool>();
  c.threads = j.at("threads").get<unsigned>();
  return c;
}

bool same_config(const RunConfig& a, const RunConfig& b) {
  auto same_opt = [](const std::optional<double>& x, const std::optional<double>& y) {
    return x.has_value() == y.has_value() && (!x || same(*x, *y));
  };
  return a.command == b.command && a.path_kind == b.path_kind && same_opt(a.q, b.q) &&
         a.particles == b.particles && a.K == b.K && a.schedule == b.schedule && a.moves == b.moves &&
         a.seed == b.seed && a.dataset == b.dataset && a.output == b.output && a.trace_csv == b.trace_csv &&
         a.toy == b.toy && same(a.mu0, b.mu0) && same(a.var0, b.var0) && same(a.mu1, b.mu1) &&
         same(a.var1, b.var1) && same(a.nu, b.nu) && same(a.log_scale, b.log_scale) &&
         same(a.step_size, b.step_size) && a.n_leapfrog == b.n_leapfrog && same(a.ess_fraction, b.ess_fraction) &&
         a.restarts == b.restarts && a.grid_count == b.grid_count && same(a.delta_min, b.delta_min) &&
         same(a.delta_max, b.delta_max) && a.ground_truth == b.ground_truth && a.threads == b.threads;
}

}  // namespace

std::string RunReport::to_json() const {
  ojson j;
  j["status"] = status;
  j["error"] = error;
  j["log_Z"] = encode(log_Z);
  j["stderr_estimate"] = encode(stderr_estimate);
  j["ess_trace"] = encode(ess_trace);
  j["beta_trace"] = encode(beta_trace);
  j["acceptance_trace"] = encode(acceptance_trace);
  j["wallclock_s"] = encode(wallclock_s);
  j["config_echo"] = config_to_json(config_echo);
  j["library_version"] = library_version;
  ojson ex = ojson::object();
  for (const auto& [k, v] : extras) ex[k] = encode(v);
  j["extras"] = ex;
  return j.dump(2) + "\n";
}

RunReport RunReport::from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid report JSON: ") + e.what(), 0);
  }
  RunReport r;
  try {
    r.status = j.at("status").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.log_Z = decode(j.at("log_Z"));
    r.stderr_estimate = decode(j.at("stderr_estimate"));
    r.ess_trace = decode_vector(j.at("ess_trace"));
    r.beta_trace = decode_vector(j.at("beta_trace"));
    r.acceptance_trace = decode_vector(j.at("acceptance_trace"));
    r.wallclock_s = decode(j.at("wallclock_s"));
    r.config_echo = config_from_json(j.at("config_echo"));
    r.library_version = j.at("library_version").get<std::string>();
    for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = decode(v);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
  return r;
}

bool RunReport::operator==(const RunReport& o) const {
  if (extras.size() != o.extras.size()) return false;
  for (const auto& [k, v] : extras) {
    auto it = o.extras.find(k);
    if (it == o.extras.end() || !same(v, it->second)) return false;
  }
  return status == o.status && error == o.error && same(log_Z, o.log_Z) &&
         same(stderr_estimate, o.stderr_estimate) && same(ess_trace, o.ess_trace) &&
         same(beta_trace, o.beta_trace) && same(acceptance_trace, o.acceptance_trace) &&
         same(wallclock_s, o.wallclock_s) && same_config(config_echo, o.config_echo) &&
         library_version == o.library_version;
}

std::string traces_to_csv(const RunReport& r) {
  std::ostringstream s;
  s.precision(17);
  s << "step,beta,ess,acceptance\n";
  const std::size_t n = std::max({r.beta_trace.size(), r.ess_trace.size(), r.acceptance_trace.size()});
  for (std::size_t i = 0; i < n; ++i) {
    s << i << ',';
    if (i < r.beta_trace.size()) s << r.beta_trace[i];
    s << ',';
    if (i < r.ess_trace.size()) s << r.ess_trace[i];
    s << ',';
    if (i < r.acceptance_trace.size()) s << r.acceptance_trace[i];
    s << '\n';
  }
  return s.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f << contents;
    f.flush();
    if (!f) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename onto '" + path + "': " + ec.message());
  }
}

}  // namespace qpaths
