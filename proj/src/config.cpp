#include "coopallee/config.hpp"

#include "coopallee/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace coopallee {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last)
    throw Error(ErrorCode::ConfigError, "key '" + key + "' is not a number: '" + s + "'");
  return x;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected name = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty name or value");
    if (cfg.has(key))
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string& Config::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigError, "missing key '" + key + "'");
  return it->second;
}

std::string Config::text_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

double Config::number(const std::string& key) const { return parse_double(key, text(key)); }

double Config::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long Config::integer(const std::string& key) const {
  const std::string& s = text(key);
  long x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::ConfigError, "key '" + key + "' is not an integer: '" + s + "'");
  return x;
}

long Config::integer_or(const std::string& key, long fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::vector<double> Config::numbers(const std::string& key) const {
  std::vector<double> out;
  std::istringstream in(text(key));
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

void Config::set(const std::string& key, double value) { values_[key] = format_double(value); }

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ModelParams model_params(const Config& cfg) {
  ModelParams q;
  q.r = cfg.number("r");
  q.a = cfg.number("a");
  q.c = cfg.number("c");
  q.m = cfg.number("m");
  q.p = cfg.number_or("p", q.p);
  try {
    q.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return q;
}

std::optional<DiffusionParams> diffusion_params(const Config& cfg) {
  if (!cfg.has("d1") && !cfg.has("d2")) return std::nullopt;
  DiffusionParams d;
  d.d1 = cfg.number("d1");
  d.d2 = cfg.number("d2");
  d.l = cfg.number_or("l", d.l);
  try {
    d.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return d;
}

std::optional<DelayParams> delay_params(const Config& cfg) {
  if (!cfg.has("tau1") && !cfg.has("tau2")) return std::nullopt;
  DelayParams d;
  d.tau1 = cfg.number_or("tau1", 0.0);
  d.tau2 = cfg.number_or("tau2", 0.0);
  try {
    d.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return d;
}

void store(Config& cfg, const ModelParams& q) {
  cfg.set("r", q.r);
  cfg.set("a", q.a);
  cfg.set("c", q.c);
  cfg.set("m", q.m);
  cfg.set("p", q.p);
}

void store(Config& cfg, const DiffusionParams& d) {
  cfg.set("d1", d.d1);
  cfg.set("d2", d.d2);
  cfg.set("l", d.l);
}

void store(Config& cfg, const DelayParams& d) {
  cfg.set("tau1", d.tau1);
  cfg.set("tau2", d.tau2);
}

}  // namespace coopallee
