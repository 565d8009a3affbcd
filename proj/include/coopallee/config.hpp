#pragma once

#include "coopallee/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coopallee {

// Plain-text `name = value` configuration with `#` comments.
class Config {
public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  long integer(const std::string& key) const;
  long integer_or(const std::string& key, long fallback) const;
  std::vector<double> numbers(const std::string& key) const;  // comma separated

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value);

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  std::string serialize() const;

private:
  std::map<std::string, std::string> values_;
};

ModelParams model_params(const Config& cfg);
std::optional<DiffusionParams> diffusion_params(const Config& cfg);
std::optional<DelayParams> delay_params(const Config& cfg);

void store(Config& cfg, const ModelParams& q);
void store(Config& cfg, const DiffusionParams& d);
void store(Config& cfg, const DelayParams& d);

std::string format_double(double x);  // 17 significant digits

}  // namespace coopallee
