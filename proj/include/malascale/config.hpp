// Copyright 2026 The malascale Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MALASCALE_CONFIG_HPP_
#define MALASCALE_CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "malascale/errors.hpp"
#include "malascale/model.hpp"

namespace malascale {

struct ConfigKey {
  std::string_view key;
  std::string_view default_value;
  std::string_view help;
};

/// Every recognized key. "auto" values are resolved by the consumer.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model.family", "strict_hp", "strict_hp | gauss_prior | iid_gauss"},
      {"model.y", "0.5", "observed response"},
      {"model.beta", "1", "amplitude of H = beta tanh(x)"},
      {"model.a", "1", "prior tail weight (strict_hp)"},
      {"quad.half_width", "auto", "truncation L of the real line; auto = 40/min(a,1) or 12"},
      {"quad.panels", "256", "composite rule panels"},
      {"quad.nodes_per_panel", "32", "Gauss-Legendre nodes per panel"},
      {"run.seed", "1", "master seed"},
      {"run.out", "runs", "base output directory"},
      {"run.threads", "0", "worker count; 0 = hardware concurrency"},
      {"sample.kernel", "mala", "mala | rwm"},
      {"sample.N", "1024", "dimension"},
      {"sample.ell", "auto", "ell; auto = ell_hat"},
      {"sample.steps", "auto", "measured transitions; auto = max(2e5, 200 N^(1/3))"},
      {"sample.burn_in", "auto", "burn-in transitions; auto = max(1e5, 100 N^(1/3))"},
      {"sample.init", "limit_marginal", "prior | limit_marginal"},
      {"sample.trace_thin", "0", "write coordinate 1 every k steps; 0 = no trace"},
      {"plan.kinds", "mala", "comma list of kernels"},
      {"plan.N_grid", "256,1024,4096", "comma list of N"},
      {"plan.ell_grid", "0.5,1,1.5", "comma list of ell"},
      {"plan.ell_units", "ell_hat", "ell_hat (grid is in units of ell_hat) | absolute"},
      {"plan.seeds", "1,2,3", "comma list of replicate seeds"},
      {"plan.burn_in", "auto", "burn-in per cell"},
      {"plan.steps", "auto", "measured transitions per cell"},
      {"plan.init", "limit_marginal", "prior | limit_marginal"},
      {"plan.record_runtime", "false", "write runtime_ms into results.csv"},
      {"fit.enabled", "false", "also fit the variance exponent in `scaling`"},
      {"fit.kinds", "mala,rwm", "kernels to fit"},
      {"fit.N_grid", "512,1024,4096,16384", "comma list of N (>= 4 values spanning >= 16x)"},
      {"fit.steps", "10000", "transitions per golden-section trial"},
      {"fit.burn_in", "2000", "burn-in before the trials"},
      {"fit.sigma_sq_lo", "1e-6", "lower end of the sigma^2 bracket"},
      {"fit.sigma_sq_hi", "10", "upper end of the sigma^2 bracket"},
      {"fit.iterations", "12", "golden-section iterations"},
      {"optimality.N", "4096", "dimension"},
      {"optimality.ell_grid", "0.3,0.5,0.7,0.85,1,1.2,1.5,2,3", "ell grid in units of ell_hat"},
      {"optimality.seeds", "1", "comma list of replicate seeds"},
      {"optimality.burn_in", "auto", "burn-in per cell"},
      {"optimality.steps", "auto", "measured transitions per cell"},
      {"clt.N_grid", "256,1024,4096", "comma list of N"},
      {"clt.ell", "1", "ell"},
      {"clt.n_draws", "10000", "noise draws per configuration"},
      {"clt.burn_in", "auto", "burn-in before taking the configuration"},
      {"chaos.N_grid", "64,256,1024", "comma list of N"},
      {"chaos.n_snapshots", "4000", "snapshots per N"},
      {"chaos.thin", "auto", "transitions between snapshots; auto = 2 x IACT"},
      {"chaos.burn_in", "auto", "burn-in before the first snapshot"},
      {"validate.pairs", "100000", "random pairs for the detailed-balance check"},
  };
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view key) {
  for (const ConfigKey& k : config_keys()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flat `section.key = value` configuration. Lines starting with '#' are
/// comments. Values not set explicitly fall back to config_keys() defaults.
class Config {
 public:
  static Config parse(std::string_view text, std::string_view origin = "<config>") {
    Config c;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      const std::string_view raw = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      const std::string_view line = detail::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      const std::size_t eq = line.find('=');
      const std::string where = std::string(origin) + ":" + std::to_string(line_no);
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(line), where + ": expected `key = value`");
      }
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string value(detail::trim(line.substr(eq + 1)));
      if (key.find('.') == std::string::npos) {
        throw ConfigError(key, where + ": keys have the form section.key");
      }
      c.set(key, value);
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot read config file '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return parse(s.str(), path.string());
  }

  void set(const std::string& key, const std::string& value) {
    if (find_config_key(key) == nullptr) throw ConfigError(key, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  bool explicitly_set(std::string_view key) const { return values_.count(std::string(key)) > 0; }

  std::string get(std::string_view key) const {
    const ConfigKey* k = find_config_key(key);
    if (k == nullptr) throw ConfigError(std::string(key), "unknown config key");
    const auto it = values_.find(std::string(key));
    return it != values_.end() ? it->second : std::string(k->default_value);
  }

  bool is_auto(std::string_view key) const { return get(key) == "auto"; }

  double get_double(std::string_view key) const { return parse_value<double>(key, get(key)); }
  std::int64_t get_int(std::string_view key) const {
    return parse_value<std::int64_t>(key, get(key));
  }
  std::uint64_t get_u64(std::string_view key) const {
    return parse_value<std::uint64_t>(key, get(key));
  }
  std::optional<std::int64_t> get_optional_int(std::string_view key) const {
    if (is_auto(key)) return std::nullopt;
    return get_int(key);
  }
  std::optional<double> get_optional_double(std::string_view key) const {
    if (is_auto(key)) return std::nullopt;
    return get_double(key);
  }

  bool get_bool(std::string_view key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(std::string(key), "expected true or false, got '" + v + "'");
  }

  std::vector<std::string> get_list(std::string_view key) const {
    std::vector<std::string> out;
    const std::string v = get(key);
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const std::size_t end = std::min(v.find(',', pos), v.size());
      const std::string_view item = detail::trim(std::string_view(v).substr(pos, end - pos));
      if (!item.empty()) out.emplace_back(item);
      pos = end + 1;
    }
    if (out.empty()) throw ConfigError(std::string(key), "expected a nonempty comma list");
    return out;
  }

  template <class T>
  std::vector<T> get_number_list(std::string_view key) const {
    std::vector<T> out;
    for (const std::string& s : get_list(key)) out.push_back(parse_value<T>(key, s));
    return out;
  }

  /// Model section as a validated ModelSpec.
  ModelSpec model() const {
    ModelSpec m;
    try {
      m.family = parse_family(get("model.family"));
    } catch (const ArgumentError& e) {
      throw ConfigError("model.family", e.what());
    }
    m.y = get_double("model.y");
    m.beta = get_double("model.beta");
    m.a = get_double("model.a");
    if (m.family == Family::kIidGauss) {
      m.y = 0.0;
      m.beta = 0.0;
    }
    try {
      m.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError("model", e.what());
    }
    return m;
  }

  /// Every known key with its effective value, one `key = value` per line.
  std::string dump() const {
    std::string out;
    for (const ConfigKey& k : config_keys()) {
      out += std::string(k.key) + " = " + get(k.key) + "\n";
    }
    return out;
  }

 private:
  template <class T>
  static T parse_value(std::string_view key, const std::string& s) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw ConfigError(std::string(key), "invalid value '" + s + "' for key '" +
                                              std::string(key) + "'");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace malascale

#endif  // MALASCALE_CONFIG_HPP_
