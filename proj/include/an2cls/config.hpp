#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "an2cls/common.hpp"
#include "an2cls/step.hpp"

namespace an2cls {

enum class Backend { exact, krylov };

inline std::string_view to_string(Backend b) {
  return b == Backend::exact ? "exact" : "krylov";
}

inline Backend parse_backend(std::string_view s) {
  if (s == "exact") return Backend::exact;
  if (s == "krylov") return Backend::krylov;
  throw ConfigError("unknown backend '" + std::string(s) + "'");
}

/// Hyperparameters of the adaptive Newton / negative-curvature iteration.
struct SolverConfig {
  std::optional<double> sigma0;  // empty: sigma0 = 1 / ||g0||
  double sigma_min = 1e-8;
  double kappa_C = 1e3;
  double kappa_theta = 0.0;
  double theta = 1.0;
  double vartheta = 1e4;
  double gamma1 = 0.5;
  double gamma2 = 10.0;
  double gamma3 = 10.0;
  double eta1 = 1e-4;
  double eta2 = 0.95;
  double eps = 1e-6;
  long max_iterations = 5000;
  double time_limit_seconds = 3600.0;
  Backend backend = Backend::exact;
  Preconditioner preconditioner;
  long krylov_max_dim = 0;  // 0: problem dimension

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid solver config: ") + what);
    };
    require(!sigma0 || (std::isfinite(*sigma0) && *sigma0 > 0.0), "sigma0 > 0");
    require(std::isfinite(sigma_min) && sigma_min > 0.0, "sigma_min > 0");
    require(kappa_C >= 1.0 && std::isfinite(kappa_C), "kappa_C >= 1");
    require(kappa_theta >= 0.0 && std::isfinite(kappa_theta), "kappa_theta >= 0");
    require(theta > 0.0 && theta <= 1.0, "0 < theta <= 1");
    require(vartheta >= 1.0 && std::isfinite(vartheta), "vartheta >= 1");
    require(gamma1 > 0.0 && gamma1 < 1.0, "0 < gamma1 < 1");
    require(gamma2 > 1.0 && gamma2 <= gamma3 && std::isfinite(gamma3),
            "1 < gamma2 <= gamma3");
    require(eta1 > 0.0 && eta1 <= eta2 && eta2 < 1.0, "0 < eta1 <= eta2 < 1");
    require(eps > 0.0 && eps <= 1.0, "0 < eps <= 1");
    require(max_iterations >= 0, "max_iterations >= 0");
    require(time_limit_seconds > 0.0, "time_limit_seconds > 0");
    require(krylov_max_dim >= 0, "krylov_max_dim >= 0");
  }

  double kappa_slow() const {
    const double a = 1.0 + kappa_theta + kappa_C;
    return a + std::sqrt(a * a + vartheta);
  }

  double kappa_upnewt() const {
    return 3.0 * (1.0 - eta2) + 1.0 + kappa_C + kappa_theta;
  }
};

/// Hyperparameters used in the reference experiments. The exact backend runs
/// with theta = 1, kappa_theta = 0; the Krylov backend with kappa_theta = 1,
/// theta = 1/2.
inline SolverConfig default_config(Backend backend) {
  SolverConfig c;
  c.backend = backend;
  if (backend == Backend::exact) {
    c.theta = 1.0;
    c.kappa_theta = 0.0;
  } else {
    c.theta = 0.5;
    c.kappa_theta = 1.0;
  }
  return c;
}

/// Second-order variant: `base.eps` plays the role of eps1.
struct SOConfig {
  SolverConfig base = default_config(Backend::exact);
  double eps2 = 1e-3;

  double eps1() const { return base.eps; }

  void validate() const {
    base.validate();
    if (!(eps2 > 0.0 && eps2 <= 1.0))
      throw ConfigError("invalid solver config: 0 < eps2 <= 1");
    if (base.backend != Backend::exact)
      throw ConfigError("invalid solver config: second-order mode needs the exact backend");
    if (!base.preconditioner.is_identity())
      throw ConfigError("invalid solver config: second-order mode is unpreconditioned");
  }
};

// ---- serialization -------------------------------------------------------

namespace detail {

inline constexpr std::string_view kSigma0Rule = "1/|g0|";

inline Preconditioner parse_preconditioner(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "identity") return Preconditioner::identity();
    constexpr std::string_view prefix = "diagonal:";
    if (s.rfind(prefix, 0) == 0) {
      std::vector<double> vals;
      std::stringstream in(s.substr(prefix.size()));
      std::string item;
      while (std::getline(in, item, ',')) {
        try {
          vals.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw ConfigError("bad preconditioner entry '" + item + "'");
        }
      }
      return Preconditioner::diagonal(
          Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    throw ConfigError("bad preconditioner '" + s + "'");
  }
  if (j.is_array()) {
    std::vector<double> vals = j.get<std::vector<double>>();
    return Preconditioner::diagonal(
        Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  throw ConfigError("preconditioner must be \"identity\", \"diagonal:...\" or an array");
}

inline nlohmann::json preconditioner_to_json(const Preconditioner& m) {
  if (m.is_identity()) return "identity";
  return std::vector<double>(m.entries().data(), m.entries().data() + m.entries().size());
}

inline double number(const nlohmann::json& j, std::string_view key) {
  if (!j.is_number())
    throw ConfigError("config key '" + std::string(key) + "' needs a number");
  return j.get<double>();
}

inline long integer(const nlohmann::json& j, std::string_view key) {
  const double v = number(j, key);
  if (v != std::floor(v)) throw ConfigError("config key '" + std::string(key) + "' needs an integer");
  return static_cast<long>(v);
}

/// Returns false if `key` is not a SolverConfig field.
inline bool apply_field(SolverConfig& c, const std::string& key, const nlohmann::json& v) {
  if (key == "sigma0") {
    if (v.is_string() && (v.get<std::string>() == kSigma0Rule || v.get<std::string>() == "rule"))
      c.sigma0.reset();
    else
      c.sigma0 = number(v, key);
  } else if (key == "sigma_min") {
    c.sigma_min = number(v, key);
  } else if (key == "kappa_C") {
    c.kappa_C = number(v, key);
  } else if (key == "kappa_theta") {
    c.kappa_theta = number(v, key);
  } else if (key == "theta") {
    c.theta = number(v, key);
  } else if (key == "vartheta") {
    c.vartheta = number(v, key);
  } else if (key == "gamma1") {
    c.gamma1 = number(v, key);
  } else if (key == "gamma2") {
    c.gamma2 = number(v, key);
  } else if (key == "gamma3") {
    c.gamma3 = number(v, key);
  } else if (key == "eta1") {
    c.eta1 = number(v, key);
  } else if (key == "eta2") {
    c.eta2 = number(v, key);
  } else if (key == "eps") {
    c.eps = number(v, key);
  } else if (key == "max_iterations") {
    c.max_iterations = integer(v, key);
  } else if (key == "time_limit_seconds") {
    c.time_limit_seconds = number(v, key);
  } else if (key == "backend") {
    if (!v.is_string()) throw ConfigError("config key 'backend' needs a string");
    c.backend = parse_backend(v.get<std::string>());
  } else if (key == "preconditioner") {
    c.preconditioner = parse_preconditioner(v);
  } else if (key == "krylov_max_dim") {
    c.krylov_max_dim = integer(v, key);
  } else {
    return false;
  }
  return true;
}

/// Parses a scalar from key=value text: number, or bare string.
inline nlohmann::json scalar_from_text(const std::string& text) {
  try {
    std::size_t used = 0;
    const double d = std::stod(text, &used);
    if (used == text.size()) return d;
  } catch (const std::exception&) {
  }
  return text;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline nlohmann::json to_json(const SolverConfig& c) {
  nlohmann::json j;
  j["sigma0"] = c.sigma0 ? nlohmann::json(*c.sigma0) : nlohmann::json(detail::kSigma0Rule);
  j["sigma_min"] = c.sigma_min;
  j["kappa_C"] = c.kappa_C;
  j["kappa_theta"] = c.kappa_theta;
  j["theta"] = c.theta;
  j["vartheta"] = c.vartheta;
  j["gamma1"] = c.gamma1;
  j["gamma2"] = c.gamma2;
  j["gamma3"] = c.gamma3;
  j["eta1"] = c.eta1;
  j["eta2"] = c.eta2;
  j["eps"] = c.eps;
  j["max_iterations"] = c.max_iterations;
  j["time_limit_seconds"] = c.time_limit_seconds;
  j["backend"] = std::string(to_string(c.backend));
  j["preconditioner"] = detail::preconditioner_to_json(c.preconditioner);
  j["krylov_max_dim"] = c.krylov_max_dim;
  return j;
}

inline nlohmann::json to_json(const SOConfig& c) {
  nlohmann::json j = to_json(c.base);
  j.erase("eps");
  j["eps1"] = c.base.eps;
  j["eps2"] = c.eps2;
  return j;
}

/// Overrides fields present in `j`. Unknown keys are errors.
inline void apply_overrides(SolverConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("solver config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!detail::apply_field(c, key, value))
      throw ConfigError("unknown config key '" + key + "'");
}

inline void apply_overrides(SOConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("solver config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "eps1") {
      c.base.eps = detail::number(value, key);
    } else if (key == "eps2") {
      c.eps2 = detail::number(value, key);
    } else if (key == "eps" || !detail::apply_field(c.base, key, value)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

/// Reads flat "key = value" lines ('#' starts a comment) into a JSON object.
inline nlohmann::json parse_key_value(std::string_view text) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (j.contains(key)) throw ConfigError("duplicate config key '" + key + "'");
    j[key] = detail::scalar_from_text(value);
  }
  return j;
}

inline std::string to_key_value(const nlohmann::json& j) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& [key, value] : j.items()) {
    out << key << " = ";
    if (value.is_string()) {
      out << value.get<std::string>();
    } else if (value.is_array()) {
      out << "diagonal:";
      bool first = true;
      for (const auto& v : value) {
        out << (first ? "" : ",") << v.get<double>();
        first = false;
      }
    } else {
      out << value.dump();
    }
    out << '\n';
  }
  return out.str();
}

/// Loads a config document: JSON if it starts with '{', key=value otherwise.
inline nlohmann::json load_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("bad JSON config: ") + e.what());
    }
  }
  return parse_key_value(text);
}

}  // namespace an2cls
