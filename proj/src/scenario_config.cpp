#include "mppfc/scenario_config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mppfc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

Eigen::VectorXd parse_list(const std::string& key, const std::string& text, int expected) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(parse_double(key, trim(item)));
  if (static_cast<int>(values.size()) != expected) {
    throw std::invalid_argument("config: key '" + key + "' expects " + std::to_string(expected) +
                                " comma-separated values");
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), expected);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v(i));
  }
  return out;
}

using Setter = std::function<void(ScenarioConfig&, const std::string& key, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&t](const char* key, auto member_ref) {
      t[key] = [member_ref](ScenarioConfig& c, const std::string& k, const std::string& v) {
        member_ref(c) = parse_double(k, v);
      };
    };
    num("total_time", [](ScenarioConfig& c) -> double& { return c.total_time; });
    num("thrust_scale", [](ScenarioConfig& c) -> double& { return c.thrust_scale; });
    num("mass_error", [](ScenarioConfig& c) -> double& { return c.mass_error; });
    num("position_noise", [](ScenarioConfig& c) -> double& { return c.position_noise; });
    num("s2_min", [](ScenarioConfig& c) -> double& { return c.s2_bounds.lower; });
    num("s2_max", [](ScenarioConfig& c) -> double& { return c.s2_bounds.upper; });
    num("mass", [](ScenarioConfig& c) -> double& { return c.model.mass; });
    num("gravity", [](ScenarioConfig& c) -> double& { return c.model.gravity; });
    num("tau_roll", [](ScenarioConfig& c) -> double& { return c.model.tau_roll; });
    num("tau_pitch", [](ScenarioConfig& c) -> double& { return c.model.tau_pitch; });
    num("delta", [](ScenarioConfig& c) -> double& { return c.ocp.delta; });
    num("s_dot_max", [](ScenarioConfig& c) -> double& { return c.ocp.s_dot_max; });
    num("s_dot_floor", [](ScenarioConfig& c) -> double& { return c.ocp.s_dot_floor; });
    num("terminal_weight", [](ScenarioConfig& c) -> double& { return c.ocp.terminal_weight; });
    num("terminal_weight_s2",
        [](ScenarioConfig& c) -> double& { return c.ocp.terminal_weight_s2; });
    num("nu_min", [](ScenarioConfig& c) -> double& { return c.ocp.nu_bounds.lower; });
    num("nu_max", [](ScenarioConfig& c) -> double& { return c.ocp.nu_bounds.upper; });
    num("nu2_min", [](ScenarioConfig& c) -> double& { return c.ocp.nu2_bounds.lower; });
    num("nu2_max", [](ScenarioConfig& c) -> double& { return c.ocp.nu2_bounds.upper; });
    num("kkt_tolerance", [](ScenarioConfig& c) -> double& { return c.solver.kkt_tolerance; });
    num("barrier_initial", [](ScenarioConfig& c) -> double& { return c.solver.barrier_initial; });
    num("barrier_decrease",
        [](ScenarioConfig& c) -> double& { return c.solver.barrier_decrease; });
    num("barrier_floor", [](ScenarioConfig& c) -> double& { return c.solver.barrier_floor; });
    num("merit_penalty", [](ScenarioConfig& c) -> double& { return c.solver.merit_penalty; });

    t["plant_substeps"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.plant_substeps = static_cast<int>(parse_integer(k, v));
    };
    t["horizon"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.horizon = static_cast<int>(parse_integer(k, v));
    };
    t["max_iterations"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.solver.max_iterations = static_cast<int>(parse_integer(k, v));
    };
    t["seed"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.seed = static_cast<std::uint64_t>(parse_integer(k, v));
    };
    t["sensor"] = [](ScenarioConfig& c, const std::string&, const std::string& v) {
      c.sensor = parse_sensor_mode(v);
    };
    t["hover_point"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.hover_point = parse_list(k, v, 4);
    };
    t["q_diag"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.q = parse_list(k, v, c.ocp.corridor ? 9 : 8).asDiagonal();
    };
    t["r_diag"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.r = parse_list(k, v, c.ocp.corridor ? 6 : 5).asDiagonal();
    };
    t["state_lower"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.state_lower = parse_list(k, v, kStateDim);
    };
    t["state_upper"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.state_upper = parse_list(k, v, kStateDim);
    };
    t["input_lower"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.input_lower = parse_list(k, v, kInputDim);
    };
    t["input_upper"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.ocp.input_upper = parse_list(k, v, kInputDim);
    };
    t["yaw_rate_max"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      const double r = parse_double(k, v);
      c.ocp.input_lower(3) = -r;
      c.ocp.input_upper(3) = r;
    };
    return t;
  }();
  return table;
}

}  // namespace

std::string_view to_string(SensorMode mode) {
  return mode == SensorMode::exact ? "exact" : "fd";
}

SensorMode parse_sensor_mode(std::string_view text) {
  if (text == "exact") return SensorMode::exact;
  if (text == "fd") return SensorMode::finite_difference;
  throw std::invalid_argument("unknown sensor mode '" + std::string(text) + "' (exact|fd)");
}

void ScenarioConfig::validate() const {
  model.validate();
  ocp.validate();
  solver.validate();
  if (!(total_time > 0.0) || ocp.horizon * ocp.delta > total_time) {
    throw std::invalid_argument("ScenarioConfig: need horizon * delta <= total_time");
  }
  if (!(thrust_scale > 0.5 && thrust_scale < 1.5)) {
    throw std::invalid_argument("ScenarioConfig: thrust_scale must lie in (0.5, 1.5)");
  }
  if (!(mass_error > -0.5 && mass_error < 0.5)) {
    throw std::invalid_argument("ScenarioConfig: mass_error must lie in (-0.5, 0.5)");
  }
  if (plant_substeps < 1) throw std::invalid_argument("ScenarioConfig: plant_substeps >= 1");
  if (!(position_noise >= 0.0)) throw std::invalid_argument("ScenarioConfig: position_noise >= 0");
  if (corridor() && !(s2_bounds.lower <= 0.0 && s2_bounds.upper >= 0.0)) {
    throw std::invalid_argument("ScenarioConfig: s2 bounds must contain 0");
  }
  (void)make_path();
}

AnyPath ScenarioConfig::make_path() const {
  if (scenario == "spiral") return spiral_path();
  if (scenario == "lemniscate") return lemniscate_path();
  if (scenario == "sinusoid") return sinusoid_path();
  if (scenario == "sinusoid-corridor") return sinusoid_corridor_path(s2_bounds);
  if (scenario == "hover") return hover_path(hover_point);
  throw std::invalid_argument("unknown scenario '" + scenario + "'");
}

ScenarioConfig ScenarioConfig::preset(std::string_view scenario) {
  ScenarioConfig c;
  c.scenario = std::string(scenario);
  if (scenario == "spiral" || scenario == "lemniscate") {
    c.ocp = OcpConfig::defaults(false, 0.04);
    c.total_time = 40.0;
  } else if (scenario == "sinusoid") {
    c.ocp = OcpConfig::defaults(false, 0.02);
    c.ocp.input_lower(3) = -0.2;
    c.ocp.input_upper(3) = 0.2;
    c.total_time = 120.0;
  } else if (scenario == "sinusoid-corridor") {
    c.ocp = OcpConfig::defaults(true, 0.02);
    c.ocp.input_lower(3) = -0.2;
    c.ocp.input_upper(3) = 0.2;
    c.total_time = 100.0;
  } else if (scenario == "hover") {
    c.ocp = OcpConfig::defaults(false, 0.04);
    c.total_time = 10.0;
  } else {
    throw std::invalid_argument("unknown scenario '" + std::string(scenario) +
                                "' (spiral|lemniscate|sinusoid|sinusoid-corridor|hover)");
  }
  return c;
}

ScenarioConfig apply_config_text(ScenarioConfig base, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "scenario") {
      if (value != base.scenario) {
        throw std::invalid_argument("config: scenario '" + value + "' does not match '" +
                                    base.scenario + "'");
      }
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
    }
    it->second(base, key, value);
  }
  return base;
}

ScenarioConfig apply_config_file(ScenarioConfig base, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return apply_config_text(std::move(base), ss.str());
}

std::string to_config_text(const ScenarioConfig& c) {
  std::ostringstream os;
  auto kv = [&os](const char* key, const std::string& value) {
    os << key << " = " << value << '\n';
  };
  kv("scenario", c.scenario);
  kv("total_time", fmt(c.total_time));
  kv("plant_substeps", std::to_string(c.plant_substeps));
  kv("thrust_scale", fmt(c.thrust_scale));
  kv("mass_error", fmt(c.mass_error));
  kv("sensor", std::string(to_string(c.sensor)));
  kv("position_noise", fmt(c.position_noise));
  kv("seed", std::to_string(c.seed));
  kv("hover_point", fmt_list(c.hover_point));
  kv("s2_min", fmt(c.s2_bounds.lower));
  kv("s2_max", fmt(c.s2_bounds.upper));
  kv("mass", fmt(c.model.mass));
  kv("gravity", fmt(c.model.gravity));
  kv("tau_roll", fmt(c.model.tau_roll));
  kv("tau_pitch", fmt(c.model.tau_pitch));
  kv("horizon", std::to_string(c.ocp.horizon));
  kv("delta", fmt(c.ocp.delta));
  kv("s_dot_max", fmt(c.ocp.s_dot_max));
  kv("s_dot_floor", fmt(c.ocp.s_dot_floor));
  kv("q_diag", fmt_list(c.ocp.q.diagonal()));
  kv("r_diag", fmt_list(c.ocp.r.diagonal()));
  kv("terminal_weight", fmt(c.ocp.terminal_weight));
  kv("terminal_weight_s2", fmt(c.ocp.terminal_weight_s2));
  kv("state_lower", fmt_list(c.ocp.state_lower));
  kv("state_upper", fmt_list(c.ocp.state_upper));
  kv("input_lower", fmt_list(c.ocp.input_lower));
  kv("input_upper", fmt_list(c.ocp.input_upper));
  kv("nu_min", fmt(c.ocp.nu_bounds.lower));
  kv("nu_max", fmt(c.ocp.nu_bounds.upper));
  kv("nu2_min", fmt(c.ocp.nu2_bounds.lower));
  kv("nu2_max", fmt(c.ocp.nu2_bounds.upper));
  kv("kkt_tolerance", fmt(c.solver.kkt_tolerance));
  kv("max_iterations", std::to_string(c.solver.max_iterations));
  kv("barrier_initial", fmt(c.solver.barrier_initial));
  kv("barrier_decrease", fmt(c.solver.barrier_decrease));
  kv("barrier_floor", fmt(c.solver.barrier_floor));
  kv("merit_penalty", fmt(c.solver.merit_penalty));
  return os.str();
}

std::uint64_t config_hash(const ScenarioConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char ch : to_config_text(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace mppfc
