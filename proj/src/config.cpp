#include "optomech/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace optomech {

namespace {

double number_of(const toml::node& node, const std::string& where) {
  if (auto v = node.value<double>()) return *v;
  throw ConfigError(where + " must be a number");
}

std::vector<double> numbers_of(const toml::node& node, const std::string& where) {
  const auto* array = node.as_array();
  if (!array) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& item : *array) out.push_back(number_of(item, where));
  return out;
}

std::vector<std::string> strings_of(const toml::node& node, const std::string& where) {
  const auto* array = node.as_array();
  if (!array) throw ConfigError(where + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : *array) {
    auto s = item.value<std::string>();
    if (!s) throw ConfigError(where + " must contain strings");
    out.push_back(*s);
  }
  return out;
}

void reject_unknown(const toml::table& table, const std::vector<std::string>& known,
                    const std::string& section) {
  for (const auto& [key, value] : table) {
    if (std::find(known.begin(), known.end(), std::string(key.str())) == known.end())
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + section);
  }
}

void read_params(const toml::table& t, SweepConfig& cfg, std::vector<std::string>& cyclic) {
  reject_unknown(t, {"omega_m", "q_m", "kappa", "g", "eta", "theta", "temperature", "model",
                     "g0", "cyclic_hz"},
                 "[params]");
  PhysicalParams& p = cfg.base;
  const auto set = [&](const char* key, double& field) {
    if (const auto* node = t.get(key)) field = number_of(*node, std::string("params.") + key);
  };
  set("omega_m", p.omega_m);
  set("q_m", p.q_m);
  set("kappa", p.kappa);
  set("g", p.g);
  set("eta", p.eta);
  set("theta", p.theta);
  set("temperature", p.temperature);
  set("g0", cfg.g0);
  if (auto model = t["model"].value<std::string>()) p.model = parse_model(*model);
  if (const auto* node = t.get("cyclic_hz")) cyclic = strings_of(*node, "params.cyclic_hz");
}

void read_cost(const toml::table& t, SweepConfig& cfg) {
  reject_unknown(t, {"kind", "p", "q", "p_over_q", "nu"}, "[cost]");
  CostSpec& c = cfg.cost;
  if (auto kind = t["kind"].value<std::string>()) c.kind = parse_cost_kind(*kind);
  if (const auto* node = t.get("q")) c.q = number_of(*node, "cost.q");
  if (const auto* node = t.get("p")) c.p = number_of(*node, "cost.p");
  if (const auto* node = t.get("p_over_q")) {
    if (t.contains("p")) throw ConfigError("give either cost.p or cost.p_over_q");
    c.p = number_of(*node, "cost.p_over_q") * c.q;
  }
  if (const auto* node = t.get("nu")) c.nu = number_of(*node, "cost.nu");
}

Axis read_axis(const toml::table& t) {
  reject_unknown(t, {"axis", "values", "log", "linear", "models"}, "[[grid]]");
  Axis axis;
  auto name = t["axis"].value<std::string>();
  if (!name) throw ConfigError("[[grid]] entry needs an 'axis' name");
  axis.name = *name;
  const std::string where = "grid '" + axis.name + "'";
  if (axis.name == "model") {
    const auto* node = t.get("models") ? t.get("models") : t.get("values");
    if (!node) throw ConfigError(where + " needs 'models'");
    for (const auto& m : strings_of(*node, where)) axis.models.push_back(parse_model(m));
    return axis;
  }
  const int given = t.contains("values") + t.contains("log") + t.contains("linear");
  if (given != 1) throw ConfigError(where + " needs exactly one of values, log, linear");
  if (const auto* node = t.get("values")) {
    axis.values = numbers_of(*node, where);
  } else {
    const bool log = t.contains("log");
    const auto spec = numbers_of(*t.get(log ? "log" : "linear"), where);
    if (spec.size() != 3 || spec[2] < 1 || spec[2] != std::floor(spec[2]))
      throw ConfigError(where + " range must be [start, stop, count]");
    if (log && !(spec[0] > 0.0 && spec[1] > 0.0))
      throw ConfigError(where + " log range needs positive bounds");
    const int count = static_cast<int>(spec[2]);
    axis.values = log ? log_space(spec[0], spec[1], count) : lin_space(spec[0], spec[1], count);
  }
  return axis;
}

}  // namespace

bool is_rate_field(std::string_view field) {
  return field == "omega_m" || field == "kappa" || field == "g" || field == "g0";
}

void apply_cyclic_hz(SweepConfig& cfg, const std::vector<std::string>& fields) {
  const double two_pi = 2.0 * kPi;
  for (const auto& field : fields) {
    if (!is_rate_field(field))
      throw ConfigError("cyclic-hz applies to omega_m, kappa, g, g0; got '" + field + "'");
    if (field == "omega_m") cfg.base.omega_m *= two_pi;
    if (field == "kappa") cfg.base.kappa *= two_pi;
    if (field == "g") cfg.base.g *= two_pi;
    if (field == "g0") cfg.g0 *= two_pi;
    for (auto& axis : cfg.grids)
      if (axis.name == field)
        for (auto& v : axis.values) v *= two_pi;
  }
}

SweepConfig parse_config(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  try {
    reject_unknown(root, {"preset", "name", "objective", "optimize", "params", "cost", "grid",
                          "output"},
                   "top level");
    SweepConfig cfg;
    if (auto preset = root["preset"].value<std::string>()) cfg = figure_preset(*preset);
    if (auto name = root["name"].value<std::string>()) cfg.name = *name;
    if (auto objective = root["objective"].value<std::string>())
      cfg.objective = parse_objective(*objective);
    if (const auto* node = root.get("optimize")) {
      cfg.optimize_theta = cfg.optimize_nu = cfg.optimize_g = false;
      for (const auto& axis : strings_of(*node, "optimize")) {
        if (axis == "theta") cfg.optimize_theta = true;
        else if (axis == "nu") cfg.optimize_nu = true;
        else if (axis == "g") cfg.optimize_g = true;
        else throw ConfigError("cannot optimize over '" + axis + "'");
      }
    }
    std::vector<std::string> cyclic;
    if (const auto* t = root["params"].as_table()) read_params(*t, cfg, cyclic);
    if (const auto* t = root["cost"].as_table()) read_cost(*t, cfg);
    if (const auto* grids = root["grid"].as_array()) {
      cfg.grids.clear();
      for (const auto& entry : *grids) {
        const auto* t = entry.as_table();
        if (!t) throw ConfigError("[[grid]] entries must be tables");
        cfg.grids.push_back(read_axis(*t));
      }
    }
    if (const auto* t = root["output"].as_table()) {
      reject_unknown(*t, {"path", "format"}, "[output]");
      if (auto path = (*t)["path"].value<std::string>()) cfg.output = *path;
      if (auto format = (*t)["format"].value<std::string>()) {
        if (*format == "csv") cfg.format = OutputFormat::Csv;
        else if (*format == "json") cfg.format = OutputFormat::Json;
        else throw ConfigError("output.format must be csv or json");
      }
    }
    apply_cyclic_hz(cfg, cyclic);
    cfg.validate();
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

}  // namespace optomech
