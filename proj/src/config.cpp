#include "slowfast/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace slowfast {

namespace {

using ojson = nlohmann::ordered_json;

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw_config("'" + key + "': expected a number, got '" + s + "'");
  }
}

long long parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw_config("'" + key + "': expected an integer, got '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw_config("'" + key + "': expected a non-negative integer, got '" + s + "'");
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t[");
    const auto e = item.find_last_not_of(" \t]");
    if (b == std::string::npos) continue;
    out.push_back(parse_double(key, item.substr(b, e - b + 1)));
  }
  return out;
}

int to_int(const std::string& key, const std::string& s) {
  const long long v = parse_int(key, s);
  if (v < -2147483647LL || v > 2147483647LL) throw_config("'" + key + "': integer out of range");
  return static_cast<int>(v);
}

struct Field {
  std::string section, key;
  bool list;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<ojson(const ExperimentConfig&)> get;
};

#define SF_REAL(sec, name, member)                                                                          \
  Field {                                                                                                   \
    sec, name, false, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
        [](const ExperimentConfig& c) { return ojson(c.member); }                                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SF_REAL("params", "alpha", params.alpha),
      SF_REAL("params", "rho", params.rho),
      SF_REAL("params", "beta", params.beta),
      SF_REAL("params", "gamma", params.gamma),
      SF_REAL("params", "lambda", params.lambda),
      SF_REAL("params", "eps", params.eps),
      SF_REAL("params", "nu", params.nu),
      SF_REAL("params", "T", params.T),
      Field{"couplings", "level", false,
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.level = coupling_level_from_string(v);
            },
            [](const ExperimentConfig& c) { return ojson(to_string(c.level)); }},
      SF_REAL("couplings", "a_F", coeffs.a_F),
      SF_REAL("couplings", "b_F", coeffs.b_F),
      SF_REAL("couplings", "c_F", coeffs.c_F),
      SF_REAL("couplings", "a_G", coeffs.a_G),
      SF_REAL("couplings", "b_G", coeffs.b_G),
      SF_REAL("couplings", "c_G", coeffs.c_G),
      SF_REAL("couplings", "a_1", coeffs.a_1),
      SF_REAL("couplings", "c_1", coeffs.c_1),
      SF_REAL("couplings", "M", coeffs.M),
      SF_REAL("couplings", "c_2", coeffs.c_2),
      Field{"grid", "n_modes", false,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_modes = to_int(k, v); },
            [](const ExperimentConfig& c) { return ojson(c.n_modes); }},
      Field{"scheme", "kind", false,
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.scheme.kind = scheme_from_string(v);
            },
            [](const ExperimentConfig& c) { return ojson(to_string(c.scheme.kind)); }},
      SF_REAL("scheme", "dt_slow", scheme.dt_slow),
      SF_REAL("scheme", "dt_fast", scheme.dt_fast),
      Field{"ensemble", "n_paths", false,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_paths = to_int(k, v); },
            [](const ExperimentConfig& c) { return ojson(c.n_paths); }},
      Field{"ensemble", "checkpoints", true,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.checkpoints = parse_list(k, v); },
            [](const ExperimentConfig& c) { return ojson(checkpoint_times(c)); }},
      Field{"ensemble", "seed_base", false,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed_base = parse_u64(k, v); },
            [](const ExperimentConfig& c) { return ojson(c.seed_base); }},
      Field{"ensemble", "moment_powers", true,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.moment_powers = parse_list(k, v);
            },
            [](const ExperimentConfig& c) { return ojson(c.moment_powers); }},
      SF_REAL("ensemble", "max_abort_fraction", max_abort_fraction),
      SF_REAL("initial", "u_norm", initial.u_norm),
      SF_REAL("initial", "u_decay", initial.u_decay),
      Field{"initial", "u_phase_seed", false,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.initial.u_phase_seed = parse_u64(k, v);
            },
            [](const ExperimentConfig& c) { return ojson(c.initial.u_phase_seed); }},
      SF_REAL("initial", "v_norm", initial.v_norm),
      SF_REAL("fbar", "dt", frozen.dt),
      SF_REAL("fbar", "burn_in_multiplier", frozen.burn_in_multiplier),
      SF_REAL("fbar", "horizon", frozen.horizon),
      Field{"fbar", "n_replicas", false,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.frozen.n_replicas = to_int(k, v);
            },
            [](const ExperimentConfig& c) { return ojson(c.frozen.n_replicas); }},
      Field{"fbar", "seed_base", false,
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.frozen.seed_base = parse_u64(k, v);
            },
            [](const ExperimentConfig& c) { return ojson(c.frozen.seed_base); }},
      SF_REAL("fbar", "tolerance", fbar_tolerance),
      SF_REAL("fbar", "node_spacing", fbar_node_spacing),
      Field{"output", "directory", false,
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output.directory = v; },
            [](const ExperimentConfig& c) { return ojson(c.output.directory); }},
      Field{"output", "prefix", false,
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output.prefix = v; },
            [](const ExperimentConfig& c) { return ojson(c.output.prefix); }},
      Field{"output", "format", false,
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output.format = v; },
            [](const ExperimentConfig& c) { return ojson(c.output.format); }},
  };
  return f;
}

#undef SF_REAL

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& f : fields())
    if (f.section == section) return true;
  return false;
}

std::string node_text(const YAML::Node& node, const Field& f, const std::string& dotted) {
  if (node.IsScalar()) return node.Scalar();
  if (node.IsSequence() && f.list) {
    std::string s;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].IsScalar()) throw_config("'" + dotted + "': list entries must be scalars");
      if (i) s += ',';
      s += node[i].Scalar();
    }
    return s;
  }
  if (node.IsNull()) throw_config("'" + dotted + "': missing value");
  throw_config("'" + dotted + "': expected a " + std::string(f.list ? "list" : "scalar"));
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) c.output.directory = dir;
  return c;
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw_config(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg = default_config();
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw_config("config root must be a mapping of sections");
  for (const auto& sec : root) {
    const std::string section = sec.first.as<std::string>();
    if (!known_section(section)) throw_config("unknown config section '" + section + "'");
    if (sec.second.IsNull()) continue;
    if (!sec.second.IsMap()) throw_config("config section '" + section + "' must be a mapping");
    for (const auto& kv : sec.second) {
      const std::string key = kv.first.as<std::string>();
      const std::string dotted = section + "." + key;
      const Field* f = find_field(section, key);
      if (!f) throw_config("unknown config key '" + dotted + "'");
      f->set(cfg, dotted, node_text(kv.second, *f, dotted));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void set_config_value(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) throw_config("override key must be section.key, got '" + dotted_key + "'");
  const Field* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (!f) throw_config("unknown config key '" + dotted_key + "'");
  f->set(cfg, dotted_key, value);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  ojson j = ojson::object();
  for (const auto& f : fields()) {
    if (!j.contains(f.section)) j[f.section] = ojson::object();
    j[f.section][f.key] = f.get(cfg);
  }
  return j;
}

std::string config_to_yaml(const ExperimentConfig& cfg) {
  const ojson j = config_to_json(cfg);
  std::ostringstream os;
  for (const auto& [section, body] : j.items()) {
    os << section << ":\n";
    for (const auto& [key, value] : body.items()) os << "  " << key << ": " << value.dump() << "\n";
  }
  return os.str();
}

}  // namespace slowfast
