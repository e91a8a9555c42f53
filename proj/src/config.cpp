#include "config.hpp"

#include "shapeinv/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace shapeinv::cli {

namespace {

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

double parse_double(const std::string& value, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (trim(value.substr(used)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid number '" + value + "' at " + where);
}

long parse_long(const std::string& value, const std::string& where) {
  try {
    std::size_t used = 0;
    const long x = std::stol(value, &used);
    if (trim(value.substr(used)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid integer '" + value + "' at " + where);
}

bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("invalid boolean '" + value + "' at " + where);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, const std::string& where, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse(item, where));
  }
  if (out.empty()) throw ConfigError("empty list at " + where);
  return out;
}

// shape coefficient keys: <prefix>r0, <prefix>a<k>, <prefix>b<k>
bool apply_shape_key(RadialShape<double>& shape, const std::string& rest,
                     const std::string& value, const std::string& where) {
  if (rest == "r0") {
    shape.r0 = parse_double(value, where);
    return true;
  }
  if (rest.size() > 1 && (rest[0] == 'a' || rest[0] == 'b')) {
    const long k = parse_long(rest.substr(1), where);
    if (k < 1 || k > shape.max_mode())
      throw ConfigError("mode " + std::to_string(k) + " out of range at " + where);
    (rest[0] == 'a' ? shape.cos_coeffs : shape.sin_coeffs)[k - 1] = parse_double(value, where);
    return true;
  }
  return false;
}

std::string list_to_string(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + format_full(v[i]);
  return out;
}

std::string list_to_string(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

BoundaryField<double> ExperimentConfig::neumann_datum() const {
  if (g_N_mode == 0) return BoundaryField<double>::constant(1.0, N_theta);
  return BoundaryField<double>::harmonic(g_N_mode, false, N_theta);
}

RadialShape<double> ExperimentConfig::initial_shape() const {
  if (init_shape_given) return init_shape;
  return make_circle((r_min + R_K) / 2.0, K_max);
}

CauchyData<double> ExperimentConfig::make_data() const {
  const auto g_N = neumann_datum();
  if (data_mode == "same") {
    CauchyData<double> data;
    data.g_N = g_N;
    data.g_D = forward_trace(true_shape, domain(), g_N, mesh_params(), N_theta);
    data.noise_level = noise_level;
    data.seed = seed;
    data.fine_factor = 1;
    if (noise_level > 0.0)
      throw ConfigError("data_mode = same supports only noiseless data");
    data.validate();
    return data;
  }
  return synthesize_data(true_shape, domain(), g_N, noise_level, seed, fine_factor,
                         mesh_params(), N_theta);
}

OptimizerConfig<double> ExperimentConfig::optimizer() const {
  OptimizerConfig<double> cfg;
  cfg.eta = eta;
  cfg.max_iters = max_iters;
  cfg.armijo_slope = armijo_slope;
  cfg.backtrack_ratio = backtrack;
  cfg.initial_step = initial_step;
  cfg.grad_tolerance = grad_tol;
  cfg.k_active = K_active;
  cfg.mode_schedule = mode_schedule;
  if (epsilon_cone > 0.0) cfg.epsilon_cone = epsilon_cone;
  return cfg;
}

void ExperimentConfig::validate() const {
  try {
    domain().validate();
    optimizer().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (K_max < 0 || K_max > 128) throw ConfigError("K_max out of range");
  if (N_theta < 4 * std::max(K_max, 1) || (N_theta & (N_theta - 1)) != 0)
    throw ConfigError("N_theta must be a power of two >= 4 K_max");
  if (n_radial < 2 || n_angular < 8 || n_angular < 4 * effective_max_mode(true_shape))
    throw ConfigError("mesh resolution too coarse for the configured shapes");
  if (K_active < 0 || K_active > K_max) throw ConfigError("K_active must lie in [0, K_max]");
  if (n_angular < 4 * K_active)
    throw ConfigError("n_angular must be >= 4 K_active (the optimizer may excite those modes)");
  if (fine_factor < 2) throw ConfigError("fine_factor must be >= 2");
  if (noise_level < 0.0) throw ConfigError("noise_level must be >= 0");
  if (data_mode != "fine" && data_mode != "same")
    throw ConfigError("data_mode must be 'fine' or 'same'");
  if (g_N_mode < 0 || g_N_mode > N_theta / 4) throw ConfigError("g_N_mode out of range");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (eta_steps < 0) throw ConfigError("eta_steps must be >= 0");
  if (k_basis < 0 || k_basis > K_max) throw ConfigError("k_basis must lie in [0, K_max]");
  for (const double s : norm_exponents)
    if (s != 0.0 && s != 0.5 && s != 1.0)
      throw ConfigError("norm_exponents entries must be 0, 0.5 or 1");
  for (const double e : epsilon_list)
    if (e <= 0.0) throw ConfigError("epsilon_list entries must be positive");
  if (fd_steps.empty()) throw ConfigError("fd_steps must be nonempty");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "R_Omega = " << format_full(R_Omega) << "\n";
  os << "R_K = " << format_full(R_K) << "\n";
  os << "r_min = " << format_full(r_min) << "\n";
  os << "K_max = " << K_max << "\n";
  auto dump_shape = [&](const char* prefix, const RadialShape<double>& s) {
    os << prefix << "r0 = " << format_full(s.r0) << "\n";
    for (Index k = 1; k <= s.max_mode(); ++k) {
      if (s.cos_coeffs[k - 1] != 0.0)
        os << prefix << "a" << k << " = " << format_full(s.cos_coeffs[k - 1]) << "\n";
      if (s.sin_coeffs[k - 1] != 0.0)
        os << prefix << "b" << k << " = " << format_full(s.sin_coeffs[k - 1]) << "\n";
    }
  };
  dump_shape("true_", true_shape);
  dump_shape("init_", initial_shape());
  os << "g_N_mode = " << g_N_mode << "\n";
  os << "noise_level = " << format_full(noise_level) << "\n";
  os << "seed = " << seed << "\n";
  os << "fine_factor = " << fine_factor << "\n";
  os << "N_theta = " << N_theta << "\n";
  os << "data_mode = " << data_mode << "\n";
  os << "n_radial = " << n_radial << "\n";
  os << "n_angular = " << n_angular << "\n";
  os << "grading = " << format_full(grading) << "\n";
  os << "eta = " << format_full(eta) << "\n";
  os << "max_iters = " << max_iters << "\n";
  os << "armijo_slope = " << format_full(armijo_slope) << "\n";
  os << "backtrack = " << format_full(backtrack) << "\n";
  os << "initial_step = " << format_full(initial_step) << "\n";
  os << "grad_tol = " << format_full(grad_tol) << "\n";
  os << "K_active = " << K_active << "\n";
  os << "epsilon_cone = " << format_full(epsilon_cone) << "\n";
  os << "mode_schedule = " << (mode_schedule ? "true" : "false") << "\n";
  os << "eta0 = " << format_full(eta0) << "\n";
  os << "eta_steps = " << eta_steps << "\n";
  os << "hessian_eta_list = " << list_to_string(hessian_eta_list) << "\n";
  os << "norm_exponents = " << list_to_string(norm_exponents) << "\n";
  os << "noise_list = " << list_to_string(noise_list) << "\n";
  os << "seeds = " << list_to_string(seeds) << "\n";
  if (!epsilon_list.empty()) os << "epsilon_list = " << list_to_string(epsilon_list) << "\n";
  os << "fd_steps = " << list_to_string(fd_steps) << "\n";
  os << "k_basis = " << k_basis << "\n";
  os << "out = " << out << "\n";
  os << "jobs = " << jobs << "\n";
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string text = serialize();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream is(text);
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    std::string key, value;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      key = trim(line.substr(0, eq));
      value = trim(line.substr(eq + 1));
    } else {
      const auto space = line.find_first_of(" \t");
      if (space == std::string::npos)
        throw ConfigError("expected 'key = value' at " + where);
      key = trim(line.substr(0, space));
      value = trim(line.substr(space + 1));
    }
    if (key.empty() || value.empty())
      throw ConfigError("expected 'key = value' at " + where);
    entries.emplace_back(key, value + "\x1f" + where);
  }
  return entries;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_config_text(buffer.str(), path);
}

std::vector<std::pair<std::string, std::string>> parse_override_flags(
    const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string token = tokens[i];
    if (token.rfind("--", 0) != 0)
      throw ConfigError("unexpected argument '" + token + "' (overrides are --key value)");
    token = token.substr(2);
    std::string key, value;
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      key = token.substr(0, eq);
      value = token.substr(eq + 1);
    } else {
      key = token;
      if (i + 1 >= tokens.size())
        throw ConfigError("flag --" + key + " is missing its value");
      value = tokens[++i];
    }
    entries.emplace_back(key, value + "\x1f" + "flag --" + key);
  }
  return entries;
}

void apply_entries(ExperimentConfig& config,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
  // K_max first: it sizes the coefficient arrays the shape keys write into.
  for (const auto& [key, packed] : entries) {
    if (key != "K_max") continue;
    const auto sep = packed.find('\x1f');
    config.K_max = int(parse_long(packed.substr(0, sep), packed.substr(sep + 1)));
    if (config.K_max < 0) throw ConfigError("K_max must be >= 0");
  }
  if (config.true_shape.max_mode() != config.K_max)
    config.true_shape = make_circle(0.5, config.K_max);
  if (config.init_shape.max_mode() != config.K_max)
    config.init_shape = make_circle((config.r_min + config.R_K) / 2.0, config.K_max);

  for (const auto& [key, packed] : entries) {
    const auto sep = packed.find('\x1f');
    const std::string value = packed.substr(0, sep);
    const std::string where = packed.substr(sep + 1);

    if (key == "K_max") continue;  // already applied
    if (key.rfind("true_", 0) == 0) {
      if (apply_shape_key(config.true_shape, key.substr(5), value, where)) continue;
      throw ConfigError("unknown key '" + key + "' at " + where);
    }
    if (key.rfind("init_", 0) == 0) {
      if (apply_shape_key(config.init_shape, key.substr(5), value, where)) {
        config.init_shape_given = true;
        continue;
      }
      throw ConfigError("unknown key '" + key + "' at " + where);
    }

    if (key == "R_Omega") config.R_Omega = parse_double(value, where);
    else if (key == "R_K") config.R_K = parse_double(value, where);
    else if (key == "r_min") config.r_min = parse_double(value, where);
    else if (key == "g_N_mode") config.g_N_mode = int(parse_long(value, where));
    else if (key == "noise_level") config.noise_level = parse_double(value, where);
    else if (key == "seed") config.seed = std::uint64_t(parse_long(value, where));
    else if (key == "fine_factor") config.fine_factor = int(parse_long(value, where));
    else if (key == "N_theta") config.N_theta = int(parse_long(value, where));
    else if (key == "data_mode") config.data_mode = value;
    else if (key == "n_radial") config.n_radial = int(parse_long(value, where));
    else if (key == "n_angular") config.n_angular = int(parse_long(value, where));
    else if (key == "grading") config.grading = parse_double(value, where);
    else if (key == "eta") config.eta = parse_double(value, where);
    else if (key == "max_iters") config.max_iters = int(parse_long(value, where));
    else if (key == "armijo_slope") config.armijo_slope = parse_double(value, where);
    else if (key == "backtrack") config.backtrack = parse_double(value, where);
    else if (key == "initial_step") config.initial_step = parse_double(value, where);
    else if (key == "grad_tol") config.grad_tol = parse_double(value, where);
    else if (key == "K_active") config.K_active = int(parse_long(value, where));
    else if (key == "epsilon_cone") config.epsilon_cone = parse_double(value, where);
    else if (key == "mode_schedule") config.mode_schedule = parse_bool(value, where);
    else if (key == "eta0") config.eta0 = parse_double(value, where);
    else if (key == "eta_steps") config.eta_steps = int(parse_long(value, where));
    else if (key == "hessian_eta_list")
      config.hessian_eta_list = parse_list<double>(value, where, parse_double);
    else if (key == "norm_exponents")
      config.norm_exponents = parse_list<double>(value, where, parse_double);
    else if (key == "noise_list")
      config.noise_list = parse_list<double>(value, where, parse_double);
    else if (key == "seeds")
      config.seeds = parse_list<std::uint64_t>(value, where, [](const std::string& v,
                                                                const std::string& w) {
        return std::uint64_t(parse_long(v, w));
      });
    else if (key == "epsilon_list")
      config.epsilon_list = parse_list<double>(value, where, parse_double);
    else if (key == "fd_steps")
      config.fd_steps = parse_list<double>(value, where, parse_double);
    else if (key == "k_basis") config.k_basis = int(parse_long(value, where));
    else if (key == "out") config.out = value;
    else if (key == "jobs") config.jobs = int(parse_long(value, where));
    else throw ConfigError("unknown key '" + key + "' at " + where);
  }
}

ExperimentConfig build_config(const std::string& config_path,
                              const std::vector<std::string>& override_tokens) {
  ExperimentConfig config;
  std::vector<std::pair<std::string, std::string>> entries;
  if (!config_path.empty()) entries = parse_config_file(config_path);
  const auto flags = parse_override_flags(override_tokens);
  entries.insert(entries.end(), flags.begin(), flags.end());
  apply_entries(config, entries);
  config.validate();
  return config;
}

}  // namespace shapeinv::cli
