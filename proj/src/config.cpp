#include "deficient/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace deficient {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string s = "invalid scenario:";
  for (const auto& i : issues) s += "\n  " + i;
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Removes a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (!quoted && s[i] == '#') return s.substr(0, i);
  }
  return s;
}

struct Entry {
  std::string value;
  int line = 0;
};

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = t.data() + t.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

bool parse_long(const std::string& text, long& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_u64(const std::string& text, std::uint64_t& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_word(const std::string& text, std::string& out) {
  const std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') {
    out = t.substr(1, t.size() - 2);
    return true;
  }
  if (t.empty() || t.find_first_of(" \t\"[],") != std::string::npos) return false;
  out = t;
  return true;
}

bool split_list(const std::string& text, std::vector<std::string>& items) {
  const std::string t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') return false;
  const std::string inner = trim(t.substr(1, t.size() - 2));
  items.clear();
  if (inner.empty()) return true;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) return false;
    items.push_back(item);
  }
  return true;
}

using Setter = std::function<bool(const std::string&)>;

Setter number(double& x) {
  return [&x](const std::string& v) { return parse_double(v, x); };
}
Setter integer(long& x) {
  return [&x](const std::string& v) { return parse_long(v, x); };
}
Setter index_value(Index& x) {
  return [&x](const std::string& v) {
    long tmp = 0;
    if (!parse_long(v, tmp)) return false;
    x = tmp;
    return true;
  };
}
Setter seed_value(std::uint64_t& x) {
  return [&x](const std::string& v) { return parse_u64(v, x); };
}
Setter word(std::string& x) {
  return [&x](const std::string& v) { return parse_word(v, x); };
}
Setter numbers(std::vector<double>& xs) {
  return [&xs](const std::string& v) {
    std::vector<std::string> items;
    if (!split_list(v, items)) return false;
    std::vector<double> out;
    for (const auto& it : items) {
      double x = 0;
      if (!parse_double(it, x)) return false;
      out.push_back(x);
    }
    xs = std::move(out);
    return true;
  };
}
Setter vector_value(VectorXd& xs) {
  return [&xs](const std::string& v) {
    std::vector<double> tmp;
    if (!numbers(tmp)(v)) return false;
    xs = Eigen::Map<const VectorXd>(tmp.data(), static_cast<Index>(tmp.size()));
    return true;
  };
}
Setter integers(std::vector<long>& xs) {
  return [&xs](const std::string& v) {
    std::vector<std::string> items;
    if (!split_list(v, items)) return false;
    std::vector<long> out;
    for (const auto& it : items) {
      long x = 0;
      if (!parse_long(it, x)) return false;
      out.push_back(x);
    }
    xs = std::move(out);
    return true;
  };
}
Setter words(std::vector<std::string>& xs) {
  return [&xs](const std::string& v) {
    std::vector<std::string> items;
    if (!split_list(v, items)) return false;
    std::vector<std::string> out;
    for (const auto& it : items) {
      std::string w;
      if (!parse_word(it, w)) return false;
      out.push_back(w);
    }
    xs = std::move(out);
    return true;
  };
}

} // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
  std::map<std::string, Entry> entries;
  std::vector<std::string> order;
  std::vector<std::string> issues;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError(origin, lineno, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty() || section.find_first_of(" \t[]") != std::string::npos) {
        throw ParseError(origin, lineno, "malformed section header");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find_first_of(" \t") != std::string::npos) throw ParseError(origin, lineno, "malformed key");
    if (value.empty()) throw ParseError(origin, lineno, "missing value for '" + key + "'");
    if (section.empty()) throw ParseError(origin, lineno, "key '" + key + "' outside any section");
    if ((value.front() == '[') != (value.back() == ']')) throw ParseError(origin, lineno, "unbalanced brackets");
    const std::string path = section + "." + key;
    if (entries.count(path)) {
      issues.push_back(path + ": duplicate key (line " + std::to_string(lineno) + ")");
      continue;
    }
    entries[path] = {value, lineno};
    order.push_back(path);
  }

  ScenarioConfig cfg;
  std::string sampler_family = to_string(cfg.sampler.family);
  const std::map<std::string, std::pair<Setter, const char*>> fields = {
      {"scenario.name", {word(cfg.name), "a word or quoted string"}},
      {"scenario.d", {integer(cfg.d), "an integer"}},
      {"kernel.family", {word(cfg.kernel.family), "a family name"}},
      {"kernel.a", {number(cfg.kernel.a), "a number"}},
      {"kernel.amplitude", {number(cfg.kernel.amplitude), "a number"}},
      {"potential.family", {word(cfg.potential.family), "a family name"}},
      {"potential.k2", {number(cfg.potential.k2), "a number"}},
      {"potential.k4", {number(cfg.potential.k4), "a number"}},
      {"potential.gamma", {number(cfg.potential.gamma), "a number"}},
      {"potential.stiffness", {numbers(cfg.potential.stiffness), "a list of numbers"}},
      {"bounding.family", {word(cfg.bounding.family), "a family name"}},
      {"bounding.coefficients", {numbers(cfg.bounding.coefficients), "a list of numbers"}},
      {"bounding.powers", {numbers(cfg.bounding.powers), "a list of numbers"}},
      {"bounding.amplitude", {number(cfg.bounding.amplitude), "a number"}},
      {"bounding.frequency", {number(cfg.bounding.frequency), "a number"}},
      {"bounding.slope", {number(cfg.bounding.slope), "a number"}},
      {"sampler.family", {word(sampler_family), "a family name"}},
      {"sampler.n", {index_value(cfg.sampler.n), "an integer"}},
      {"sampler.seed", {seed_value(cfg.sampler.seed), "a nonnegative integer"}},
      {"sampler.sigma_p", {number(cfg.sampler.sigma_p), "a number"}},
      {"sampler.sigma_q", {number(cfg.sampler.sigma_q), "a number"}},
      {"sampler.radius", {number(cfg.sampler.radius), "a number"}},
      {"sampler.p_radius", {number(cfg.sampler.p_radius), "a number"}},
      {"sampler.p0", {vector_value(cfg.sampler.p0), "a list of numbers"}},
      {"sampler.alpha0", {number(cfg.sampler.alpha0), "a number"}},
      {"flow.epsilon", {number(cfg.flow.epsilon), "a number"}},
      {"flow.epsilons", {numbers(cfg.flow.epsilons), "a list of numbers"}},
      {"flow.T", {number(cfg.flow.T), "a number"}},
      {"flow.n", {integer(cfg.flow.n), "an integer"}},
      {"flow.ns", {integers(cfg.flow.ns), "a list of integers"}},
      {"flow.ode_tol", {number(cfg.flow.ode_tol), "a number"}},
      {"flow.x_max", {number(cfg.flow.x_max), "a number"}},
      {"flow.h_min", {number(cfg.flow.h_min), "a number"}},
      {"probes.times", {numbers(cfg.probes.times), "a list of numbers"}},
      {"probes.alphas", {numbers(cfg.probes.alphas), "a list of numbers"}},
      {"probes.battery_count", {integer(cfg.probes.battery_count), "an integer"}},
      {"probes.battery_radius", {number(cfg.probes.battery_radius), "a number"}},
      {"probes.battery_spread", {number(cfg.probes.battery_spread), "a number"}},
      {"probes.ring_count", {integer(cfg.probes.ring_count), "an integer"}},
      {"probes.ring_step", {number(cfg.probes.ring_step), "a number"}},
      {"probes.ring_horizon", {number(cfg.probes.ring_horizon), "a number"}},
      {"probes.ell_fraction", {number(cfg.probes.ell_fraction), "a number"}},
      {"probes.tau_rings", {numbers(cfg.probes.tau_rings), "a list of numbers"}},
      {"probes.eta", {number(cfg.probes.eta), "a number"}},
      {"outputs.directory", {word(cfg.outputs.directory), "a path"}},
      {"outputs.formats", {words(cfg.outputs.formats), "a list of words"}},
  };

  for (const auto& path : order) {
    const Entry& e = entries[path];
    const auto it = fields.find(path);
    if (it == fields.end()) {
      issues.push_back(path + ": unknown key (line " + std::to_string(e.line) + ")");
      continue;
    }
    if (!it->second.first(e.value)) {
      issues.push_back(path + ": expected " + it->second.second + ", got '" + e.value + "' (line " +
                       std::to_string(e.line) + ")");
    }
  }
  try {
    cfg.sampler.family = parse_sampler_family(sampler_family);
  } catch (const std::invalid_argument&) {
    issues.push_back("sampler.family: unknown family '" + sampler_family + "'");
  }
  for (auto& s : validate(cfg)) issues.push_back(std::move(s));
  if (!issues.empty()) throw ValidationError(issues);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> issues;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) issues.push_back(msg);
  };
  need(cfg.d >= 1, "scenario.d: must be >= 1");

  static const std::set<std::string> kernels{"none", "bump"};
  need(kernels.count(cfg.kernel.family) > 0, "kernel.family: unknown family '" + cfg.kernel.family + "'");
  if (cfg.kernel.family == "bump") need(cfg.kernel.a > 0, "kernel.a: must be > 0");

  static const std::set<std::string> potentials{"zero", "power", "anisotropic_harmonic"};
  need(potentials.count(cfg.potential.family) > 0, "potential.family: unknown family '" + cfg.potential.family + "'");
  if (cfg.potential.family == "power") need(cfg.potential.gamma >= 2, "potential.gamma: must be >= 2");
  if (cfg.potential.family == "anisotropic_harmonic") {
    need(static_cast<long>(cfg.potential.stiffness.size()) == cfg.d, "potential.stiffness: length must equal scenario.d");
  }

  static const std::set<std::string> boundings{"none", "polynomial", "sine_linear", "matched"};
  need(boundings.count(cfg.bounding.family) > 0, "bounding.family: unknown family '" + cfg.bounding.family + "'");
  if (cfg.bounding.family == "polynomial") {
    need(!cfg.bounding.coefficients.empty() && cfg.bounding.coefficients.size() == cfg.bounding.powers.size(),
         "bounding.powers: must match bounding.coefficients in length (nonempty)");
    for (double k : cfg.bounding.powers) need(k >= 0, "bounding.powers: entries must be >= 0");
  }
  if (cfg.bounding.family == "matched") {
    need(cfg.potential.family == "power" || cfg.potential.family == "zero",
         "bounding.family: 'matched' needs a radial potential family");
  }

  need(cfg.sampler.n >= 1, "sampler.n: must be >= 1");
  need(cfg.sampler.sigma_p >= 0, "sampler.sigma_p: must be >= 0");
  need(cfg.sampler.sigma_q >= 0, "sampler.sigma_q: must be >= 0");
  need(cfg.sampler.radius > 0, "sampler.radius: must be > 0");
  need(cfg.sampler.p_radius >= 0, "sampler.p_radius: must be >= 0");
  need(cfg.sampler.alpha0 >= 0, "sampler.alpha0: must be >= 0");
  if (cfg.sampler.p0.size() != 0) need(cfg.sampler.p0.size() == cfg.d, "sampler.p0: length must equal scenario.d");

  const auto& f = cfg.flow;
  need(f.epsilon >= 0, "flow.epsilon: must be >= 0");
  for (std::size_t k = 0; k < f.epsilons.size(); ++k) {
    need(f.epsilons[k] >= 0, "flow.epsilons: entries must be >= 0");
    if (k > 0 && !(f.epsilons[k] < f.epsilons[k - 1])) {
      issues.push_back("flow.epsilons: not strictly decreasing");
      break;
    }
  }
  need(f.T > 0, "flow.T: must be > 0");
  need(f.n >= 1, "flow.n: must be >= 1");
  for (std::size_t k = 0; k < f.ns.size(); ++k) {
    need(f.ns[k] >= 1, "flow.ns: entries must be >= 1");
    if (k > 0 && !(f.ns[k] > f.ns[k - 1])) {
      issues.push_back("flow.ns: not strictly increasing");
      break;
    }
  }
  need(f.ode_tol > 0, "flow.ode_tol: must be > 0");
  need(f.x_max > 0, "flow.x_max: must be > 0");
  need(f.h_min >= 0, "flow.h_min: must be >= 0");
  if (f.n >= 1 && f.T > 0) {
    const double hmin = f.h_min > 0 ? f.h_min : 1e-12 * f.T;
    need(f.T / static_cast<double>(f.n) > hmin, "flow.h_min: step T/n must exceed h_min");
  }

  const auto& p = cfg.probes;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    need(p.times[k] > 0 && p.times[k] <= f.T * (1 + 1e-12), "probes.times: entries must lie in (0, T]");
    if (k > 0 && !(p.times[k] > p.times[k - 1])) {
      issues.push_back("probes.times: not strictly increasing");
      break;
    }
  }
  auto format_number = [](double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  };
  if (f.T > 0) {
    std::vector<long> grids{f.n};
    grids.insert(grids.end(), f.ns.begin(), f.ns.end());
    for (double t : p.times) {
      for (long n : grids) {
        if (n < 1) continue;
        const double k = t * static_cast<double>(n) / f.T;
        if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
          issues.push_back("probes.times: " + format_number(t) + " is not a multiple of T/" + std::to_string(n));
          break;
        }
      }
    }
  }
  for (double a : p.alphas) need(a >= 0, "probes.alphas: entries must be >= 0");
  need(p.battery_count >= 0, "probes.battery_count: must be >= 0");
  need(p.battery_radius > 0, "probes.battery_radius: must be > 0");
  need(p.ring_count >= 0, "probes.ring_count: must be >= 0");
  need(p.ring_step > 0, "probes.ring_step: must be > 0");
  need(p.ring_horizon > 0, "probes.ring_horizon: must be > 0");
  need(p.ell_fraction > 0 && p.ell_fraction < 1, "probes.ell_fraction: must lie in (0, 1)");
  need(p.eta >= 0, "probes.eta: must be >= 0");
  if (p.ring_count > 0) {
    need(cfg.bounding.family != "none", "probes.ring_count: rings need a bounding potential");
    need(f.x_max > p.ring_horizon, "flow.x_max: must exceed probes.ring_horizon");
  }
  for (double L : p.tau_rings) need(L > 0 && L < f.x_max, "probes.tau_rings: entries must lie in (0, x_max)");
  if (!p.tau_rings.empty()) need(cfg.bounding.family != "none", "probes.tau_rings: needs a bounding potential");

  need(!cfg.outputs.directory.empty(), "outputs.directory: must be nonempty");
  for (const auto& fmt : cfg.outputs.formats) {
    need(fmt == "csv" || fmt == "json", "outputs.formats: unknown format '" + fmt + "'");
  }
  return issues;
}

} // namespace deficient
