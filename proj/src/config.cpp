#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "tcrisis/problem.hpp"

namespace tcrisis {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + text +
                      "'");
  }
  if (trim(std::string_view(text).substr(used)).size() != 0) {
    throw ConfigError("key '" + key + "': trailing text in '" + text + "'");
  }
  return value;
}

int to_int(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != static_cast<int>(v)) {
    throw ConfigError("key '" + key + "': expected an integer");
  }
  return static_cast<int>(v);
}

Vec to_vector(const std::string& key, const std::string& text, int dim) {
  auto parts = split(text, ',');
  if (parts.size() == 1 && dim > 1) {
    // Allow whitespace separation as well.
    std::istringstream in(text);
    parts.clear();
    std::string tok;
    while (in >> tok) parts.push_back(tok);
  }
  if (static_cast<int>(parts.size()) != dim) {
    throw ConfigError("key '" + key + "': expected " + std::to_string(dim) +
                      " values");
  }
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = to_double(key, parts[i]);
  return v;
}

// Bounds implied by constraints a * u_i + b <= 0; other constraints leave
// the box unbounded.
void implied_box(const std::vector<Polynomial>& c, Vec& lower, Vec& upper) {
  for (const Polynomial& poly : c) {
    if (poly.degree() > 1) continue;
    double a = 0.0, b = 0.0;
    int var = -1;
    bool single = true;
    for (const auto& term : poly.terms()) {
      const auto it = std::find(term.powers.begin(), term.powers.end(), 1);
      if (it == term.powers.end()) {
        b += term.coefficient;
        continue;
      }
      const int i = static_cast<int>(it - term.powers.begin());
      if (var >= 0 && var != i) single = false;
      var = i;
      a += term.coefficient;
    }
    if (!single || var < 0 || a == 0.0) continue;
    if (a > 0.0) {
      upper[var] = std::min(upper[var], -b / a);
    } else {
      lower[var] = std::max(lower[var], -b / a);
    }
  }
}

}  // namespace

ControlSignal parse_control(const std::string& text, int m, double horizon) {
  const auto segments = split(text, ';');
  if (segments.size() == 1 && segments[0].find(':') == std::string::npos) {
    return ControlSignal::constant(
        0.0, horizon, 1, to_vector("initial_control", segments[0], m),
        TimeDomain::kPhysical);
  }
  std::vector<double> nodes;
  Mat values(m, static_cast<int>(segments.size()));
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto colon = segments[k].find(':');
    if (colon == std::string::npos) {
      throw ConfigError("initial_control: segment '" + segments[k] +
                        "' lacks 'start: value'");
    }
    nodes.push_back(
        to_double("initial_control", trim(segments[k].substr(0, colon))));
    values.col(static_cast<int>(k)) = to_vector(
        "initial_control", trim(segments[k].substr(colon + 1)), m);
  }
  if (nodes.front() != 0.0) {
    throw ConfigError("initial_control: first segment must start at 0");
  }
  nodes.push_back(horizon);
  try {
    return ControlSignal(std::move(nodes), std::move(values),
                         TimeDomain::kPhysical);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("initial_control: ") + e.what());
  }
}

ProblemConfig parse_problem_config(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (!entries.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
  }

  auto take = [&](const std::string& key) -> std::string {
    auto it = entries.find(key);
    if (it == entries.end()) throw ConfigError("missing key '" + key + "'");
    std::string v = it->second;
    entries.erase(it);
    return v;
  };

  ProblemConfig config;
  ProblemSpec& spec = config.spec;
  if (entries.count("name")) spec.name = take("name");
  spec.n = to_int("n", take("n"));
  spec.m = to_int("m", take("m"));
  if (spec.n < 1 || spec.m < 1) throw ConfigError("n and m must be positive");
  spec.horizon = to_double("horizon", take("horizon"));
  spec.x0 = to_vector("x0", take("x0"), spec.n);

  const int nx = spec.n;
  const int nu = spec.m;
  std::vector<Polynomial> f;
  for (int i = 1; i <= nx; ++i) {
    f.push_back(
        Polynomial::parse(take("f" + std::to_string(i)), nx, nu));
  }
  std::vector<Polynomial> c;
  for (int i = 1; entries.count("c" + std::to_string(i)); ++i) {
    c.push_back(Polynomial::parse(take("c" + std::to_string(i)), 0, nu));
  }
  if (c.empty()) throw ConfigError("at least one constraint c1 is required");
  spec.l = static_cast<int>(c.size());

  spec.f = SmoothMap::from_polynomials(nx, nu, std::move(f));
  spec.g = SmoothMap::from_polynomials(nx, 0, {Polynomial::parse(take("g"), nx, 0)});
  spec.c = SmoothMap::from_polynomials(0, nu, c);
  spec.phi = SmoothMap::from_polynomials(
      nx, 0, {Polynomial::parse(take("phi"), nx, 0)});

  const double inf = std::numeric_limits<double>::infinity();
  Vec lower = Vec::Constant(nu, -inf);
  Vec upper = Vec::Constant(nu, inf);
  implied_box(c, lower, upper);
  spec.box_lower = entries.count("box_lower")
                       ? to_vector("box_lower", take("box_lower"), nu)
                       : lower;
  spec.box_upper = entries.count("box_upper")
                       ? to_vector("box_upper", take("box_upper"), nu)
                       : upper;
  if (entries.count("initial_control")) {
    spec.initial_guess =
        parse_control(take("initial_control"), nu, spec.horizon);
  }
  if (spec.name.empty()) spec.name = "config";

  for (const auto& [key, value] : entries) {
    if (key.size() > 1 && (key[0] == 'f' || key[0] == 'c') &&
        std::all_of(key.begin() + 1, key.end(),
                    [](char ch) { return std::isdigit(ch); })) {
      throw ConfigError("unexpected map entry '" + key + "'");
    }
  }
  config.options = std::move(entries);
  try {
    spec.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

ProblemConfig load_problem_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open problem file '" + path + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_problem_config(buffer.str());
}

}  // namespace tcrisis
