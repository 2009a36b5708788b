#include "rbflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "rbflow/flow.hpp"

namespace rbflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true") {
    out = true;
    return true;
  }
  if (s == "false") {
    out = false;
    return true;
  }
  return false;
}

// One key=value occurrence with provenance for error messages.
struct Pair {
  std::string section;
  std::string key;
  std::string value;
  int line;
};

struct RawFile {
  std::vector<Pair> pairs;
  std::vector<std::string> errors;
};

RawFile tokenize(const std::string& text) {
  RawFile raw;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        raw.errors.push_back("line " + std::to_string(lineno) + ": malformed section header '" +
                             t + "'");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      raw.errors.push_back("line " + std::to_string(lineno) +
                           ": expected 'key = value' or a section header, got '" + t + "'");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (section.empty()) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": key '" + key +
                           "' appears before any [section] header");
      continue;
    }
    if (!seen.insert({section, key}).second) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key +
                           "' in [" + section + "]");
      continue;
    }
    raw.pairs.push_back({section, key, value, lineno});
  }
  return raw;
}

std::string where(const Pair& p) {
  return "line " + std::to_string(p.line) + ": [" + p.section + "] " + p.key;
}

// Assembles the config from tokenized pairs, appending one error per bad
// value or unknown key. Geometry keys are checked against the chosen kind.
void assemble(const RawFile& raw, ScenarioConfig& cfg, std::vector<std::string>& errors) {
  // Resolve the geometry kind first so key admission is order-independent.
  for (const Pair& p : raw.pairs) {
    if (p.section == "geometry" && p.key == "kind") {
      if (p.value == "torus") {
        cfg.geometry = GeometryKind::kTorus;
      } else if (p.value == "einstein") {
        cfg.geometry = GeometryKind::kEinstein;
      } else if (p.value == "product") {
        cfg.geometry = GeometryKind::kProduct;
      } else {
        errors.push_back(where(p) + ": unknown geometry kind '" + p.value +
                         "' (torus | einstein | product)");
      }
    }
  }

  bool saw_kind = false;
  const auto bad_value = [&errors](const Pair& p, const char* want) {
    errors.push_back(where(p) + ": cannot parse '" + p.value + "' as " + want);
  };

  for (const Pair& p : raw.pairs) {
    double d = 0.0;
    long long i = 0;
    bool b = false;
    if (p.section == "geometry") {
      if (p.key == "kind") {
        saw_kind = true;
        continue;  // handled above
      }
      const bool torus = cfg.geometry == GeometryKind::kTorus;
      const bool einst = cfg.geometry == GeometryKind::kEinstein;
      const bool prod = cfg.geometry == GeometryKind::kProduct;
      if (torus && p.key == "N") {
        if (parse_int(p.value, i)) cfg.torus.N = static_cast<int>(i);
        else bad_value(p, "an integer");
      } else if (torus && p.key == "Lx") {
        if (parse_double(p.value, d)) cfg.torus.Lx = d;
        else bad_value(p, "a number");
      } else if (torus && p.key == "Ly") {
        if (parse_double(p.value, d)) cfg.torus.Ly = d;
        else bad_value(p, "a number");
      } else if (torus && (p.key == "u0" || p.key == "phi0")) {
        const auto toks = split_ws(p.value);
        if (toks.empty()) {
          bad_value(p, "an expression id with parameters");
          continue;
        }
        InitialExpression e;
        e.id = toks[0];
        e.params.clear();
        bool ok = true;
        for (size_t k = 1; k < toks.size(); ++k) {
          double v = 0.0;
          if (!parse_double(toks[k], v)) {
            ok = false;
            break;
          }
          e.params.push_back(v);
        }
        if (!ok) {
          bad_value(p, "an expression id with numeric parameters");
          continue;
        }
        if (const auto err = expression_error(e)) {
          errors.push_back(where(p) + ": " + *err);
          continue;
        }
        (p.key == "u0" ? cfg.torus.u0 : cfg.torus.phi0) = e;
      } else if (einst && p.key == "a") {
        if (parse_double(p.value, d)) cfg.einstein.a = d;
        else bad_value(p, "a number");
      } else if (einst && p.key == "n") {
        if (parse_int(p.value, i)) cfg.einstein.n = static_cast<int>(i);
        else bad_value(p, "an integer");
      } else if (einst && p.key == "lambda0") {
        if (parse_double(p.value, d)) cfg.einstein.lambda0 = d;
        else bad_value(p, "a number");
      } else if (prod && p.key == "a0") {
        if (parse_double(p.value, d)) cfg.product.a0 = d;
        else bad_value(p, "a number");
      } else if (prod && p.key == "b0") {
        if (parse_double(p.value, d)) cfg.product.b0 = d;
        else bad_value(p, "a number");
      } else {
        errors.push_back(where(p) + ": unknown key for this geometry kind");
      }
    } else if (p.section == "flow") {
      if (p.key == "rho") {
        if (parse_double(p.value, d)) cfg.rho = d;
        else bad_value(p, "a number");
      } else if (p.key == "p") {
        if (parse_double(p.value, d)) cfg.p = d;
        else bad_value(p, "a number");
      } else if (p.key == "t_end") {
        if (parse_double(p.value, d)) cfg.t_end = d;
        else bad_value(p, "a number");
      } else if (p.key == "dt") {
        if (p.value == "auto") {
          cfg.dt_was_auto = true;
          cfg.dt = 0.0;
        } else if (parse_double(p.value, d)) {
          cfg.dt_was_auto = false;
          cfg.dt = d;
        } else {
          bad_value(p, "a number or 'auto'");
        }
      } else if (p.key == "evolve_phi") {
        if (parse_bool(p.value, b)) cfg.evolve_phi = b;
        else bad_value(p, "true or false");
      } else {
        errors.push_back(where(p) + ": unknown key");
      }
    } else if (p.section == "solver") {
      if (p.key == "tol_eig") {
        if (parse_double(p.value, d)) cfg.solver.tol_eig = d;
        else bad_value(p, "a number");
      } else if (p.key == "max_iter") {
        if (parse_int(p.value, i)) cfg.solver.max_iter = static_cast<int>(i);
        else bad_value(p, "an integer");
      } else if (p.key == "restarts") {
        if (parse_int(p.value, i)) cfg.solver.restarts = static_cast<int>(i);
        else bad_value(p, "an integer");
      } else if (p.key == "seed") {
        if (parse_int(p.value, i) && i >= 0) cfg.solver.seed = static_cast<std::uint64_t>(i);
        else bad_value(p, "a nonnegative integer");
      } else if (p.key == "epsilon_reg") {
        if (parse_double(p.value, d)) cfg.solver.epsilon_reg = d;
        else bad_value(p, "a number");
      } else {
        errors.push_back(where(p) + ": unknown key");
      }
    } else if (p.section == "outputs") {
      if (p.key == "sample_every") {
        if (parse_int(p.value, i)) cfg.sample_every = static_cast<int>(i);
        else bad_value(p, "an integer");
      } else if (p.key == "csv") {
        cfg.csv_path = p.value;
      } else if (p.key == "report") {
        cfg.report_path = p.value;
      } else {
        errors.push_back(where(p) + ": unknown key");
      }
    } else if (p.section == "quantities") {
      if (p.key == "track") {
        std::set<QuantityId> dup;
        for (const std::string& tok : split_ws(p.value)) {
          const auto id = quantity_id_from_name(tok);
          if (!id) {
            errors.push_back(where(p) + ": unknown quantity id '" + tok + "'");
            continue;
          }
          if (!dup.insert(*id).second) {
            errors.push_back(where(p) + ": duplicate quantity id '" + tok + "'");
            continue;
          }
          cfg.quantities.track.push_back(*id);
        }
      } else if (p.key == "beta") {
        if (parse_double(p.value, d)) cfg.quantities.beta = d;
        else bad_value(p, "a number");
      } else if (p.key == "gamma") {
        if (parse_double(p.value, d)) cfg.quantities.gamma = d;
        else bad_value(p, "a number");
      } else if (p.key == "a_pinch") {
        if (parse_double(p.value, d)) cfg.quantities.a_pinch = d;
        else bad_value(p, "a number");
      } else if (p.key == "epsilon") {
        if (parse_double(p.value, d)) cfg.quantities.epsilon = d;
        else bad_value(p, "a number");
      } else {
        errors.push_back(where(p) + ": unknown key");
      }
    } else if (p.section == "verify") {
      if (p.key == "variation") {
        if (parse_bool(p.value, b)) cfg.verify.variation = b;
        else bad_value(p, "true or false");
      } else if (p.key == "lemmas") {
        if (parse_bool(p.value, b)) cfg.verify.lemmas = b;
        else bad_value(p, "true or false");
      } else if (p.key == "bounds") {
        if (parse_bool(p.value, b)) cfg.verify.bounds = b;
        else bad_value(p, "true or false");
      } else if (p.key == "fd_step") {
        if (parse_double(p.value, d)) cfg.verify.fd_step = d;
        else bad_value(p, "a number");
      } else if (p.key == "every") {
        if (parse_int(p.value, i)) cfg.verify.every = static_cast<int>(i);
        else bad_value(p, "an integer");
      } else {
        errors.push_back(where(p) + ": unknown key");
      }
    } else {
      errors.push_back("line " + std::to_string(p.line) + ": unknown section [" + p.section +
                       "]");
    }
  }
  if (!saw_kind) {
    errors.push_back("[geometry] kind is required (torus | einstein | product)");
  }
}

}  // namespace

std::optional<std::string> expression_error(const InitialExpression& e) {
  const auto integer_mode = [](double m) { return m >= 1.0 && m == std::floor(m) && m <= 64.0; };
  for (double v : e.params) {
    if (!std::isfinite(v)) return "expression parameters must be finite";
  }
  if (e.id == "constant") {
    if (e.params.size() != 1) return "expression 'constant' takes exactly 1 parameter (value)";
    return std::nullopt;
  }
  if (e.id == "cos_x" || e.id == "cos_y" || e.id == "sin_x" || e.id == "sin_y") {
    if (e.params.size() != 1 && e.params.size() != 2) {
      return "expression '" + e.id + "' takes 1 or 2 parameters (amplitude [mode])";
    }
    if (e.params.size() == 2 && !integer_mode(e.params[1])) {
      return "expression '" + e.id + "' mode must be an integer in [1, 64]";
    }
    return std::nullopt;
  }
  if (e.id == "two_mode") {
    if (e.params.size() != 4) {
      return "expression 'two_mode' takes exactly 4 parameters (amp_x mode_x amp_y mode_y)";
    }
    if (!integer_mode(e.params[1]) || !integer_mode(e.params[3])) {
      return "expression 'two_mode' modes must be integers in [1, 64]";
    }
    return std::nullopt;
  }
  return "unknown expression id '" + e.id +
         "' (constant | cos_x | cos_y | sin_x | sin_y | two_mode)";
}

ScalarField render_expression(const InitialExpression& e, int nx, int ny, double Lx, double Ly) {
  if (const auto err = expression_error(e)) throw std::invalid_argument(*err);
  if (nx <= 0 || ny <= 0 || !(Lx > 0.0) || !(Ly > 0.0)) {
    throw std::invalid_argument("render_expression: grid shape must be positive");
  }
  ScalarField f(nx, ny, 0.0);
  const double wx = kTwoPi / Lx;
  const double wy = kTwoPi / Ly;
  const double hx = Lx / nx;
  const double hy = Ly / ny;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = i * hx;
      const double y = j * hy;
      double v = 0.0;
      if (e.id == "constant") {
        v = e.params[0];
      } else if (e.id == "cos_x" || e.id == "cos_y" || e.id == "sin_x" || e.id == "sin_y") {
        const double m = e.params.size() == 2 ? e.params[1] : 1.0;
        const double th = (e.id.back() == 'x') ? m * wx * x : m * wy * y;
        v = e.params[0] * (e.id[0] == 'c' ? std::cos(th) : std::sin(th));
      } else {  // two_mode
        v = e.params[0] * std::cos(e.params[1] * wx * x) +
            e.params[2] * std::cos(e.params[3] * wy * y);
      }
      f.at(i, j) = v;
    }
  }
  return f;
}

int ScenarioConfig::dimension() const {
  switch (geometry) {
    case GeometryKind::kTorus:
      return 2;
    case GeometryKind::kEinstein:
      return einstein.n;
    case GeometryKind::kProduct:
      return 3;
  }
  return 2;
}

FlowParams ScenarioConfig::flow_params() const {
  FlowParams params;
  params.rho = rho;
  params.p = p;
  params.n = dimension();
  return params;
}

std::vector<std::string> validate_config(ScenarioConfig& cfg) {
  std::vector<std::string> errors;
  const auto add = [&errors](const std::string& s) { errors.push_back(s); };

  bool geometry_ok = true;
  if (cfg.geometry == GeometryKind::kTorus) {
    if (cfg.torus.N < 8 || cfg.torus.N % 2 != 0) {
      add("geometry: N must be even and at least 8");
      geometry_ok = false;
    }
    if (!(cfg.torus.Lx > 0.0) || !std::isfinite(cfg.torus.Lx) || !(cfg.torus.Ly > 0.0) ||
        !std::isfinite(cfg.torus.Ly)) {
      add("geometry: Lx and Ly must be positive and finite");
      geometry_ok = false;
    }
    for (const auto* e : {&cfg.torus.u0, &cfg.torus.phi0}) {
      if (const auto err = expression_error(*e)) {
        add("geometry: " + *err);
        geometry_ok = false;
      }
    }
  } else if (cfg.geometry == GeometryKind::kEinstein) {
    if (cfg.einstein.n != 2 && cfg.einstein.n != 3) {
      add("geometry: einstein n must be 2 or 3");
      geometry_ok = false;
    }
    if (!(cfg.einstein.lambda0 > 0.0) || !std::isfinite(cfg.einstein.lambda0)) {
      add("geometry: lambda0 must be positive and finite");
    }
    if (!std::isfinite(cfg.einstein.a)) add("geometry: a must be finite");
  } else {
    if (!(cfg.product.a0 > 0.0) || !(cfg.product.b0 > 0.0) || !std::isfinite(cfg.product.a0) ||
        !std::isfinite(cfg.product.b0)) {
      add("geometry: a0 and b0 must be positive and finite");
    }
    if (cfg.p != 2.0) add("flow: the product geometry's closed form requires p = 2");
    if (!cfg.quantities.track.empty()) {
      add("quantities: tracked quantities require the torus or einstein geometry");
    }
  }

  bool flow_ok = true;
  if (geometry_ok) {
    try {
      cfg.flow_params().validate();
    } catch (const std::invalid_argument& e) {
      add(std::string("flow: ") + e.what());
      flow_ok = false;
    }
  } else {
    flow_ok = false;
  }
  if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) {
    add("flow: t_end must be positive and finite");
    flow_ok = false;
  }

  if (cfg.dt_was_auto) {
    cfg.dt = 0.0;
    if (geometry_ok && flow_ok) {
      if (cfg.geometry == GeometryKind::kTorus) {
        TorusGeometry geom;
        geom.nx = cfg.torus.N;
        geom.ny = cfg.torus.N;
        geom.Lx = cfg.torus.Lx;
        geom.Ly = cfg.torus.Ly;
        geom.u = render_expression(cfg.torus.u0, geom.nx, geom.ny, geom.Lx, geom.Ly);
        geom.phi = render_expression(cfg.torus.phi0, geom.nx, geom.ny, geom.Lx, geom.Ly);
        cfg.dt = cfl_dt(geom, cfg.flow_params());
      } else {
        cfg.dt = cfg.t_end / 256.0;
      }
    }
  } else if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) {
    add("flow: dt must be positive and finite, or 'auto'");
  }

  try {
    cfg.solver.validate();
  } catch (const std::invalid_argument& e) {
    add(std::string("solver: ") + e.what());
  }

  if (cfg.sample_every < 1) add("outputs: sample_every must be at least 1");
  if (cfg.csv_path.empty()) add("outputs: csv path must not be empty");
  if (cfg.report_path.empty()) add("outputs: report path must not be empty");

  for (double v :
       {cfg.quantities.beta, cfg.quantities.gamma, cfg.quantities.a_pinch, cfg.quantities.epsilon}) {
    if (!std::isfinite(v)) {
      add("quantities: beta, gamma, a_pinch, epsilon must be finite");
      break;
    }
  }

  if (!(cfg.verify.fd_step > 0.0) || !std::isfinite(cfg.verify.fd_step)) {
    add("verify: fd_step must be positive and finite");
  }
  if (cfg.verify.every < 1) add("verify: every must be at least 1");
  if (cfg.geometry != GeometryKind::kTorus && cfg.verify.lemmas) {
    add("verify: lemmas checks run on the torus geometry only");
  }
  if (cfg.geometry != GeometryKind::kTorus && cfg.verify.bounds) {
    add("verify: bounds checks run on the torus geometry only");
  }

  return errors;
}

ParseOutcome parse_config(const std::string& text) {
  ParseOutcome out;
  RawFile raw = tokenize(text);
  out.errors = std::move(raw.errors);
  ScenarioConfig cfg;
  assemble(raw, cfg, out.errors);
  if (!out.errors.empty()) return out;  // value errors make validation moot
  auto v = validate_config(cfg);
  out.errors.insert(out.errors.end(), v.begin(), v.end());
  if (out.errors.empty()) out.config = std::move(cfg);
  return out;
}

ParseOutcome load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ParseOutcome out;
    out.errors.push_back("cannot read config file '" + path + "'");
    return out;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace rbflow
