#include "parapack/config.hpp"

#include "parapack/errors.hpp"
#include "parapack/scenarios.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace parapack {

namespace {

using nlohmann::json;

std::string child(const std::string &ptr, const std::string &key) {
  std::string esc;
  for (char c : key) {
    if (c == '~')
      esc += "~0";
    else if (c == '/')
      esc += "~1";
    else
      esc += c;
  }
  return ptr + "/" + esc;
}

std::string child(const std::string &ptr, std::size_t index) {
  return ptr + "/" + std::to_string(index);
}

double number(const json &j, const std::string &ptr) {
  if (!j.is_number())
    throw ConfigError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw ConfigError(ptr, "expected a finite number");
  return v;
}

double positive(const json &j, const std::string &ptr) {
  const double v = number(j, ptr);
  if (!(v > 0.0))
    throw ConfigError(ptr, "expected a positive number");
  return v;
}

std::size_t count(const json &j, const std::string &ptr) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError(ptr, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::string text(const json &j, const std::string &ptr) {
  if (!j.is_string())
    throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

// Object reader that remembers which keys were consumed, so anything left
// over can be reported as unknown.
class Obj {
public:
  Obj(const json &j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object())
      throw ConfigError(ptr_.empty() ? "/" : ptr_, "expected an object");
  }

  const json *get(const std::string &key) {
    known_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string at(const std::string &key) const { return child(ptr_, key); }

  template <class F> void opt(const std::string &key, F &&fn) {
    if (const json *v = get(key))
      fn(*v, at(key));
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key()))
        throw ConfigError(child(ptr_, it.key()), "unknown key");
  }

private:
  const json &j_;
  std::string ptr_;
  std::set<std::string> known_;
};

std::vector<double> numbers(const json &j, const std::string &ptr) {
  if (!j.is_array())
    throw ConfigError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], child(ptr, i)));
  return out;
}

template <class F> auto wrap(const std::string &ptr, F &&fn) {
  try {
    return fn();
  } catch (const ConfigError &) {
    throw;
  } catch (const Error &e) {
    throw ConfigError(ptr, e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

CellParams parse_cell(const json &j, const std::string &ptr, CellParams c) {
  Obj o(j, ptr);
  o.opt("r_ohm", [&](const json &v, const std::string &p) { c.r_ohm = positive(v, p); });
  o.opt("r_contact", [&](const json &v, const std::string &p) { c.r_contact = positive(v, p); });
  o.opt("r_ct0", [&](const json &v, const std::string &p) { c.r_ct0 = positive(v, p); });
  o.opt("r_w", [&](const json &v, const std::string &p) { c.r_w = positive(v, p); });
  o.opt("c_rc", [&](const json &v, const std::string &p) { c.c_rc = positive(v, p); });
  o.opt("q_ah", [&](const json &v, const std::string &p) { c.q_ah = positive(v, p); });
  o.opt("e_act", [&](const json &v, const std::string &p) { c.e_act = positive(v, p); });
  o.finish();
  wrap(ptr, [&] { c.validate(); });
  return c;
}

ModuleConfig parse_module(const json &j, const std::string &ptr, const std::filesystem::path &base) {
  Obj o(j, ptr);
  std::string preset = "reference";
  o.opt("preset", [&](const json &v, const std::string &p) { preset = text(v, p); });
  ModuleConfig m;
  if (preset == "reference")
    m = reference_module();
  else
    m = wrap(o.at("preset"), [&] { return bench_module(bench_config_from_string(preset)); });

  o.opt("n_cells", [&](const json &v, const std::string &p) {
    const auto n = count(v, p);
    if (n < 2)
      throw ConfigError(p, "at least 2 cells required");
    m = uniform_module(mean_cell(m.cells), n, m);
  });
  o.opt("cells", [&](const json &v, const std::string &p) {
    if (!v.is_array() || v.size() < 2)
      throw ConfigError(p, "expected an array of at least 2 cells");
    const CellParams like = mean_cell(m.cells);
    std::vector<CellParams> cells;
    for (std::size_t i = 0; i < v.size(); ++i)
      cells.push_back(parse_cell(v[i], child(p, i), like));
    m.cells = std::move(cells);
  });
  o.opt("extra_contact", [&](const json &v, const std::string &p) {
    Obj e(v, p);
    std::vector<double> values;
    std::string convention = "per_branch";
    if (const json *x = e.get("values"))
      values = numbers(*x, e.at("values"));
    else
      throw ConfigError(p, "missing key 'values'");
    e.opt("convention", [&](const json &c, const std::string &cp) { convention = text(c, cp); });
    e.finish();
    if (values.size() != m.size())
      throw ConfigError(e.at("values"), "one value per cell required");
    if (convention == "per_branch") {
      wrap(e.at("values"), [&] { add_contact_resistance(m, values); });
      m.contact_convention = ContactConvention::per_branch;
    } else if (convention == "ladder") {
      wrap(e.at("values"), [&] { add_contact_resistance(m, ladder_to_contact(values, 0.0)); });
      m.contact_convention = ContactConvention::ladder;
    } else {
      throw ConfigError(e.at("convention"), "expected 'per_branch' or 'ladder'");
    }
  });
  o.opt("thermal", [&](const json &v, const std::string &p) {
    Obj t(v, p);
    t.opt("c_p", [&](const json &x, const std::string &xp) { m.thermal.c_p = positive(x, xp); });
    t.opt("rth_core_surface",
          [&](const json &x, const std::string &xp) { m.thermal.rth_core_surface = positive(x, xp); });
    t.opt("rth_surface_ambient", [&](const json &x, const std::string &xp) {
      m.thermal.rth_surface_ambient = positive(x, xp);
    });
    t.finish();
  });
  o.opt("ocv", [&](const json &v, const std::string &p) {
    if (v.is_string()) {
      if (v.get<std::string>() != "synthetic")
        throw ConfigError(p, "expected \"synthetic\" or {\"csv\": path}");
      return;
    }
    Obj c(v, p);
    const json *path = c.get("csv");
    if (!path)
      throw ConfigError(p, "missing key 'csv'");
    const auto file = resolve(base, text(*path, c.at("csv")));
    c.finish();
    m.ocv = wrap(c.at("csv"), [&] { return std::make_shared<const OcvTable>(load_ocv_csv(file)); });
  });
  o.opt("t_ambient_c", [&](const json &v, const std::string &p) {
    m.t_ambient_k = to_kelvin(number(v, p));
  });
  o.opt("rated_cell_capacity_ah", [&](const json &v, const std::string &p) {
    m.rated_cell_capacity_ah = positive(v, p);
  });
  o.finish();
  wrap(ptr, [&] { m.validate(); });
  return m;
}

EventSpec parse_event(const json &j, const std::string &ptr) {
  Obj o(j, ptr);
  const json *kind = o.get("kind");
  const json *thr = o.get("threshold");
  if (!kind)
    throw ConfigError(ptr, "missing key 'kind'");
  if (!thr)
    throw ConfigError(ptr, "missing key 'threshold'");
  const auto k = wrap(o.at("kind"), [&] { return event_kind_from_string(text(*kind, o.at("kind"))); });
  double value = number(*thr, o.at("threshold"));
  // temperatures are given in Celsius at the interface
  if (k == EventKind::any_core_temp_above)
    value = to_kelvin(value);
  auto spec = EventSpec::make(k, value);
  o.opt("direction", [&](const json &v, const std::string &p) {
    const auto d = text(v, p);
    if (d == "rising")
      spec.direction = Crossing::rising;
    else if (d == "falling")
      spec.direction = Crossing::falling;
    else if (d == "either")
      spec.direction = Crossing::either;
    else
      throw ConfigError(p, "expected 'rising', 'falling' or 'either'");
  });
  o.finish();
  return spec;
}

LoadStep parse_step(const json &j, const std::string &ptr) {
  Obj o(j, ptr);
  LoadStep s;
  o.opt("mode", [&](const json &v, const std::string &p) {
    const auto m = text(v, p);
    if (m == "constant_current")
      s.mode = StepMode::constant_current;
    else if (m == "rest")
      s.mode = StepMode::rest;
    else
      throw ConfigError(p, "expected 'constant_current' or 'rest'");
  });
  o.opt("current_a", [&](const json &v, const std::string &p) { s.current_a = number(v, p); });
  o.opt("c_rate", [&](const json &v, const std::string &p) { s.c_rate = number(v, p); });
  o.opt("duration_s", [&](const json &v, const std::string &p) {
    s.duration_limit_s = number(v, p);
    if (s.duration_limit_s < 0.0)
      throw ConfigError(p, "expected a non-negative duration");
  });
  o.opt("terminators", [&](const json &v, const std::string &p) {
    if (!v.is_array())
      throw ConfigError(p, "expected an array");
    for (std::size_t i = 0; i < v.size(); ++i)
      s.terminators.push_back(parse_event(v[i], child(p, i)));
  });
  o.finish();
  if (s.mode == StepMode::constant_current && !s.current_a && !s.c_rate)
    throw ConfigError(ptr, "constant-current step needs 'current_a' or 'c_rate'");
  return s;
}

Protocol parse_protocol(const json &j, const std::string &ptr, std::size_t n_cells) {
  Obj o(j, ptr);
  Protocol pr;
  const json *steps = o.get("steps");
  if (!steps || !steps->is_array() || steps->empty())
    throw ConfigError(o.at("steps"), "expected a non-empty array of steps");
  for (std::size_t i = 0; i < steps->size(); ++i)
    pr.steps.push_back(parse_step((*steps)[i], child(o.at("steps"), i)));
  o.opt("initial_soc", [&](const json &v, const std::string &p) {
    pr.initial_soc = v.is_array() ? numbers(v, p) : std::vector<double>{number(v, p)};
  });
  o.opt("t_ambient_c", [&](const json &v, const std::string &p) {
    pr.t_ambient_k = to_kelvin(number(v, p));
  });
  o.opt("output_times_s", [&](const json &v, const std::string &p) { pr.output_times = numbers(v, p); });
  o.opt("output_dt_s", [&](const json &v, const std::string &p) { pr.output_dt = positive(v, p); });
  o.opt("soc_cutoff", [&](const json &v, const std::string &p) { pr.soc_cutoff = number(v, p); });
  o.opt("soc_floor", [&](const json &v, const std::string &p) { pr.soc_floor = number(v, p); });
  o.finish();
  wrap(ptr, [&] { pr.validate(n_cells); });
  return pr;
}

IntegratorSettings parse_integrator(const json &j, const std::string &ptr) {
  Obj o(j, ptr);
  IntegratorSettings s;
  o.opt("rtol", [&](const json &v, const std::string &p) { s.rtol = positive(v, p); });
  o.opt("atol", [&](const json &v, const std::string &p) { s.atol = positive(v, p); });
  o.opt("max_step", [&](const json &v, const std::string &p) { s.max_step = positive(v, p); });
  o.opt("min_step", [&](const json &v, const std::string &p) { s.min_step = positive(v, p); });
  o.opt("event_tol", [&](const json &v, const std::string &p) { s.event_tol = positive(v, p); });
  o.opt("initial_step", [&](const json &v, const std::string &p) { s.initial_step = number(v, p); });
  o.opt("fixed_step", [&](const json &v, const std::string &p) { s.fixed_step = positive(v, p); });
  o.opt("max_steps", [&](const json &v, const std::string &p) { s.max_steps = count(v, p); });
  o.finish();
  wrap(ptr, [&] { s.validate(); });
  return s;
}

std::vector<SafetyParam> parse_params(const json &j, const std::string &ptr) {
  if (!j.is_array() || j.empty())
    throw ConfigError(ptr, "expected a non-empty array of parameter names");
  std::vector<SafetyParam> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = child(ptr, i);
    out.push_back(wrap(p, [&] { return safety_param_from_string(text(j[i], p)); }));
  }
  return out;
}

double fraction(const json &j, const std::string &ptr) {
  const double v = number(j, ptr);
  if (!(v >= 0.0 && v < 1.0))
    throw ConfigError(ptr, "expected a value in [0, 1)");
  return v;
}

std::size_t cells_count(const json &j, const std::string &ptr) {
  const auto n = count(j, ptr);
  if (n < 2)
    throw ConfigError(ptr, "at least 2 cells required");
  return n;
}

} // namespace

ModuleConfig RunConfig::mean_module(std::size_t n) const {
  return uniform_module(mean_cell(module.cells), n, module);
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path &base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Obj o(root, "");
  if (const json *m = o.get("module"))
    cfg.module = parse_module(*m, "/module", base_dir);
  else
    cfg.module = reference_module();
  o.opt("protocol", [&](const json &v, const std::string &p) {
    cfg.protocol = parse_protocol(v, p, cfg.module.size());
  });
  o.opt("integrator", [&](const json &v, const std::string &p) { cfg.integrator = parse_integrator(v, p); });
  o.opt("seed", [&](const json &v, const std::string &p) { cfg.seed = count(v, p); });
  o.opt("sobol", [&](const json &v, const std::string &p) {
    Obj s(v, p);
    auto &d = cfg.sobol;
    s.opt("n_base", [&](const json &x, const std::string &xp) {
      d.n_base = count(x, xp);
      if (d.n_base < 2)
        throw ConfigError(xp, "expected at least 2");
    });
    s.opt("c_rate", [&](const json &x, const std::string &xp) { d.c_rate = positive(x, xp); });
    s.opt("v_cutoff", [&](const json &x, const std::string &xp) { d.v_cutoff = positive(x, xp); });
    s.opt("grid_points", [&](const json &x, const std::string &xp) {
      d.grid_points = count(x, xp);
      if (d.grid_points < 1)
        throw ConfigError(xp, "expected at least 1");
    });
    s.opt("checkpoint", [&](const json &x, const std::string &xp) {
      d.checkpoint = resolve(base_dir, text(x, xp));
    });
    s.finish();
  });
  o.opt("thresholds", [&](const json &v, const std::string &p) {
    Obj s(v, p);
    auto &d = cfg.thresholds;
    s.opt("c_rates", [&](const json &x, const std::string &xp) {
      d.c_rates = numbers(x, xp);
      if (d.c_rates.empty())
        throw ConfigError(xp, "expected at least one C-rate");
      for (std::size_t i = 0; i < d.c_rates.size(); ++i)
        positive(x[i], child(xp, i));
    });
    s.opt("params", [&](const json &x, const std::string &xp) { d.params = parse_params(x, xp); });
    s.opt("temp_limit_c", [&](const json &x, const std::string &xp) { d.temp_limit_c = number(x, xp); });
    s.opt("search_cap_pct", [&](const json &x, const std::string &xp) { d.search_cap_pct = positive(x, xp); });
    s.opt("q_search_cap_pct", [&](const json &x, const std::string &xp) {
      d.q_search_cap_pct = positive(x, xp);
      if (d.q_search_cap_pct >= 100.0)
        throw ConfigError(xp, "expected a value below 100");
    });
    s.opt("soc_cutoff", [&](const json &x, const std::string &xp) { d.soc_cutoff = fraction(x, xp); });
    s.opt("n_cells", [&](const json &x, const std::string &xp) { d.n_cells = cells_count(x, xp); });
    s.finish();
  });
  o.opt("sweep", [&](const json &v, const std::string &p) {
    Obj s(v, p);
    auto &d = cfg.sweep;
    s.opt("axis", [&](const json &x, const std::string &xp) {
      d.axis = wrap(xp, [&] { return sweep_axis_from_string(text(x, xp)); });
    });
    s.opt("grid", [&](const json &x, const std::string &xp) {
      d.grid = numbers(x, xp);
      if (d.grid.empty())
        throw ConfigError(xp, "expected a non-empty grid");
    });
    s.opt("c_rate", [&](const json &x, const std::string &xp) { d.c_rate = positive(x, xp); });
    s.opt("soc_cutoff", [&](const json &x, const std::string &xp) { d.soc_cutoff = fraction(x, xp); });
    s.opt("n_cells", [&](const json &x, const std::string &xp) { d.n_cells = cells_count(x, xp); });
    s.opt("params", [&](const json &x, const std::string &xp) { d.params = parse_params(x, xp); });
    s.opt("temp_limit_c", [&](const json &x, const std::string &xp) { d.temp_limit_c = number(x, xp); });
    s.finish();
  });
  o.opt("fit", [&](const json &v, const std::string &p) {
    Obj s(v, p);
    auto &d = cfg.fit;
    s.opt("measurements", [&](const json &x, const std::string &xp) {
      d.measurements = resolve(base_dir, text(x, xp));
    });
    s.opt("perturb", [&](const json &x, const std::string &xp) { d.perturb = fraction(x, xp); });
    s.opt("thermal_perturb",
          [&](const json &x, const std::string &xp) { d.thermal_perturb = fraction(x, xp); });
    s.opt("lower_factor", [&](const json &x, const std::string &xp) { d.lower_factor = positive(x, xp); });
    s.opt("upper_factor", [&](const json &x, const std::string &xp) { d.upper_factor = positive(x, xp); });
    s.opt("max_evals", [&](const json &x, const std::string &xp) { d.max_evals = count(x, xp); });
    s.opt("sum_tolerance_a",
          [&](const json &x, const std::string &xp) { d.sum_tolerance_a = positive(x, xp); });
    s.finish();
    if (!(d.lower_factor < 1.0 && d.upper_factor > 1.0))
      throw ConfigError(p, "bounds must bracket the module values (lower_factor < 1 < upper_factor)");
  });
  o.opt("synth", [&](const json &v, const std::string &p) {
    Obj s(v, p);
    auto &n = cfg.synth.noise;
    s.opt("current_sigma_a", [&](const json &x, const std::string &xp) {
      n.current_sigma_a = number(x, xp);
      if (n.current_sigma_a < 0.0)
        throw ConfigError(xp, "expected a non-negative value");
    });
    s.opt("temp_sigma_c", [&](const json &x, const std::string &xp) {
      n.temp_sigma_c = number(x, xp);
      if (n.temp_sigma_c < 0.0)
        throw ConfigError(xp, "expected a non-negative value");
    });
    s.opt("current_dt_s", [&](const json &x, const std::string &xp) { n.current_dt_s = positive(x, xp); });
    s.opt("temp_dt_s", [&](const json &x, const std::string &xp) { n.temp_dt_s = positive(x, xp); });
    s.finish();
  });
  o.finish();
  cfg.synth.noise.seed = cfg.seed;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

} // namespace parapack
