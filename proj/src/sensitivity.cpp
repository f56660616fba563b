#include "parapack/sensitivity.hpp"

#include "parapack/csv.hpp"
#include "parapack/errors.hpp"
#include "parapack/scenarios.hpp"

#include <boost/random/sobol.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace parapack {

namespace {

std::uint32_t reverse_bits(std::uint32_t x) {
  x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
  x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
  x = ((x >> 4) & 0x0F0F0F0Fu) | ((x & 0x0F0F0F0Fu) << 4);
  x = ((x >> 8) & 0x00FF00FFu) | ((x & 0x00FF00FFu) << 8);
  return (x >> 16) | (x << 16);
}

// Laine-Karras style hash: on the bit-reversed value, every output bit
// depends only on the bits above it, which is a nested uniform scramble.
std::uint32_t owen_scramble(std::uint32_t x, std::uint32_t seed) {
  x = reverse_bits(x);
  x += seed;
  x ^= x * 0x6c50b47cu;
  x ^= x * 0xb82f1e52u;
  x ^= x * 0xc7afe638u;
  x ^= x * 0x8d22f6e6u;
  return reverse_bits(x);
}

std::uint64_t splitmix64(std::uint64_t &state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr double kTwo32 = 4294967296.0;

} // namespace

std::vector<double> sobol_sequence(std::size_t dim, std::size_t n,
                                   std::optional<std::uint64_t> scramble_seed) {
  if (dim == 0 || dim > 64)
    throw DomainError("sobol_sequence: dimension must be in [1, 64]");
  if (n == 0)
    throw DomainError("sobol_sequence: n must be positive");
  if (n > (std::size_t{1} << 31))
    throw DomainError("sobol_sequence: at most 2^31 points");

  std::vector<std::uint32_t> seeds(dim, 0);
  if (scramble_seed) {
    std::uint64_t st = *scramble_seed;
    for (auto &s : seeds)
      s = static_cast<std::uint32_t>(splitmix64(st) >> 32);
  }

  boost::random::sobol_engine<std::uint32_t, 32, boost::random::default_sobol_table> engine(dim);
  std::vector<double> out(n * dim);
  // the engine starts after the origin
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      const std::uint32_t raw = i == 0 ? 0u : engine();
      const std::uint32_t v = scramble_seed ? owen_scramble(raw, seeds[d]) : raw;
      out[i * dim + d] = static_cast<double>(v) / kTwo32;
    }
  }
  return out;
}

double star_discrepancy_2d(std::span<const double> pts) {
  if (pts.size() % 2 != 0 || pts.empty())
    throw DomainError("star_discrepancy_2d: need a non-empty row-major n x 2 array");
  const std::size_t n = pts.size() / 2;
  std::vector<double> ys;
  for (std::size_t i = 0; i < n; ++i)
    ys.push_back(pts[2 * i + 1]);
  ys.push_back(1.0);
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pts[2 * a] < pts[2 * b]; });

  // Fenwick tree over y ranks
  std::vector<std::size_t> tree(ys.size() + 1, 0);
  auto add = [&](std::size_t r) {
    for (++r; r < tree.size(); r += r & (~r + 1))
      ++tree[r];
  };
  auto prefix = [&](std::size_t r) { // count of ranks < r
    std::size_t s = 0;
    for (; r > 0; r -= r & (~r + 1))
      s += tree[r];
    return s;
  };
  auto rank = [&](double y) {
    return static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), y) - ys.begin());
  };

  const double dn = static_cast<double>(n);
  double d = 0.0;
  std::size_t next = 0;
  std::vector<double> xs;
  for (auto i : order)
    xs.push_back(pts[2 * i]);
  xs.push_back(1.0);
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double x : xs) {
    // open box: points with px < x are in the tree
    for (std::size_t q = 0; q < ys.size(); ++q) {
      const double area = x * ys[q];
      d = std::max(d, area - static_cast<double>(prefix(q)) / dn);
    }
    while (next < n && pts[2 * order[next]] <= x)
      add(rank(pts[2 * order[next++] + 1]));
    // closed box: px <= x and py <= y
    for (std::size_t q = 0; q < ys.size(); ++q) {
      const double area = x * ys[q];
      d = std::max(d, static_cast<double>(prefix(q + 1)) / dn - area);
    }
  }
  return d;
}

std::string to_string(ParamFamily f) {
  switch (f) {
  case ParamFamily::r_contact:
    return "r_contact";
  case ParamFamily::r_ohm:
    return "r_ohm";
  case ParamFamily::q_cap:
    return "q_cap";
  }
  return "unknown";
}

ParamFamily param_family_from_string(const std::string &name) {
  for (auto f : {ParamFamily::r_contact, ParamFamily::r_ohm, ParamFamily::q_cap})
    if (to_string(f) == name)
      return f;
  throw DomainError("unknown parameter family '" + name + "'");
}

void ParameterSpace::validate(std::size_t n_cells) const {
  if (dims.empty())
    throw DomainError("parameter space is empty");
  for (const auto &d : dims) {
    if (d.cell >= n_cells)
      throw DomainError("parameter space refers to a cell outside the module");
    if (!(d.lower > 0.0 && d.lower < d.upper))
      throw DomainError("parameter space bounds must satisfy 0 < lower < upper");
  }
}

ModuleConfig ParameterSpace::apply(const ModuleConfig &base, std::span<const double> unit) const {
  if (unit.size() != dims.size())
    throw DomainError("parameter point has the wrong dimension");
  ModuleConfig m = base;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto &d = dims[i];
    const double v = d.lower + unit[i] * (d.upper - d.lower);
    auto &c = m.cells.at(d.cell);
    switch (d.family) {
    case ParamFamily::r_contact:
      c.r_contact = v;
      break;
    case ParamFamily::r_ohm:
      c.r_ohm = v;
      break;
    case ParamFamily::q_cap:
      c.q_ah = v;
      break;
    }
  }
  return m;
}

ParameterSpace ParameterSpace::reference(std::size_t n_cells) {
  ParameterSpace s;
  for (std::size_t k = 0; k < n_cells; ++k)
    s.dims.push_back({k, ParamFamily::r_contact, 124e-6, 424e-6});
  for (std::size_t k = 0; k < n_cells; ++k)
    s.dims.push_back({k, ParamFamily::r_ohm, 172e-6, 344e-6});
  for (std::size_t k = 0; k < n_cells; ++k)
    s.dims.push_back({k, ParamFamily::q_cap, 191.0, 273.0});
  return s;
}

namespace {

std::string checkpoint_header(std::size_t rows, std::size_t dim, std::span<const double> points,
                              const std::string &tag) {
  // fingerprint of the point set and model so a checkpoint from another campaign is rejected
  std::uint64_t h = 1469598103934665603ull;
  for (double v : points) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    h = (h ^ bits) * 1099511628211ull;
  }
  for (unsigned char c : tag)
    h = (h ^ c) * 1099511628211ull;
  std::ostringstream s;
  s << "# parapack checkpoint rows=" << rows << " dim=" << dim << " fingerprint=" << std::hex << h;
  return s.str();
}

} // namespace

BatchResult evaluate_batch(const SeriesModel &model, std::span<const double> points,
                           std::size_t dim, const BatchOptions &options) {
  if (dim == 0 || points.size() % dim != 0)
    throw DomainError("evaluate_batch: points are not a whole number of rows");
  const std::size_t rows = points.size() / dim;
  BatchResult res;
  res.outputs.resize(rows);
  res.errors.resize(rows);
  std::vector<char> done(rows, 0);

  const auto header = checkpoint_header(rows, dim, points, options.checkpoint_tag);
  if (options.checkpoint && std::filesystem::exists(*options.checkpoint)) {
    std::ifstream in(*options.checkpoint);
    std::string line;
    if (std::getline(in, line) && line == header) {
      while (std::getline(in, line)) {
        if (line.empty())
          continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
          cells.push_back(cell);
        if (cells.size() < 2)
          continue;
        const auto idx = static_cast<std::size_t>(std::stoull(cells[0]));
        if (idx >= rows)
          continue;
        if (cells[1] == "!") {
          res.errors[idx] = cells.size() > 2 ? cells[2] : "failed";
        } else {
          std::vector<double> v;
          for (std::size_t c = 1; c < cells.size(); ++c)
            v.push_back(*csv::to_number(cells[c], "checkpoint"));
          res.outputs[idx] = std::move(v);
        }
        if (!done[idx])
          ++res.resumed;
        done[idx] = 1;
      }
    }
  }

  std::ofstream ck;
  if (options.checkpoint) {
    ck.open(*options.checkpoint, res.resumed ? std::ios::app : std::ios::trunc);
    if (!ck)
      throw Error("cannot open checkpoint file " + options.checkpoint->string());
    if (!res.resumed)
      ck << header << '\n';
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < rows; ++i)
    if (!done[i])
      todo.push_back(i);

  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  const std::size_t chunk = std::max<std::size_t>(1, options.checkpoint_every);
  std::size_t finished = rows - todo.size();
  for (std::size_t start = 0; start < todo.size(); start += chunk) {
    const std::size_t stop = std::min(todo.size(), start + chunk);
    std::atomic<std::size_t> next{start};
    auto work = [&] {
      for (std::size_t t = next++; t < stop; t = next++) {
        const auto i = todo[t];
        try {
          res.outputs[i] = model(points.subspan(i * dim, dim));
          if (res.outputs[i].empty())
            res.errors[i] = "model returned no output";
        } catch (const std::exception &e) {
          res.outputs[i].clear();
          res.errors[i] = e.what();
          if (res.errors[i].empty())
            res.errors[i] = "failed";
        }
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min(workers, stop - start); ++w)
        pool.emplace_back(work);
      for (auto &th : pool)
        th.join();
    }
    if (ck.is_open()) {
      for (std::size_t t = start; t < stop; ++t) {
        const auto i = todo[t];
        ck << i;
        if (!res.errors[i].empty()) {
          auto msg = res.errors[i];
          std::replace(msg.begin(), msg.end(), ',', ';');
          std::replace(msg.begin(), msg.end(), '\n', ' ');
          ck << ",!," << msg;
        } else {
          for (double v : res.outputs[i])
            ck << ',' << csv::format(v);
        }
        ck << '\n';
      }
      ck.flush();
    }
    finished += stop - start;
    if (options.progress)
      options.progress(finished, rows);
  }
  return res;
}

IndexEstimate saltelli_estimate(std::span<const double> f_a, std::span<const double> f_b,
                                std::span<const double> f_ab, std::size_t dim) {
  const std::size_t n = f_a.size();
  if (n < 2 || f_b.size() != n || f_ab.size() != n * dim)
    throw DomainError("saltelli_estimate: inconsistent sample arrays");
  IndexEstimate e;
  e.s1.assign(dim, 0.0);
  e.st.assign(dim, 0.0);
  e.s1_se.assign(dim, 0.0);
  e.st_se.assign(dim, 0.0);

  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    mean += f_a[j] + f_b[j];
  mean /= static_cast<double>(2 * n);
  double var = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    var += (f_a[j] - mean) * (f_a[j] - mean) + (f_b[j] - mean) * (f_b[j] - mean);
  var /= static_cast<double>(2 * n - 1);
  e.variance = var;
  e.defined = var > 1e-300 * (1.0 + mean * mean) && var > 0.0;
  if (!e.defined)
    return e;

  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < dim; ++i) {
    const auto ab = f_ab.subspan(i * n, n);
    double s1 = 0.0, st = 0.0, s1_sq = 0.0, st_sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = f_b[j] * (ab[j] - f_a[j]);
      const double b = 0.5 * (f_a[j] - ab[j]) * (f_a[j] - ab[j]);
      s1 += a, s1_sq += a * a;
      st += b, st_sq += b * b;
    }
    const double m1 = s1 / dn, mt = st / dn;
    e.s1[i] = m1 / var;
    e.st[i] = mt / var;
    e.s1_se[i] = std::sqrt(std::max(0.0, s1_sq / dn - m1 * m1) / dn) / var;
    e.st_se[i] = std::sqrt(std::max(0.0, st_sq / dn - mt * mt) / dn) / var;
  }
  return e;
}

SobolResult saltelli_indices(std::size_t dim, std::size_t out_len, const SeriesModel &model,
                             const SaltelliOptions &options) {
  if (options.n_base < 64)
    throw DomainError("saltelli_indices: n_base must be at least 64");
  if (dim == 0 || 2 * dim > 64)
    throw DomainError("saltelli_indices: dimension must be in [1, 32]");
  if (out_len == 0)
    throw DomainError("saltelli_indices: empty output series");
  const std::size_t n = options.n_base;
  const auto seq = sobol_sequence(2 * dim, n, options.seed);

  // rows: A (n), B (n), then A_B^(i) for i = 0..dim-1 (n each)
  const std::size_t rows = n * (dim + 2);
  std::vector<double> pts(rows * dim);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double a = seq[j * 2 * dim + d];
      const double b = seq[j * 2 * dim + dim + d];
      pts[j * dim + d] = a;
      pts[(n + j) * dim + d] = b;
      for (std::size_t i = 0; i < dim; ++i)
        pts[((2 + i) * n + j) * dim + d] = d == i ? b : a;
    }
  }

  const auto batch = evaluate_batch(model, pts, dim, options.batch);

  SobolResult r;
  r.n_base = n;
  r.evaluations = rows;
  std::vector<char> valid(n, 1);
  for (std::size_t row = 0; row < rows; ++row) {
    const auto &o = batch.outputs[row];
    if (o.size() != out_len) {
      valid[row % n] = 0;
      std::ostringstream msg;
      msg << "row " << row << ": "
          << (batch.errors[row].empty() ? "output length mismatch" : batch.errors[row]);
      r.failures.push_back(msg.str());
    }
  }
  std::size_t n_ok = 0;
  for (auto v : valid)
    n_ok += v ? 1 : 0;
  r.failed_samples = n - n_ok;
  if (n_ok < 2)
    throw Error("saltelli_indices: fewer than two complete base samples");

  std::vector<double> fa(n_ok), fb(n_ok), fab(n_ok * dim);
  for (std::size_t t = 0; t < out_len; ++t) {
    std::size_t q = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!valid[j])
        continue;
      fa[q] = batch.outputs[j][t];
      fb[q] = batch.outputs[n + j][t];
      for (std::size_t i = 0; i < dim; ++i)
        fab[i * n_ok + q] = batch.outputs[(2 + i) * n + j][t];
      ++q;
    }
    r.per_time.push_back(saltelli_estimate(fa, fb, fab, dim));
  }
  return r;
}

double ishigami(std::span<const double> unit, double a, double b) {
  if (unit.size() < 3)
    throw DomainError("ishigami: three inputs required");
  const double pi = std::numbers::pi;
  const double x1 = -pi + 2 * pi * unit[0], x2 = -pi + 2 * pi * unit[1], x3 = -pi + 2 * pi * unit[2];
  const double s2 = std::sin(x2);
  return std::sin(x1) + a * s2 * s2 + b * std::pow(x3, 4) * std::sin(x1);
}

IshigamiIndices ishigami_indices(double a, double b) {
  const double pi = std::numbers::pi;
  const double pi4 = std::pow(pi, 4), pi8 = pi4 * pi4;
  const double v1 = 0.5 * std::pow(1 + b * pi4 / 5, 2);
  const double v2 = a * a / 8;
  const double v13 = b * b * pi8 * (1.0 / 18 - 1.0 / 50);
  const double v = v1 + v2 + v13;
  return {{v1 / v, v2 / v, 0.0}, {(v1 + v13) / v, v2 / v, v13 / v}};
}

SensitivitySetup SensitivitySetup::reference() {
  SensitivitySetup s;
  const auto ref = reference_module();
  s.base = uniform_module(mean_cell(ref.cells), ref.size(), ref);
  s.space = ParameterSpace::reference(ref.size());
  return s;
}

std::vector<double> SensitivitySetup::time_grid() const {
  if (!(c_rate > 0.0) || grid_points == 0)
    throw DomainError("sensitivity setup: need c_rate > 0 and grid_points > 0");
  const double nominal = 3600.0 / c_rate;
  std::vector<double> g;
  for (std::size_t k = 1; k <= grid_points; ++k)
    g.push_back(nominal * static_cast<double>(k) / static_cast<double>(grid_points));
  return g;
}

std::vector<double> sensitivity_output(const SensitivitySetup &setup, std::span<const double> unit) {
  const auto cfg = setup.space.apply(setup.base, unit);
  auto proto = Protocol::discharge(setup.c_rate, setup.v_cutoff);
  const auto grid = setup.time_grid();
  proto.output_times = grid;
  const auto res = run(cfg, proto, setup.integrator);
  const auto n = res.n_cells;
  std::vector<double> out;
  out.reserve(grid.size());
  std::size_t j = 0;
  double last = 0.0;
  for (double t : grid) {
    while (j < res.size() && res.time[j] <= t + 1e-9) {
      const auto first = res.core_temp_c.begin() + static_cast<std::ptrdiff_t>(j * n);
      const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(n));
      last = *hi - *lo;
      ++j;
    }
    out.push_back(last);
  }
  return out;
}

SobolResult run_sobol_campaign(const SensitivitySetup &setup, const SaltelliOptions &options) {
  setup.base.validate();
  setup.space.validate(setup.base.size());
  const auto grid = setup.time_grid();
  const SeriesModel model = [&setup](std::span<const double> u) {
    return sensitivity_output(setup, u);
  };
  SaltelliOptions opts = options;
  std::ostringstream tag;
  tag.precision(17);
  tag << "sobol c_rate=" << setup.c_rate << " v_cutoff=" << setup.v_cutoff
      << " grid=" << setup.grid_points << " rtol=" << setup.integrator.rtol
      << " atol=" << setup.integrator.atol << " amb=" << setup.base.t_ambient_k;
  for (const auto &c : setup.base.cells)
    tag << ' ' << c.r_ohm << ' ' << c.r_contact << ' ' << c.r_ct0 << ' ' << c.r_w << ' ' << c.c_rc
        << ' ' << c.q_ah << ' ' << c.e_act;
  const auto &th = setup.base.thermal;
  tag << ' ' << th.c_p << ' ' << th.rth_core_surface << ' ' << th.rth_surface_ambient;
  for (const auto &d : setup.space.dims)
    tag << ' ' << d.cell << ':' << static_cast<int>(d.family) << ':' << d.lower << ':' << d.upper;
  opts.batch.checkpoint_tag += tag.str();
  auto r = saltelli_indices(setup.space.size(), grid.size(), model, opts);
  r.time = grid;
  const double nominal = 3600.0 / setup.c_rate;
  for (double t : grid)
    r.fraction.push_back(t / nominal);
  for (const auto &d : setup.space.dims) {
    r.dim_names.push_back(to_string(d.family) + "_" + std::to_string(d.cell + 1));
    r.dim_family.push_back(d.family);
  }
  for (const auto &e : r.per_time) {
    std::array<double, 3> s1{}, st{};
    for (std::size_t i = 0; i < e.s1.size(); ++i) {
      const auto f = static_cast<std::size_t>(r.dim_family[i]);
      s1[f] += e.s1[i];
      st[f] += e.st[i];
    }
    r.family_s1.push_back(s1);
    r.family_st.push_back(st);
  }
  r.output_definition = "core temperature spread max_k T_core - min_k T_core [C], " +
                        csv::format(setup.c_rate) + "C discharge to " +
                        csv::format(setup.v_cutoff) + " V";
  return r;
}

void write_sobol_csv(const SobolResult &r, std::ostream &out) {
  out << "t_s,fraction,s1_r_contact,s1_r_ohm,s1_q_cap,st_r_contact,st_r_ohm,st_q_cap\n";
  for (std::size_t t = 0; t < r.time.size(); ++t) {
    out << csv::format(r.time[t]) << ',' << csv::format(r.fraction[t]);
    for (double v : r.family_s1[t])
      out << ',' << csv::format(v);
    for (double v : r.family_st[t])
      out << ',' << csv::format(v);
    out << '\n';
  }
}

void write_sobol_json(const SobolResult &r, std::ostream &out) {
  nlohmann::ordered_json j;
  j["output"] = r.output_definition;
  j["n_base"] = r.n_base;
  j["evaluations"] = r.evaluations;
  j["failed_samples"] = r.failed_samples;
  j["failures"] = r.failures;
  j["dims"] = r.dim_names;
  j["time_s"] = r.time;
  j["fraction"] = r.fraction;
  auto series = nlohmann::ordered_json::array();
  for (const auto &e : r.per_time)
    series.push_back({{"variance", e.variance},
                      {"defined", e.defined},
                      {"s1", e.s1},
                      {"s1_se", e.s1_se},
                      {"st", e.st},
                      {"st_se", e.st_se}});
  j["indices"] = series;
  out << j.dump(2) << '\n';
}

} // namespace parapack
