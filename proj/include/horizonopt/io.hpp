#ifndef HORIZONOPT__IO_HPP_
#define HORIZONOPT__IO_HPP_

/**
 * @file
 * @brief Configuration documents, overrides and file output.
 *
 * Configs are JSON documents (schema "horizonopt.config/1").  Every float written to disk uses
 * 17 significant digits and every file starts with a schema tag.
 */

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "horizon.hpp"
#include "mesh.hpp"
#include "nonlinearity.hpp"
#include "objective.hpp"
#include "optimizer.hpp"
#include "problem.hpp"
#include "projection.hpp"

namespace horizonopt {

using json = nlohmann::json;

inline constexpr const char * config_schema = "horizonopt.config/1";
inline constexpr const char * library_version = "1.0.0";

/// %.17g
inline std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Everything a run needs, parsed from one document.
struct RunConfig
{
  /// document after overrides
  json document{};
  ProblemSpec spec{};
  OptimizerConfig optimizer{};
  std::optional<HorizonStudyConfig> horizon_study{};
  std::uint64_t seed{0};
  std::vector<double> epsilons{1e-3, 1e-4, 1e-5, 1e-6};
  std::size_t critical_directions{50};
  double growth_radius{0.1};
  std::size_t growth_samples{50};
};

namespace detail {

/// Field lookup with a dotted path in diagnostics.
class Reader
{
public:
  Reader(const json & j, std::string path) : j_(j), path_(std::move(path)) {}

  bool has(const char * key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

  Reader at(const char * key) const
  {
    if (!j_.is_object()) { fail("expected an object"); }
    if (!j_.contains(key)) { throw ConfigError("missing field '" + sub(key) + "'"); }
    return {j_.at(key), sub(key)};
  }

  double number() const
  {
    if (!j_.is_number()) { fail("expected a number"); }
    return j_.get<double>();
  }

  double number(const char * key, double fallback) const { return has(key) ? at(key).number() : fallback; }
  double number(const char * key) const { return at(key).number(); }

  long integer() const
  {
    if (!j_.is_number_integer()) { fail("expected an integer"); }
    return j_.get<long>();
  }

  long integer(const char * key, long fallback) const { return has(key) ? at(key).integer() : fallback; }

  bool boolean(const char * key, bool fallback) const
  {
    if (!has(key)) { return fallback; }
    const auto & v = j_.at(key);
    if (!v.is_boolean()) { Reader(v, sub(key)).fail("expected true or false"); }
    return v.get<bool>();
  }

  std::string string() const
  {
    if (!j_.is_string()) { fail("expected a string"); }
    return j_.get<std::string>();
  }

  std::string string(const char * key, const std::string & fallback) const
  {
    return has(key) ? at(key).string() : fallback;
  }

  std::vector<double> numbers() const
  {
    if (!j_.is_array()) { fail("expected an array of numbers"); }
    std::vector<double> out;
    for (std::size_t i = 0; i < j_.size(); ++i) { out.push_back(Reader(j_[i], path_ + "[" + std::to_string(i) + "]").number()); }
    return out;
  }

  std::array<double, 2> pair() const
  {
    const auto v = numbers();
    if (v.size() != 2) { fail("expected two numbers"); }
    return {v[0], v[1]};
  }

  const json & raw() const { return j_; }
  const std::string & path() const { return path_; }

  [[noreturn]] void fail(const std::string & msg) const { throw ConfigError("field '" + path_ + "': " + msg); }

private:
  std::string sub(const char * key) const { return path_.empty() ? key : path_ + "." + key; }

  const json & j_;
  std::string path_;
};

inline std::array<double, 2> point(const Reader & r, int dim)
{
  if (dim == 1) {
    if (r.raw().is_number()) { return {r.number(), 0.0}; }
    const auto v = r.numbers();
    if (v.size() != 1) { r.fail("expected a coordinate"); }
    return {v[0], 0.0};
  }
  return r.pair();
}

/// [a, b] in 1D, [[x0, x1], [y0, y1]] in 2D.
inline Region region(const Reader & r, int dim)
{
  if (dim == 1) {
    const auto v = r.pair();
    if (!(v[0] <= v[1])) { r.fail("lower bound exceeds upper bound"); }
    return {{v[0], 0.0}, {v[1], 0.0}};
  }
  if (!r.raw().is_array() || r.raw().size() != 2) { r.fail("expected [[x0, x1], [y0, y1]]"); }
  const auto x = Reader(r.raw()[0], r.path() + "[0]").pair();
  const auto y = Reader(r.raw()[1], r.path() + "[1]").pair();
  if (!(x[0] <= x[1]) || !(y[0] <= y[1])) { r.fail("lower bound exceeds upper bound"); }
  return {{x[0], y[0]}, {x[1], y[1]}};
}

inline Expression expression_term(const Reader & r, int dim)
{
  const std::string t = r.at("template").string();
  if (t == "zero") { return Expression::zero(); }
  if (t == "constant") { return Expression::constant(r.number("value")); }
  if (t == "gauss_decay") {
    return Expression::gauss_decay(
      r.number("amplitude"), point(r.at("center"), dim), r.number("width"), r.number("rate", 0.0));
  }
  if (t == "gauss_window") {
    return Expression::gauss_window(
      r.number("amplitude"), point(r.at("center"), dim), r.number("width"), r.number("t_on"), r.number("t_off"));
  }
  if (t == "cos_mode") {
    std::array<int, 2> k{1, 0};
    const auto & kj = r.at("k").raw();
    if (kj.is_number_integer()) {
      k[0] = kj.get<int>();
    } else if (kj.is_array() && kj.size() == 2 && kj[0].is_number_integer() && kj[1].is_number_integer()) {
      k = {kj[0].get<int>(), kj[1].get<int>()};
    } else {
      r.at("k").fail("expected an integer or two integers");
    }
    return Expression::cos_mode(r.number("amplitude"), k, r.number("rate", 0.0));
  }
  r.at("template").fail("unknown template '" + t + "'");
}

inline Expression expression(const Reader & r, int dim)
{
  if (r.raw().is_number()) { return Expression::constant(r.number()); }
  if (r.has("terms")) {
    const auto terms = r.at("terms");
    if (!terms.raw().is_array()) { terms.fail("expected an array"); }
    Expression sum;
    sum.name = "sum";
    for (std::size_t i = 0; i < terms.raw().size(); ++i) {
      const Expression e = expression_term(Reader(terms.raw()[i], terms.path() + "[" + std::to_string(i) + "]"), dim);
      sum.terms.insert(sum.terms.end(), e.terms.begin(), e.terms.end());
    }
    return sum;
  }
  return expression_term(r, dim);
}

inline std::size_t nonnegative(const Reader & r, const char * key, std::size_t fallback)
{
  if (!r.has(key)) { return fallback; }
  const long v = r.at(key).integer();
  if (v < 0) { r.at(key).fail("must be ≥ 0"); }
  return static_cast<std::size_t>(v);
}

inline OptimizerConfig optimizer(const Reader & r)
{
  OptimizerConfig c;
  c.initial_step = r.number("initial_step", c.initial_step);
  c.armijo_c1 = r.number("armijo_c1", c.armijo_c1);
  c.backtrack = r.number("backtrack", c.backtrack);
  c.tolerance = r.number("tolerance", c.tolerance);
  c.max_iterations = nonnegative(r, "max_iterations", c.max_iterations);
  c.max_step = r.number("max_step", c.max_step);
  if (r.has("seed")) { c.seed = static_cast<std::uint64_t>(r.at("seed").integer()); }
  c.newton.tolerance = r.number("newton_tolerance", c.newton.tolerance);
  c.newton.max_iterations = static_cast<int>(r.integer("newton_max_iterations", c.newton.max_iterations));
  c.validate();
  return c;
}

/// Line and column of a byte offset.
inline std::string location(const std::string & text, std::size_t byte)
{
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses JSON text; syntax errors carry line and column.
inline json parse_document(const std::string & text, const std::string & source = "<config>")
{
  try {
    return json::parse(text);
  } catch (const json::parse_error & e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError(source + ": " + detail::location(text, at) + ": malformed JSON (" + e.what() + ")");
  }
}

inline json read_document(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot read " + path.string()); }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str(), path.string());
}

/**
 * @brief Applies "a.b.c=value" to a document.  The value is parsed as JSON when possible and kept
 * as a string otherwise.  Only scalar fields can be overridden.
 */
inline void apply_override(json & doc, const std::string & assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) { throw ConfigError("override '" + assignment + "' is not key=value"); }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error &) {
    value = text;
  }
  if (value.is_object() || value.is_array()) { throw ConfigError("override '" + key + "' must be a scalar"); }
  json * node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) { throw ConfigError("override '" + key + "' has an empty path component"); }
    if (!node->is_object()) { throw ConfigError("override '" + key + "': '" + part + "' is not inside an object"); }
    node = &(*node)[part];
    if (dot == std::string::npos) { break; }
    start = dot + 1;
  }
  if (node->is_object() || node->is_array()) { throw ConfigError("override '" + key + "' targets a non-scalar field"); }
  *node = value;
}

/// Builds a run configuration from a document.  Assumptions are not checked here.
inline RunConfig parse_config(const json & doc)
{
  const detail::Reader root(doc, "");
  if (!doc.is_object()) { root.fail("the document must be an object"); }
  if (root.has("schema") && root.at("schema").string() != config_schema) {
    root.at("schema").fail(std::string("unsupported schema, expected ") + config_schema);
  }
  RunConfig rc;
  rc.document = doc;
  ProblemSpec & s = rc.spec;

  const auto mesh = root.at("mesh");
  const long dim = mesh.integer("dimension", 1);
  if (dim != 1 && dim != 2) { mesh.at("dimension").fail("must be 1 or 2"); }
  std::optional<Region> obs;
  if (mesh.has("omega_obs")) { obs = detail::region(mesh.at("omega_obs"), static_cast<int>(dim)); }
  const Region omega = detail::region(mesh.at("omega"), static_cast<int>(dim));
  try {
    if (dim == 1) {
      const auto d = mesh.at("domain").pair();
      const long n = mesh.at("elements").integer();
      s.mesh = SpatialMesh::interval(d[0], d[1], static_cast<int>(n), omega, obs);
    } else {
      const Region box = detail::region(mesh.at("domain"), 2);
      const auto n = mesh.at("elements").numbers();
      if (n.size() != 2) { mesh.at("elements").fail("expected [nx, ny]"); }
      s.mesh = SpatialMesh::rectangle(
        box.lower, box.upper, {static_cast<int>(n[0]), static_cast<int>(n[1])}, omega, obs);
    }
  } catch (const MeshError & e) {
    throw ConfigError(std::string("field 'mesh': ") + e.what());
  }

  DiffusionTensor a;
  double a0 = 0.0;
  if (root.has("operator")) {
    const auto op = root.at("operator");
    if (op.has("diffusion")) {
      const auto dr = op.at("diffusion");
      if (dr.raw().is_number()) {
        a.a11 = a.a22 = dr.number();
      } else {
        const auto v = dr.numbers();
        if (v.size() != 3) { dr.fail("expected a number or [a11, a12, a22]"); }
        a = {v[0], v[1], v[2]};
      }
    }
    a0 = op.number("reaction", 0.0);
  }
  s.form = EllipticForm::uniform(s.mesh, a, a0);

  if (root.has("nonlinearity")) {
    const auto nl = root.at("nonlinearity");
    try {
      s.nonlinearity = make_nonlinearity(nl.at("name").string(), nl.number("c", 1.0));
    } catch (const ConfigError & e) {
      nl.at("name").fail(e.what());
    }
  }

  const auto disc = root.at("discounts");
  s.discounts.sigma_s = disc.number("sigma_s");
  s.discounts.sigma_c = disc.number("sigma_c");
  if (disc.has("lambda_c")) { s.discounts.lambda_c = disc.number("lambda_c"); }
  if (disc.has("p")) { s.discounts.p = disc.number("p"); }
  s.require_sosc = disc.boolean("sosc", false);

  const auto data = root.at("data");
  const int d = static_cast<int>(dim);
  const Expression y0 = data.has("y0") ? detail::expression(data.at("y0"), d) : Expression::zero();
  s.source = SpaceTimeField::from(data.has("g") ? detail::expression(data.at("g"), d) : Expression::zero());
  s.target = SpaceTimeField::from(data.has("y_d") ? detail::expression(data.at("y_d"), d) : Expression::zero());
  s.nu = data.number("nu");
  const SpaceTimeField init = SpaceTimeField::from(y0);
  s.y0 = init.sample(s.mesh, 0, 0.0);

  const auto adm = root.at("admissible");
  const std::string kind = adm.at("kind").string();
  if (kind == "ball") {
    s.admissible.kind = AdmissibleSet::Kind::ball;
    s.admissible.gamma = adm.number("gamma");
  } else if (kind == "box") {
    s.admissible.kind = AdmissibleSet::Kind::box;
    s.admissible.alpha = adm.number("alpha");
    s.admissible.beta = adm.number("beta");
  } else {
    adm.at("kind").fail("expected \"ball\" or \"box\"");
  }

  const auto time = root.at("time");
  s.horizon = time.number("T");
  s.dt = time.number("dt");

  if (root.has("optimizer")) {
    try {
      rc.optimizer = detail::optimizer(root.at("optimizer"));
    } catch (const ConfigError & e) {
      throw ConfigError(std::string("field 'optimizer': ") + e.what());
    }
  }

  if (root.has("horizon_study")) {
    const auto hs = root.at("horizon_study");
    HorizonStudyConfig h;
    h.horizons = hs.at("horizons").numbers();
    if (hs.has("T_ref")) { h.reference_horizon = hs.number("T_ref"); }
    const std::string ext = hs.string("extension", "reference");
    if (ext == "zero") {
      h.extension = Extension::zero;
    } else if (ext != "reference") {
      hs.at("extension").fail("expected \"reference\" or \"zero\"");
    }
    h.threads = detail::nonnegative(hs, "threads", 0);
    h.optimizer = rc.optimizer;
    rc.horizon_study = h;
  }

  if (root.has("checks")) {
    const auto ck = root.at("checks");
    if (ck.has("epsilons")) { rc.epsilons = ck.at("epsilons").numbers(); }
    rc.critical_directions = detail::nonnegative(ck, "critical_directions", rc.critical_directions);
    rc.growth_radius = ck.number("growth_radius", rc.growth_radius);
    rc.growth_samples = detail::nonnegative(ck, "growth_samples", rc.growth_samples);
  }
  if (root.has("seed")) { rc.seed = static_cast<std::uint64_t>(root.at("seed").integer()); }
  return rc;
}

inline RunConfig load_config(const std::filesystem::path & path, const std::vector<std::string> & overrides = {})
{
  json doc = read_document(path);
  for (const auto & o : overrides) { apply_override(doc, o); }
  try {
    return parse_config(doc);
  } catch (const ConfigError & e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// CSV with a schema line, then "step,t,v0,...".
inline void write_trajectory_csv(const std::filesystem::path & path, const Trajectory & y)
{
  std::ofstream out(path);
  if (!out) { throw ConfigError("cannot write " + path.string()); }
  out << "# schema=horizonopt.trajectory/1 kind=" << to_string(y.kind) << " steps=" << y.grid.num_steps
      << " dt=" << format_double(y.grid.step) << "\n";
  out << "step,t";
  for (Eigen::Index j = 0; j < y.dofs(); ++j) { out << ",v" << j; }
  out << "\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    out << i << "," << format_double(y.grid.time(i));
    for (Eigen::Index j = 0; j < y.dofs(); ++j) { out << "," << format_double(y[i][j]); }
    out << "\n";
  }
}

/// Pretty-printed JSON.  Doubles come out in the shortest form that round-trips exactly.
inline void write_json(const std::filesystem::path & path, const json & j)
{
  std::ofstream out(path);
  if (!out) { throw ConfigError("cannot write " + path.string()); }
  out << j.dump(2) << "\n";
}

/// Finite doubles as numbers, non-finite ones as strings ("nan", "inf").
inline json number(double v)
{
  if (std::isfinite(v)) { return v; }
  if (std::isnan(v)) { return "nan"; }
  return v > 0 ? "inf" : "-inf";
}

inline json to_json(const CostBreakdown & c)
{
  return {{"tracking", number(c.tracking)}, {"control", number(c.control)}, {"total", number(c.total)}};
}

/// Without wall time, so repeated runs serialize identically.
inline json to_json(const SolveReport & r)
{
  json hist = json::array();
  for (const auto & h : r.history) { hist.push_back({number(h.cost), number(h.residual), number(h.step)}); }
  return {
    {"iterations", r.iterations},
    {"converged", r.converged},
    {"max_iterations_reached", r.max_iterations_reached},
    {"residual", number(r.residual)},
    {"cost", to_json(r.cost)},
    {"history_columns", {"cost", "residual", "step"}},
    {"history", hist}};
}

inline json to_json(const FormulaReport & r)
{
  json steps = json::array();
  for (const auto & s : r.records) { steps.push_back({{"t", number(s.t)}, {"case", to_string(s.which)}, {"residual", number(s.residual)}}); }
  return {{"max_residual", number(r.max_residual)}, {"worst_step", r.worst_step}, {"steps", steps}};
}

inline json to_json(const ValidationReport & r)
{
  json checks = json::array();
  for (const auto & c : r.checks) {
    checks.push_back(
      {{"name", c.name}, {"inequality", c.inequality}, {"passed", c.passed}, {"mandatory", c.mandatory}, {"detail", c.detail}});
  }
  return {{"passed", r.passed()}, {"checks", checks}};
}

/// Per-horizon sweep as CSV.
inline void write_sweep_csv(const std::filesystem::path & path, const HorizonStudyReport & r)
{
  std::ofstream out(path);
  if (!out) { throw ConfigError("cannot write " + path.string()); }
  out << "# schema=horizonopt.sweep/1 T_ref=" << format_double(r.reference_horizon) << " extension=" << to_string(r.extension) << "\n";
  out << "T,e_T,extended_error,state_error,state_error_sup,terminal_state_norm,bound_terminal,bound_target_tail,"
         "bound_source_tail,cost_T,cost_ref,cost_gap,iterations,residual\n";
  for (const auto & k : r.records) {
    out << format_double(k.T) << "," << format_double(k.control_error) << "," << format_double(k.extended_error) << ","
        << format_double(k.state_error) << "," << format_double(k.state_error_sup) << ","
        << format_double(k.terminal_state_norm) << "," << format_double(k.bound.terminal) << ","
        << format_double(k.bound.target_tail) << "," << format_double(k.bound.source_tail) << ","
        << format_double(k.cost) << "," << format_double(k.reference_cost) << "," << format_double(k.cost_gap) << ","
        << k.solve.iterations << "," << format_double(k.solve.residual) << "\n";
  }
}

inline json to_json(const HorizonStudyReport & r)
{
  json j{
    {"schema", "horizonopt.fit/1"},
    {"reference_horizon", number(r.reference_horizon)},
    {"extension", to_string(r.extension)},
    {"slope", number(r.slope)},
    {"intercept", number(r.intercept)},
    {"rate_threshold", number(r.rate_threshold)},
    {"rate", to_string(r.rate)},
    {"monotone", r.monotone},
    {"bound_constant", number(r.bound_constant)},
    {"warnings", r.warnings},
    {"reference_solve", to_json(r.reference_solve)}};
  if (r.cost_check_from) {
    j["cost_check_from_T"] = number(r.records[*r.cost_check_from].T);
  } else {
    j["cost_check_from_T"] = nullptr;
  }
  return j;
}

inline json to_json(const StateBoundCheck & c)
{
  json per = json::array();
  for (bool b : c.per_horizon) { per.push_back(b); }
  return {
    {"linear_exponent", number(c.linear_exponent)},
    {"power_exponent", number(c.power_exponent)},
    {"predicted_power_exponent", number(c.predicted_power_exponent)},
    {"linear_constant", number(c.linear_constant)},
    {"power_constant", number(c.power_constant)},
    {"gamma_ad", number(c.gamma_ad)},
    {"linear_pass", c.linear_pass},
    {"power_pass", c.power_pass},
    {"per_horizon", per}};
}

/// Log-linear plot of e_T against T.
inline void write_rate_svg(const std::filesystem::path & path, const HorizonStudyReport & r)
{
  std::vector<std::pair<double, double>> pts;
  for (const auto & k : r.records) {
    if (k.control_error > 0.0) { pts.emplace_back(k.T, std::log10(k.control_error)); }
  }
  std::ofstream out(path);
  if (!out) { throw ConfigError("cannot write " + path.string()); }
  const double W = 480, H = 320, m = 40;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts.front().first;
    y0 = y1 = pts.front().second;
    for (auto [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    if (x1 == x0) { x1 = x0 + 1; }
    if (y1 == y0) { y1 = y0 + 1; }
  }
  auto sx = [&](double x) { return m + (W - 2 * m) * (x - x0) / (x1 - x0); };
  auto sy = [&](double y) { return H - m - (H - 2 * m) * (y - y0) / (y1 - y0); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<!-- schema=horizonopt.plot/1 -->\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << m << "\" y=\"20\" font-size=\"12\">log10 e_T vs T, slope " << format_double(r.slope) << "</text>\n";
  out << "<polyline fill=\"none\" stroke=\"black\" points=\"";
  for (auto [x, y] : pts) { out << sx(x) << "," << sy(y) << " "; }
  out << "\"/>\n";
  for (auto [x, y] : pts) { out << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\"/>\n"; }
  out << "</svg>\n";
}

/// manifest.json: written when a run starts and rewritten when it finishes.
class RunManifest
{
public:
  RunManifest(std::filesystem::path dir, std::string command, const RunConfig & rc) : dir_(std::move(dir))
  {
    j_ = {
      {"schema", "horizonopt.manifest/1"},
      {"command", std::move(command)},
      {"version", library_version},
      {"config", rc.document},
      {"seeds", {{"run", rc.seed}}},
      {"outputs", json::array()},
      {"timings", json::object()},
      {"status", "running"}};
    if (rc.optimizer.seed) { j_["seeds"]["optimizer"] = *rc.optimizer.seed; }
    flush();
  }

  void output(const std::string & name) { j_["outputs"].push_back(name); }
  void timing(const std::string & stage, double seconds) { j_["timings"][stage] = seconds; }
  void set(const std::string & key, json value) { j_[key] = std::move(value); }

  void finish(const std::string & status)
  {
    j_["status"] = status;
    flush();
  }

private:
  void flush() const { write_json(dir_ / "manifest.json", j_); }

  std::filesystem::path dir_;
  json j_;
};

}  // namespace horizonopt

#endif  // HORIZONOPT__IO_HPP_
