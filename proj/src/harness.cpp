#include "sdem/harness.hpp"

#include "sdem/fields.hpp"
#include "sdem/flow.hpp"
#include "sdem/io.hpp"
#include "sdem/kernel.hpp"
#include "sdem/malliavin.hpp"
#include "sdem/parallel.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sdem::harness {

using nlohmann::json;
using io::format_double;

namespace {

struct CommandInfo {
  Command command;
  const char* name;
};

constexpr CommandInfo kCommands[] = {
    {Command::converge_flow, "converge-flow"},
    {Command::converge_derivative, "converge-derivative"},
    {Command::gradient, "gradient"},
    {Command::kernel_bound, "kernel-bound"},
    {Command::condition_g, "condition-g"},
    {Command::ibp, "ibp"},
    {Command::moment, "moment"},
};

json num(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

Point to_point(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Point option_point(const json& options, const char* key, Eigen::Index n, double fill) {
  if (options.contains(key)) {
    const Point p = to_point(options.at(key).get<std::vector<double>>());
    if (p.size() != n) throw Error(std::string("option '") + key + "' has the wrong dimension");
    return p;
  }
  return Point::Constant(n, fill);
}

VectorFieldSet build_field(const ExperimentConfig& cfg) {
  VectorFieldSet fs = field_from_json(cfg.field);
  const double eps = cfg.options.value("mollify_eps", 0.0);
  if (eps > 0.0) fs = mollify_field(fs, eps, cfg.quad).as_field();
  return fs;
}

Point start_point(const ExperimentConfig& cfg, const VectorFieldSet& fs) {
  if (cfg.x0.empty()) return Point::Zero(static_cast<Eigen::Index>(fs.n()));
  if (cfg.x0.size() != fs.n()) throw Error("x0 has dimension " + std::to_string(cfg.x0.size()) +
                                           ", field has n = " + std::to_string(fs.n()));
  return to_point(cfg.x0);
}

struct TestFunction {
  ScalarFn f;
  GradientFn df;  // empty when f is not C^1
};

TestFunction test_function(const std::string& name, Eigen::Index n) {
  const Point e0 = Point::Unit(n, 0);
  if (name == "x") return {[](const Point& y) { return y[0]; }, [e0](const Point&) { return e0; }};
  if (name == "sin") {
    return {[](const Point& y) { return std::sin(y[0]); },
            [e0](const Point& y) { return Point(std::cos(y[0]) * e0); }};
  }
  if (name == "const") return {[](const Point&) { return 1.0; }, [n](const Point&) { return Point(Point::Zero(n)); }};
  if (name == "indicator") return {[](const Point& y) { return y[0] > 0.0 ? 1.0 : 0.0; }, {}};
  throw Error("unknown test function '" + name + "' (expected x, sin, const or indicator)");
}

struct PathTest {
  PathFunctional F;
  PathDerivative dF;
};

PathTest path_functional(const std::string& name) {
  if (name == "sin_end") {
    return {[](const FlowPath& p) { return std::sin(p.xi_T[0]); },
            [](const FlowPath& p, const Matrix& tangent) {
              return std::cos(p.xi_T[0]) * tangent(0, tangent.cols() - 1);
            }};
  }
  if (name == "end") {
    return {[](const FlowPath& p) { return p.xi_T[0]; },
            [](const FlowPath&, const Matrix& tangent) { return tangent(0, tangent.cols() - 1); }};
  }
  if (name == "const") {
    return {[](const FlowPath&) { return 1.0; }, [](const FlowPath&, const Matrix&) { return 0.0; }};
  }
  if (name == "time_average") {
    // left-point average of the first coordinate over the grid
    return {[](const FlowPath& p) { return p.xi.row(0).head(p.xi.cols() - 1).mean(); },
            [](const FlowPath&, const Matrix& tangent) { return tangent.row(0).head(tangent.cols() - 1).mean(); }};
  }
  throw Error("unknown path functional '" + name + "' (expected sin_end, end, const or time_average)");
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string line;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) line += ',';
    line += c;
    first = false;
  }
  return line + '\n';
}

std::string json_text(const json& doc) { return doc.dump(2) + '\n'; }

Check agreement(const std::string& name, const EstimatorReport& a, const EstimatorReport& b, double k,
                double floor) {
  const double gap = std::abs(a.estimate - b.estimate);
  const double tol = k * pooled_se(a, b) + floor;
  return {name, gap <= tol, "gap " + format_double(gap) + " vs " + format_double(tol)};
}

Check flagged_check(std::size_t flagged, std::size_t total) {
  const double frac = total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total);
  return {"flagged fraction < 1e-4", frac < 1e-4, format_double(frac)};
}

// ---------------------------------------------------------------------------

CommandResult run_converge(const ExperimentConfig& cfg, bool derivative) {
  const VectorFieldSet fs = field_from_json(cfg.field);
  const Point x0 = start_point(cfg, fs);
  const double p = cfg.options.value("p", 2.0);
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.T, cfg.steps), fs.m());
  const LadderResult ladder = coupled_sup_moments(fs, cfg.eps, x0, noise, p, cfg.quad, {cfg.workers, false});
  const std::string hash = hex64(cfg.fingerprint());
  const std::string stem = derivative ? "converge_derivative" : "converge_flow";

  std::string csv = csv_line({"eps", "reference_eps", "p", "moment", "se", "paths", "excluded", "config_hash"});
  std::string dat = "# config_hash=" + hash + "\n# eps moment se\n";
  json rows = json::array();
  for (const auto& row : ladder.rows) {
    const EstimatorReport& r = derivative ? row.V : row.xi;
    csv += csv_line({format_double(row.eps), format_double(row.reference_eps), format_double(p),
                     format_double(r.estimate), format_double(r.se), std::to_string(r.paths),
                     std::to_string(r.excluded), hash});
    dat += format_double(row.eps) + ' ' + format_double(r.estimate) + ' ' + format_double(r.se) + '\n';
    rows.push_back({{"eps", row.eps}, {"moment", num(r.estimate)}, {"se", num(r.se)}});
  }

  CommandResult out;
  const double k = cfg.options.value("trend_se", 2.0);
  bool monotone = true;
  std::string detail;
  for (std::size_t i = 0; i + 1 < ladder.rows.size(); ++i) {
    const auto& a = derivative ? ladder.rows[i].V : ladder.rows[i].xi;
    const auto& b = derivative ? ladder.rows[i + 1].V : ladder.rows[i + 1].xi;
    const bool ok = b.estimate <= a.estimate + k * pooled_se(a, b);
    monotone = monotone && ok;
    detail += format_double(a.estimate) + (ok ? " >= " : " < ") + format_double(b.estimate) + "; ";
  }
  out.checks.push_back({"nonincreasing along the eps ladder (within " + format_double(k) + " SE)", monotone, detail});
  out.checks.push_back(flagged_check(ladder.flagged, ladder.paths));
  out.files.emplace_back(stem + ".csv", csv);
  out.files.emplace_back(stem + ".dat", dat);
  out.summary = {{"command", stem}, {"rows", rows}, {"flagged", ladder.flagged}, {"config_hash", hash}};
  return out;
}

CommandResult run_gradient(const ExperimentConfig& cfg) {
  const VectorFieldSet fs = build_field(cfg);
  const Point x0 = start_point(cfg, fs);
  const auto n = static_cast<Eigen::Index>(fs.n());
  const Point v0 = option_point(cfg.options, "v0", n, 0.0).norm() > 0 ? option_point(cfg.options, "v0", n, 0.0)
                                                                      : Point(Point::Unit(n, 0));
  const std::string fname = cfg.options.value("f", std::string("x"));
  const TestFunction tf = test_function(fname, n);
  const double h = cfg.options.value("h", 1e-3);
  const double k = cfg.options.value("agreement_se", 3.0);
  const double floor = cfg.options.value("agreement_floor", 1e-8);
  const std::string hash = hex64(cfg.fingerprint());

  MonteCarloConfig mc{cfg.T, cfg.steps, cfg.paths, cfg.seed, cfg.workers, cfg.fingerprint()};
  const EstimatorReport bismut = bismut_gradient(fs, tf.f, x0, v0, mc);
  const EstimatorReport fd = fd_gradient(fs, tf.f, x0, v0, h, mc);
  std::optional<EstimatorReport> inter;
  if (tf.df) inter = intertwine_gradient(fs, tf.df, x0, v0, mc);

  CommandResult out;
  json doc = {{"bismut", io::report_json(bismut)}, {"fd", io::report_json(fd)}, {"config_hash", hash},
              {"f", fname}, {"t", cfg.T}};
  doc["intertwine"] = inter ? io::report_json(*inter) : json(nullptr);
  json gaps = json::object();
  json ses = json::object();
  auto pair = [&](const std::string& name, const EstimatorReport& a, const EstimatorReport& b) {
    gaps[name] = num(std::abs(a.estimate - b.estimate));
    ses[name] = num(pooled_se(a, b));
    out.checks.push_back(agreement(name + " agree", a, b, k, floor));
  };
  pair("bismut_fd", bismut, fd);
  if (inter) {
    pair("bismut_intertwine", bismut, *inter);
    pair("intertwine_fd", *inter, fd);
  }
  doc["gaps"] = gaps;
  doc["pooled_se"] = ses;
  if (cfg.options.contains("target")) {
    const double target = cfg.options.at("target").get<double>();
    const double rel_tol = cfg.options.value("target_rel_tol", 0.01);
    double var = bismut.se * bismut.se + fd.se * fd.se;
    if (inter) var += inter->se * inter->se;
    const double pooled = std::sqrt(var);
    doc["target"] = target;
    doc["target_pooled_se"] = pooled;
    auto hit = [&](const std::string& name, const EstimatorReport& r) {
      const double gap = std::abs(r.estimate - target);
      out.checks.push_back({name + " within " + format_double(k) + " pooled SE of target", gap <= k * pooled + floor,
                            "gap " + format_double(gap) + " vs " + format_double(k * pooled + floor)});
      out.checks.push_back({name + " within " + format_double(rel_tol) + " of target", gap <= rel_tol * std::abs(target),
                            "gap " + format_double(gap)});
    };
    hit("bismut", bismut);
    hit("fd", fd);
    if (inter) hit("intertwine", *inter);
  }
  std::size_t excluded = bismut.excluded + fd.excluded + (inter ? inter->excluded : 0);
  out.checks.push_back(flagged_check(excluded, 3 * cfg.paths));
  out.files.emplace_back("gradient.json", json_text(doc));
  out.summary = doc;
  return out;
}

std::vector<Point> query_points(const json& options, Eigen::Index n) {
  const json q = options.value("query", json{{"lo", -4.0}, {"hi", 4.0}, {"count", 21}});
  std::vector<Point> points;
  if (q.contains("points")) {
    for (const auto& p : q.at("points")) points.push_back(to_point(p.get<std::vector<double>>()));
    return points;
  }
  const double lo = q.value("lo", -4.0);
  const double hi = q.value("hi", 4.0);
  const auto count = q.value("count", std::size_t{21});
  if (count < 2) throw Error("query: count must be at least 2");
  std::size_t total = 1;
  for (Eigen::Index d = 0; d < n; ++d) total *= count;
  for (std::size_t flat = 0; flat < total; ++flat) {
    Point y(n);
    std::size_t rem = flat;
    for (Eigen::Index d = 0; d < n; ++d) {
      y[d] = lo + (hi - lo) * static_cast<double>(rem % count) / static_cast<double>(count - 1);
      rem /= count;
    }
    points.push_back(y);
  }
  return points;
}

CommandResult run_kernel_bound(const ExperimentConfig& cfg) {
  const VectorFieldSet fs = build_field(cfg);
  const Point x0 = start_point(cfg, fs);
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.T, cfg.steps), fs.m());
  std::vector<Point> endpoints(cfg.paths);
  std::vector<char> flagged(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t i) {
    FlowPath path = integrate(fs, x0, noise, i, false);
    flagged[i] = path.flagged ? 1 : 0;
    endpoints[i] = std::move(path.xi_T);
  });
  std::vector<Point> samples;
  samples.reserve(cfg.paths);
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < cfg.paths; ++i) {
    if (flagged[i]) {
      ++excluded;
    } else {
      samples.push_back(std::move(endpoints[i]));
    }
  }

  DensityQuery query;
  query.t = cfg.T;
  query.x = x0;
  query.query_points = query_points(cfg.options, x0.size());
  query.bandwidth = cfg.options.contains("bandwidth") && !cfg.options.at("bandwidth").is_null()
                        ? cfg.options.at("bandwidth").get<double>()
                        : silverman_bandwidth(samples);
  const DensityEstimate est = density_estimate(samples, query, cfg.workers);
  const double C1 = cfg.options.value("C1", 1.05);
  const double C1_max = cfg.options.value("C1_max", 1.1);
  const double margin = cfg.options.value("se_margin", 3.0);
  double violation = 0.0;
  const bool holds = kernel_bound_holds(est, query, C1, margin, &violation);
  const KernelBoundFit fit = kernel_bound_fit(est, query, 1.0, 20.0, 200, margin);
  const std::string hash = hex64(cfg.fingerprint());

  // density_csv plus the fingerprint column
  std::istringstream body(density_csv(query, est, C1));
  std::string csv;
  std::string line;
  bool header = true;
  while (std::getline(body, line)) {
    csv += line + (header ? ",config_hash\n" : "," + hash + "\n");
    header = false;
  }
  std::string dat = "# config_hash=" + hash + "\n# y density se\n";
  for (std::size_t i = 0; i < est.density.size(); ++i) {
    dat += format_double(query.query_points[i][0]) + ' ' + format_double(est.density[i]) + ' ' +
           format_double(est.se[i]) + '\n';
  }

  CommandResult out;
  json doc = {{"C1", C1},
              {"holds_at_C1", holds},
              {"violation_at_C1", num(violation)},
              {"C1_min", fit.C1_min},
              {"satisfied", fit.satisfied},
              {"max_violation", num(fit.max_violation)},
              {"bandwidth", query.bandwidth},
              {"samples", samples.size()},
              {"excluded", excluded},
              {"degenerate", est.degenerate},
              {"config_hash", hash}};
  out.checks.push_back({"bound holds at C1 = " + format_double(C1), holds, "violation " + format_double(violation)});
  out.checks.push_back({"C1_min <= " + format_double(C1_max), fit.satisfied && fit.C1_min <= C1_max,
                        "C1_min " + format_double(fit.C1_min)});
  out.checks.push_back(flagged_check(excluded, cfg.paths));
  out.files.emplace_back("kernel_bound.csv", csv);
  out.files.emplace_back("kernel_bound.json", json_text(doc));
  out.files.emplace_back("kernel_bound.dat", dat);
  out.summary = doc;
  return out;
}

CommandResult run_condition_g(const ExperimentConfig& cfg) {
  const VectorFieldSet fs = build_field(cfg);
  const Point x0 = start_point(cfg, fs);
  const double sigma = cfg.options.value("sigma", 0.5);
  const double T0 = cfg.options.value("T0", 1.0);
  const auto samples = cfg.options.value("samples", std::size_t{10000});
  ConditionGOptions opts;
  opts.ratio = cfg.options.value("ratio", opts.ratio);
  opts.doublings = cfg.options.value("doublings", opts.doublings);
  opts.blocks = cfg.options.value("blocks", opts.blocks);
  const ConditionGResult r = condition_g_estimate(fs, sigma, T0, x0, samples, cfg.seed, opts);
  const std::string hash = hex64(cfg.fingerprint());

  json ladder = json::array();
  std::string dat = "# config_hash=" + hash + "\n# samples estimate\n";
  for (const auto& [count, value] : r.ladder) {
    ladder.push_back({{"samples", count}, {"estimate", num(value)}});
    dat += std::to_string(count) + ' ' + format_double(value) + '\n';
  }
  json doc = {{"estimate", num(r.estimate)}, {"diverging", r.diverging}, {"growth", num(r.growth)},
              {"last_change", num(r.last_change)}, {"sigma", sigma}, {"T0", T0},
              {"ladder", ladder}, {"config_hash", hash}};

  CommandResult out;
  if (cfg.options.contains("expect_diverging")) {
    const bool expected = cfg.options.at("expect_diverging").get<bool>();
    out.checks.push_back({std::string("diverging flag is ") + (expected ? "set" : "clear"), r.diverging == expected,
                          "growth " + format_double(r.growth)});
  }
  if (!r.diverging) {
    const double tol = cfg.options.value("stable_tol", 0.05);
    out.checks.push_back({"stable under sample doubling (within " + format_double(tol) + ")",
                          std::isfinite(r.estimate) && r.last_change <= tol,
                          "last change " + format_double(r.last_change)});
  }
  out.files.emplace_back("condition_g.json", json_text(doc));
  out.files.emplace_back("condition_g.dat", dat);
  out.summary = doc;
  return out;
}

CommandResult run_ibp(const ExperimentConfig& cfg) {
  const VectorFieldSet fs = build_field(cfg);
  const Point x0 = start_point(cfg, fs);
  const auto n = static_cast<Eigen::Index>(fs.n());
  const std::string fname = cfg.options.value("F", std::string("sin_end"));
  const PathTest test = path_functional(fname);
  const Point hdot = option_point(cfg.options, "hdot", n, 1.0);
  const double k = cfg.options.value("agreement_se", 3.0);
  const double floor = cfg.options.value("agreement_floor", 1e-8);
  const std::string hash = hex64(cfg.fingerprint());

  MonteCarloConfig mc{cfg.T, cfg.steps, cfg.paths, cfg.seed, cfg.workers, cfg.fingerprint()};
  const IbpResult r = ibp_check(fs, test.F, test.dF, CameronMartinPath::constant(hdot), x0, mc);

  CommandResult out;
  const bool ok = r.gap <= k * r.se + floor;
  json doc = {{"lhs", io::report_json(r.lhs)}, {"rhs", io::report_json(r.rhs)}, {"gap", num(r.gap)},
              {"se", num(r.se)}, {"verdict", ok}, {"F", fname}, {"config_hash", hash}};
  out.checks.push_back({"lhs and rhs agree within " + format_double(k) + " pooled SE", ok,
                        "gap " + format_double(r.gap) + " vs " + format_double(k * r.se + floor)});

  // Closed form for Brownian motion in 1-d with F = sin(gamma_T):
  // E cos(x + W_T) h_T = h_T cos(x) exp(-T/2).
  const std::string family = cfg.field.value("name", std::string());
  if (family == "bm" && n == 1 && fname == "sin_end" && !(cfg.options.value("mollify_eps", 0.0) > 0.0)) {
    const double target = hdot[0] * cfg.T * std::cos(x0[0]) * std::exp(-0.5 * cfg.T);
    doc["target"] = target;
    for (const auto& [name, rep] : {std::pair{"lhs", r.lhs}, std::pair{"rhs", r.rhs}}) {
      const double gap = std::abs(rep.estimate - target);
      out.checks.push_back({std::string(name) + " hits closed form within " + format_double(k) + " SE",
                            gap <= k * rep.se + floor, "gap " + format_double(gap) + " vs " + format_double(k * rep.se)});
    }
  }
  out.checks.push_back(flagged_check(r.lhs.excluded, cfg.paths));
  out.files.emplace_back("ibp.json", json_text(doc));
  out.summary = doc;
  return out;
}

CommandResult run_moment(const ExperimentConfig& cfg) {
  const VectorFieldSet fs = build_field(cfg);
  const Point x0 = start_point(cfg, fs);
  const double p = cfg.options.value("p", 2.0);
  const double C = cfg.options.value("C", 1.0);
  const double k = cfg.options.value("agreement_se", 3.0);
  const bool dump = cfg.options.value("dump", false);
  const BrownianBatch noise(cfg.seed, cfg.paths, TimeGrid(cfg.T, cfg.steps), fs.m());
  const Ensemble ens = simulate(fs, x0, noise, {cfg.workers, cfg.options.value("retain", false)});
  const EstimatorReport lhs = moment_sup(ens.paths, p);
  const ExpGReport rhs = exp_g_functional(ens.paths, p);
  const std::string hash = hex64(cfg.fingerprint());

  const double log_lhs = std::log(lhs.estimate);
  const double log_rhs = std::log(C * rhs.report.estimate);
  auto rel = [](const EstimatorReport& r) { return r.estimate > 0 ? r.se / r.estimate : 0.0; };
  const double combined = std::hypot(rel(lhs), std::isfinite(rhs.report.se) ? rel(rhs.report) : 0.0);
  const bool ok = std::isfinite(log_lhs) && log_lhs <= log_rhs + k * combined;

  EstimatorReport l = lhs, r = rhs.report;
  l.config_hash = r.config_hash = cfg.fingerprint();
  json doc = {{"sup_moment", io::report_json(l)}, {"exp_g_bound", io::report_json(r)},
              {"overflowed", rhs.overflowed}, {"log_sup_moment", num(log_lhs)}, {"log_exp_g_bound", num(log_rhs)},
              {"combined_log_se", num(combined)}, {"inequality_ok", ok}, {"p", p}, {"C", C},
              {"config_hash", hash}};
  CommandResult out;
  out.checks.push_back({"log E sup|V|^p <= log(C E exp(6p^2 int G)) + " + format_double(k) + " SE", ok,
                        format_double(log_lhs) + " vs " + format_double(log_rhs)});
  out.checks.push_back(flagged_check(ens.flagged, ens.paths.size()));
  out.files.emplace_back("moment.json", json_text(doc));
  if (dump) {
    std::ostringstream bin(std::ios::binary);
    io::write_dump(bin, io::ensemble_dump(ens, cfg.fingerprint()));
    out.files.emplace_back("moment.sdem", bin.str());
  }
  out.summary = doc;
  return out;
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& info : kCommands) {
    std::string underscored = info.name;
    for (auto& c : underscored) c = c == '-' ? '_' : c;
    if (name == info.name || name == underscored) return info.command;
  }
  return std::nullopt;
}

std::string command_name(Command c) {
  for (const auto& info : kCommands) {
    if (info.command == c) return info.name;
  }
  return "unknown";
}

std::vector<Command> all_commands() {
  std::vector<Command> out;
  for (const auto& info : kCommands) out.push_back(info.command);
  return out;
}

json ExperimentConfig::to_json() const {
  return {{"command", command_name(command)},
          {"field", field},
          {"eps", eps},
          {"T", T},
          {"steps", steps},
          {"paths", paths},
          {"seed", seed},
          {"x0", x0},
          {"quad", quad_to_json(quad)},
          {"options", options}};
}

std::uint64_t ExperimentConfig::fingerprint() const { return fnv1a64(to_json().dump()); }

ExperimentConfig default_config(Command c) {
  ExperimentConfig cfg;
  cfg.command = c;
  cfg.eps = {0.2, 0.1, 0.05, 0.025};
  cfg.x0 = {0.0};
  cfg.workers = default_workers();
  switch (c) {
    case Command::converge_flow:
    case Command::converge_derivative:
      cfg.field = {{"name", "log_example"}, {"params", {1.0}}};
      cfg.T = 0.25;
      cfg.steps = 250;
      cfg.paths = 10000;
      cfg.options = {{"p", 2.0}, {"trend_se", 2.0}};
      break;
    case Command::gradient:
      cfg.field = {{"name", "ou"}, {"params", {1.0}}};
      cfg.T = 0.5;
      cfg.steps = 500;
      cfg.paths = 100000;
      cfg.options = {{"f", "x"}, {"h", 1e-3}, {"v0", {1.0}}, {"agreement_se", 3.0}};
      break;
    case Command::kernel_bound:
      cfg.field = {{"name", "bm"}, {"params", {1.0}}};
      cfg.T = 1.0;
      cfg.steps = 20;
      cfg.paths = 1000000;
      cfg.options = {{"C1", 1.05}, {"C1_max", 1.1}, {"se_margin", 3.0},
                     {"query", {{"lo", -4.0}, {"hi", 4.0}, {"count", 21}}}};
      break;
    case Command::condition_g:
      cfg.field = {{"name", "log_example"}, {"params", {1.0}}};
      cfg.options = {{"sigma", 0.5}, {"T0", 1.0}, {"samples", 10000}, {"ratio", 2.0},
                     {"doublings", 6}, {"blocks", 16}, {"stable_tol", 0.05}};
      break;
    case Command::ibp:
      cfg.field = {{"name", "bm"}, {"params", {1.0}}};
      cfg.T = 0.5;
      cfg.steps = 500;
      cfg.paths = 100000;
      cfg.x0 = {0.3};
      cfg.options = {{"F", "sin_end"}, {"hdot", {1.0}}, {"agreement_se", 3.0}};
      break;
    case Command::moment:
      cfg.field = {{"name", "ou"}, {"params", {1.0}}};
      cfg.T = 0.25;
      cfg.steps = 250;
      cfg.paths = 10000;
      cfg.options = {{"p", 2.0}, {"C", 1.0}, {"agreement_se", 3.0}};
      break;
  }
  return cfg;
}

ExperimentConfig load_config(Command c, const json& doc) {
  ExperimentConfig cfg = default_config(c);
  if (doc.is_null()) return cfg;
  if (!doc.is_object()) throw Error("config: top level must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "field") {
      cfg.field = value;
    } else if (key == "eps") {
      cfg.eps = value.get<std::vector<double>>();
    } else if (key == "T") {
      cfg.T = value.get<double>();
    } else if (key == "steps") {
      cfg.steps = value.get<std::size_t>();
    } else if (key == "paths") {
      cfg.paths = value.get<std::size_t>();
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "x0") {
      cfg.x0 = value.get<std::vector<double>>();
    } else if (key == "quad") {
      cfg.quad = quad_from_json(value);
    } else if (key == "out") {
      cfg.out_dir = value.get<std::string>();
    } else if (key == "workers") {
      cfg.workers = value.get<std::size_t>();
    } else if (key == "command") {
      // informational; the CLI subcommand decides
    } else if (key == "options") {
      cfg.options.update(value);
    } else {
      cfg.options[key] = value;
    }
  }
  if (cfg.paths == 0) throw Error("config: paths must be positive");
  return cfg;
}

bool CommandResult::ok() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

const std::string& CommandResult::file(const std::string& name) const {
  for (const auto& [n, contents] : files) {
    if (n == name) return contents;
  }
  throw Error("no output file '" + name + "'");
}

CommandResult run(const ExperimentConfig& config) {
  CommandResult out;
  switch (config.command) {
    case Command::converge_flow: out = run_converge(config, false); break;
    case Command::converge_derivative: out = run_converge(config, true); break;
    case Command::gradient: out = run_gradient(config); break;
    case Command::kernel_bound: out = run_kernel_bound(config); break;
    case Command::condition_g: out = run_condition_g(config); break;
    case Command::ibp: out = run_ibp(config); break;
    case Command::moment: out = run_moment(config); break;
  }
  out.files.emplace_back(command_name(config.command) + ".config.json",
                         json_text({{"config", config.to_json()}, {"config_hash", hex64(config.fingerprint())}}));
  return out;
}

void write_outputs(const CommandResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : result.files) {
    std::ofstream os(dir / name, std::ios::binary);
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw Error("could not write " + (dir / name).string());
  }
}

std::string extract_fingerprint(const std::string& contents) {
  if (contents.rfind("SDEM", 0) == 0) {
    std::istringstream is(contents, std::ios::binary);
    return hex64(io::read_dump(is).config_hash);
  }
  if (const auto pos = contents.find("# config_hash="); pos != std::string::npos) {
    return contents.substr(pos + 14, 16);
  }
  if (!contents.empty() && contents.front() == '{') {
    const json doc = json::parse(contents);
    if (doc.contains("config_hash")) return doc.at("config_hash").get<std::string>();
  }
  // CSV: config_hash column of the first data row
  std::istringstream is(contents);
  std::string header, row;
  if (std::getline(is, header) && std::getline(is, row)) {
    auto split = [](const std::string& line) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      return cells;
    };
    const auto names = split(header);
    const auto cells = split(row);
    for (std::size_t i = 0; i < names.size() && i < cells.size(); ++i) {
      if (names[i] == "config_hash") return cells[i];
    }
  }
  throw Error("no config fingerprint found");
}

CompareResult compare_files(const std::filesystem::path& a, const std::filesystem::path& b) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw Error("cannot open " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const std::string ca = slurp(a);
  const std::string cb = slurp(b);
  CompareResult r{extract_fingerprint(ca), extract_fingerprint(cb), ca == cb};
  if (r.hash_a != r.hash_b) {
    throw Error("fingerprint mismatch: " + a.string() + " has " + r.hash_a + ", " + b.string() + " has " + r.hash_b);
  }
  return r;
}

}  // namespace sdem::harness
