#include "sdem/flow.hpp"

#include "sdem/parallel.hpp"

#include <cmath>
#include <limits>

namespace sdem {

std::size_t FlowPath::steps() const {
  return noise ? noise->grid().steps() : 0;
}

Eigen::Map<const Matrix> FlowPath::derivative_at(std::size_t k) const {
  const auto n = xi.rows();
  return {V.col(static_cast<Eigen::Index>(k)).data(), n, n};
}

double Ensemble::flagged_fraction() const {
  return paths.empty() ? 0.0 : static_cast<double>(flagged) / static_cast<double>(paths.size());
}

FlowPath integrate(const VectorFieldSet& fs, const Point& x0, const BrownianBatch& noise,
                   std::size_t path_index, bool retain, const StepVisitor& visitor) {
  const auto n = static_cast<Eigen::Index>(fs.n());
  const auto m = static_cast<Eigen::Index>(fs.m());
  if (x0.size() != n) throw Error("integrate: starting point has the wrong dimension");
  if (!x0.allFinite()) throw Error("integrate: starting point must be finite");
  if (noise.dim() != fs.m()) throw Error("integrate: noise dimension does not match the field");
  if (!fs.has_derivative()) throw Error("weak derivative unavailable for field '" + fs.name() + "'");

  const TimeGrid& grid = noise.grid();
  const std::size_t steps = grid.steps();
  const double dt = grid.dt();

  FlowPath path;
  path.path_index = path_index;
  path.noise = &noise;
  path.x0 = x0;
  if (retain) {
    path.xi.resize(n, static_cast<Eigen::Index>(steps + 1));
    path.V.resize(n * n, static_cast<Eigen::Index>(steps + 1));
  }

  Point xi = x0;
  Matrix V = Matrix::Identity(n, n);
  Matrix a(n, m + 1);
  Matrix da(n, n * (m + 1));
  Eigen::VectorXd dw(m);
  Matrix dV(n, n);
  Matrix term(n, n);
  Point dxi(n);
  double sup_v = V.norm();
  double int_g = 0.0;

  auto record = [&](std::size_t k) {
    if (!retain) return;
    const auto kk = static_cast<Eigen::Index>(k);
    path.xi.col(kk) = xi;
    path.V.col(kk) = Eigen::Map<const Eigen::VectorXd>(V.data(), n * n);
  };
  auto flag = [&](std::string reason) {
    path.flagged = true;
    path.flag_reason = std::move(reason);
  };

  record(0);
  for (std::size_t k = 0; k < steps; ++k) {
    fs.coefficients(xi, a);
    fs.derivatives(xi, da);
    noise.increment(path_index, k, {dw.data(), static_cast<std::size_t>(m)});
    if (visitor && !visitor(k, xi, V, a, da, dw)) {
      flag("visitor aborted at step " + std::to_string(k));
      break;
    }
    int_g += da.squaredNorm() * dt;

    dV.noalias() = dt * da.leftCols(n) * V;
    for (Eigen::Index l = 1; l <= m; ++l) {
      term.noalias() = da.middleCols(l * n, n) * V;
      dV += dw[l - 1] * term;
    }
    dxi.noalias() = a.rightCols(m) * dw;
    xi += dxi + dt * a.col(0);
    V += dV;

    if (!xi.allFinite() || !V.allFinite()) {
      flag("non-finite state at step " + std::to_string(k + 1));
      break;
    }
    sup_v = std::max(sup_v, V.norm());
    record(k + 1);
  }

  path.xi_T = xi;
  path.V_T = V;
  path.sup_v_norm = sup_v;
  path.int_g = int_g;
  return path;
}

Ensemble simulate(const VectorFieldSet& fs, const Point& x0, const BrownianBatch& noise,
                  const EnsembleOptions& options) {
  Ensemble ens;
  ens.paths.resize(noise.paths());
  parallel_for(noise.paths(), options.workers, [&](std::size_t i) {
    ens.paths[i] = integrate(fs, x0, noise, i, options.retain);
  });
  for (const auto& p : ens.paths) ens.flagged += p.flagged ? 1 : 0;
  return ens;
}

SupDistance sup_distance(const FlowPath& a, const FlowPath& b, double p) {
  if (!a.retained() || !b.retained()) throw Error("sup_distance: both paths must be retained");
  if (a.xi.cols() != b.xi.cols() || a.xi.rows() != b.xi.rows() || !a.noise || !b.noise ||
      !(a.noise->grid() == b.noise->grid())) {
    throw Error("sup_distance: grid mismatch");
  }
  double dx = 0.0;
  double dv = 0.0;
  for (Eigen::Index k = 0; k < a.xi.cols(); ++k) {
    dx = std::max(dx, (a.xi.col(k) - b.xi.col(k)).norm());
    dv = std::max(dv, (a.V.col(k) - b.V.col(k)).norm());
  }
  return {std::pow(dx, p), std::pow(dv, p)};
}

namespace {

void require_decreasing(const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw Error("eps ladder is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw Error("eps ladder entries must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw Error("eps ladder must be strictly decreasing");
  }
}

std::vector<VectorFieldSet> mollified_levels(const VectorFieldSet& fs, const std::vector<double>& eps_list,
                                             const QuadratureSpec& quad) {
  std::vector<VectorFieldSet> levels;
  levels.reserve(eps_list.size());
  for (double eps : eps_list) levels.push_back(mollify_field(fs, eps, quad).as_field());
  return levels;
}

}  // namespace

std::map<double, Ensemble> coupled_family(const VectorFieldSet& fs, const std::vector<double>& eps_list,
                                          const Point& x0, const BrownianBatch& noise,
                                          const QuadratureSpec& quad, bool include_unmollified,
                                          const EnsembleOptions& options) {
  require_decreasing(eps_list);
  EnsembleOptions opts = options;
  opts.retain = true;
  std::map<double, Ensemble> out;
  const auto levels = mollified_levels(fs, eps_list, quad);
  for (std::size_t i = 0; i < eps_list.size(); ++i) out[eps_list[i]] = simulate(levels[i], x0, noise, opts);
  if (include_unmollified) out[0.0] = simulate(fs, x0, noise, opts);
  return out;
}

LadderResult coupled_sup_moments(const VectorFieldSet& fs, const std::vector<double>& eps_list,
                                 const Point& x0, const BrownianBatch& noise, double p,
                                 const QuadratureSpec& quad, const EnsembleOptions& options) {
  require_decreasing(eps_list);
  if (eps_list.size() < 2) throw Error("eps ladder needs a reference level and at least one other");
  const auto levels = mollified_levels(fs, eps_list, quad);
  const std::size_t rows = eps_list.size() - 1;
  const std::size_t paths = noise.paths();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::vector<double>> dxi(rows, std::vector<double>(paths, nan));
  std::vector<std::vector<double>> dv(rows, std::vector<double>(paths, nan));
  std::vector<char> flagged(paths, 0);

  parallel_for(paths, options.workers, [&](std::size_t i) {
    const FlowPath ref = integrate(levels.back(), x0, noise, i, true);
    if (ref.flagged) {
      flagged[i] = 1;
      return;
    }
    std::vector<SupDistance> d(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const FlowPath level = integrate(levels[r], x0, noise, i, true);
      if (level.flagged) {
        flagged[i] = 1;
        return;
      }
      d[r] = sup_distance(level, ref, p);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      dxi[r][i] = d[r].xi;
      dv[r][i] = d[r].V;
    }
  });

  LadderResult result;
  result.paths = paths;
  for (char f : flagged) result.flagged += f ? 1 : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    result.rows.push_back({eps_list[r], eps_list.back(), summarize(dxi[r]), summarize(dv[r])});
  }
  return result;
}

EstimatorReport moment_sup(std::span<const FlowPath> ensemble, double p) {
  if (ensemble.empty()) throw Error("moment_sup: empty ensemble");
  std::vector<double> values(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    values[i] = ensemble[i].flagged ? std::numeric_limits<double>::quiet_NaN()
                                    : std::pow(ensemble[i].sup_v_norm, p);
  }
  return summarize(values);
}

ExpGReport exp_g_functional(std::span<const FlowPath> ensemble, double q) {
  if (ensemble.empty()) throw Error("exp_g_functional: empty ensemble");
  ExpGReport out;
  std::vector<double> values(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (ensemble[i].flagged) {
      values[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    values[i] = std::exp(6.0 * q * q * ensemble[i].int_g);
    if (std::isinf(values[i])) ++out.overflowed;
  }
  if (out.overflowed > 0) {
    std::size_t flagged = 0;
    for (const auto& p : ensemble) flagged += p.flagged ? 1 : 0;
    out.report.estimate = std::numeric_limits<double>::infinity();
    out.report.se = std::numeric_limits<double>::infinity();
    out.report.paths = ensemble.size() - flagged;
    out.report.excluded = flagged;
    return out;
  }
  out.report = summarize(values);
  return out;
}

DerivativeCheck spatial_derivative_check(const VectorFieldSet& fs, const Point& x0, const Point& v0,
                                         double h, const BrownianBatch& noise,
                                         const EnsembleOptions& options) {
  if (!(h > 0.0)) throw Error("spatial_derivative_check: h must be positive");
  if (v0.size() != x0.size()) throw Error("spatial_derivative_check: direction has the wrong dimension");
  const std::size_t paths = noise.paths();
  const auto n = x0.size();
  std::vector<Point> fd(paths), vt(paths);
  std::vector<char> bad(paths, 0);
  parallel_for(paths, options.workers, [&](std::size_t i) {
    const FlowPath center = integrate(fs, x0, noise, i, false);
    const FlowPath plus = integrate(fs, x0 + h * v0, noise, i, false);
    const FlowPath minus = integrate(fs, x0 - h * v0, noise, i, false);
    if (center.flagged || plus.flagged || minus.flagged) {
      bad[i] = 1;
      return;
    }
    fd[i] = (plus.xi_T - minus.xi_T) / (2.0 * h);
    vt[i] = center.V_T * v0;
  });
  DerivativeCheck out{Point::Zero(n), Point::Zero(n), 0.0, 0};
  std::size_t used = 0;
  for (std::size_t i = 0; i < paths; ++i) {
    if (bad[i]) {
      ++out.excluded;
      continue;
    }
    ++used;
    out.fd += fd[i];
    out.vt += vt[i];
    out.gap += (fd[i] - vt[i]).norm();
  }
  if (used == 0) throw Error("spatial_derivative_check: every path was flagged");
  out.fd /= static_cast<double>(used);
  out.vt /= static_cast<double>(used);
  out.gap /= static_cast<double>(used);
  return out;
}

}  // namespace sdem
